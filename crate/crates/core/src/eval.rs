//! Retrieval metrics: per-class top-1, top-5 and mean rank of the target
//! document, macro-averaged over classes.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub top1: f64,
    pub top5: f64,
    pub mean_rank: f64,
    pub image_count: usize,
}

/// Percentages for top-n, 1-based mean rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub top1: f64,
    pub top5: f64,
    pub mean_rank: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
}

/// Score rankings against ground truth. Each class contributes equally
/// regardless of its image count.
pub fn evaluate<'a, I>(rankings: I, truth: &HashMap<String, String>) -> Result<EvalResult>
where
    I: IntoIterator<Item = (&'a str, &'a [String])>,
{
    let mut ranks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (image_id, ranking) in rankings {
        let target = truth.get(image_id).ok_or_else(|| Error::Unknown {
            kind: "ground truth for image",
            id: image_id.to_owned(),
        })?;
        let pos = ranking.iter().position(|d| d == target).ok_or_else(|| {
            Error::invalid(format!(
                "target document '{target}' of image '{image_id}' is missing from its ranking"
            ))
        })?;
        ranks.entry(target.as_str()).or_default().push(pos + 1);
    }
    if ranks.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let per_class: BTreeMap<String, ClassMetrics> = ranks
        .into_iter()
        .map(|(class, r)| {
            let n = r.len() as f64;
            let within = |k: usize| 100.0 * r.iter().filter(|&&x| x <= k).count() as f64 / n;
            let m = ClassMetrics {
                top1: within(1),
                top5: within(5),
                mean_rank: r.iter().sum::<usize>() as f64 / n,
                image_count: r.len(),
            };
            (class.to_owned(), m)
        })
        .collect();
    let c = per_class.len() as f64;
    let macro_avg = |f: fn(&ClassMetrics) -> f64| per_class.values().map(f).sum::<f64>() / c;
    Ok(EvalResult {
        top1: macro_avg(|m| m.top1),
        top5: macro_avg(|m| m.top5),
        mean_rank: macro_avg(|m| m.mean_rank),
        per_class,
    })
}

/// Expected metrics of a uniformly random ranking over `k` documents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomExpectation {
    /// `(n, percentage)` for each requested `n`.
    pub top_n: Vec<(usize, f64)>,
    pub mean_rank: f64,
}

pub fn expected_random_metrics(k: usize, n_list: &[usize]) -> Result<RandomExpectation> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(RandomExpectation {
        top_n: n_list.iter().map(|&n| (n, 100.0 * n.min(k) as f64 / k as f64)).collect(),
        mean_rank: (k as f64 + 1.0) / 2.0,
    })
}

/// Table of `(method, result)` rows: top-1, top-5 (higher is better) and
/// mean rank (lower is better).
pub fn format_report(rows: &[(&str, &EvalResult)]) -> String {
    let width = rows.iter().map(|(m, _)| m.len()).max().unwrap_or(0).max("method".len());
    let mut out = format!("{:<width$}  {:>8}  {:>8}  {:>8}\n", "method", "top-1↑", "top-5↑", "MR↓");
    for (method, r) in rows {
        let _ = writeln!(out, "{method:<width$}  {:>8.2}  {:>8.2}  {:>8.2}", r.top1, r.top5, r.mean_rank);
    }
    out
}

#[derive(Serialize)]
struct ClassLine<'a> {
    class: &'a str,
    top1: f64,
    top5: f64,
    mean_rank: f64,
    images: usize,
}

/// One JSON object per class, in class order.
pub fn format_per_class(result: &EvalResult) -> String {
    result
        .per_class
        .iter()
        .map(|(class, m)| {
            let line = ClassLine {
                class,
                top1: m.top1,
                top5: m.top5,
                mean_rank: m.mean_rank,
                images: m.image_count,
            };
            serde_json::to_string(&line).expect("plain record serializes") + "\n"
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i}")).collect()
    }

    /// A ranking of `docs` placing `target` at 1-based `rank`.
    fn placed(target: &str, rank: usize, n: usize) -> Vec<String> {
        let mut r: Vec<String> = docs(n).into_iter().filter(|d| d != target).collect();
        r.insert(rank - 1, target.to_owned());
        r
    }

    fn run(cases: &[(&str, &str, usize)], n: usize) -> EvalResult {
        let truth: HashMap<String, String> = cases.iter().map(|(i, t, _)| (i.to_string(), t.to_string())).collect();
        let rankings: Vec<(String, Vec<String>)> = cases.iter().map(|(i, t, r)| (i.to_string(), placed(t, *r, n))).collect();
        evaluate(rankings.iter().map(|(i, r)| (i.as_str(), r.as_slice())), &truth).unwrap()
    }

    #[test]
    fn perfect_and_sixth() {
        let r = run(&[("a", "d0", 1), ("b", "d1", 1)], 10);
        assert_eq!((r.top1, r.top5, r.mean_rank), (100.0, 100.0, 1.0));
        let r = run(&[("a", "d0", 6), ("b", "d1", 6)], 10);
        assert_eq!((r.top1, r.top5, r.mean_rank), (0.0, 0.0, 6.0));
    }

    #[test]
    fn macro_two_classes() {
        let r = run(&[("a1", "d0", 1), ("a2", "d0", 3), ("b1", "d1", 7), ("b2", "d1", 9)], 10);
        assert_eq!((r.top1, r.top5, r.mean_rank), (25.0, 50.0, 5.0));
        assert_eq!(r.per_class["d0"].image_count, 2);
    }

    #[test]
    fn errors() {
        let truth: HashMap<String, String> = [("a".to_string(), "d9".to_string())].into();
        let r = docs(3);
        assert!(evaluate([("a", r.as_slice())], &truth).is_err());
        assert!(evaluate([("b", r.as_slice())], &truth).is_err());
    }

    #[test]
    fn random_expectations() {
        let e = expected_random_metrics(200, &[1, 5]).unwrap();
        assert_eq!(e.top_n, vec![(1, 0.5), (5, 2.5)]);
        assert_eq!(e.mean_rank, 100.5);
        let e = expected_random_metrics(1, &[1, 5]).unwrap();
        assert_eq!(e.top_n, vec![(1, 100.0), (5, 100.0)]);
        assert_eq!(e.mean_rank, 1.0);
    }

    #[test]
    fn report_layout() {
        let r = run(&[("a", "d0", 1)], 3);
        let text = format_report(&[("fgsm", &r)]);
        assert!(text.starts_with("method"));
        assert!(text.contains("fgsm      100.00    100.00      1.00"));
        assert_eq!(
            format_per_class(&r),
            "{\"class\":\"d0\",\"top1\":100.0,\"top5\":100.0,\"mean_rank\":1.0,\"images\":1}\n"
        );
    }
}
