use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use fieldguide_core::baselines::{rank_all, Bm25Params, IdfFloor, LexicalIndex, LexicalMethod, QueryMode};
use fieldguide_core::corpus::{ground_truth, load_captions, load_corpus, save_captions, save_corpus, strip_labels, CaptionSet, Corpus};
use fieldguide_core::embed::{build_store, import_text, load_store, save_store, HashedBow, HashedBowConfig};
use fieldguide_core::eval::{evaluate, expected_random_metrics, format_per_class, format_report, EvalResult};
use fieldguide_core::fgsm::{format_history, load_checkpoint, save_checkpoint, train, Head, TrainConfig, TrainingData};
use fieldguide_core::pairs::{build_training_set, load_pairs, save_pairs, ClassMode, PairGenConfig, PairLabel};
use fieldguide_core::scoring::{load_scores, save_scores, ScoreMode, Scorer};
use fieldguide_core::synthetic::{generate, SyntheticConfig};
use fieldguide_core::text::{NounLexicon, SplitRules};
use fieldguide_core::{Params, Scalar};
use fieldguide_service::{AppState, Limits, Mode, SnapshotConfig};

use crate::*;

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Execute one parsed command line.
pub fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    println!("seed: {}", cli.seed);
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Embed(a) => embed(a, seed),
        Command::GenPairs(a) => gen_pairs(a, seed),
        Command::Train(a) => train_cmd(a, seed),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Serve(a) => serve(a, seed, cli.threads),
        Command::Synth(a) => synth(a, seed),
    }
}

fn input(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}

fn output(path: &Path) -> CliResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(CliError::Usage(format!("output directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn corpus_from(path: &Path) -> CliResult<Corpus> {
    Ok(load_corpus(path, &SplitRules::default())?)
}

fn ingest(a: IngestArgs) -> CliResult {
    output(&a.out)?;
    if let Some(path) = &a.corpus {
        input(path)?;
        let rules = match &a.abbreviations {
            Some(p) => {
                input(p)?;
                SplitRules::load(p)?
            }
            None => SplitRules::default(),
        };
        let corpus = load_corpus(path, &rules)?;
        save_corpus(&corpus, &a.out)?;
        println!("{} documents, {} sentences", corpus.len(), corpus.sentence_count());
    } else if let Some(path) = &a.captions {
        input(path)?;
        let sets = load_captions(path)?;
        save_captions(&sets, &a.out)?;
        let n: usize = sets.iter().map(|s| s.captions.len()).sum();
        println!("{} images, {n} captions", sets.len());
    }
    Ok(())
}

fn embed(a: EmbedArgs, seed: u64) -> CliResult {
    output(&a.out)?;
    let store = if let Some(path) = &a.import {
        input(path)?;
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        import_text(BufReader::new(file))?
    } else {
        let mut keyed: Vec<(String, String)> = Vec::new();
        if let Some(path) = &a.corpus {
            input(path)?;
            let corpus = corpus_from(path)?;
            keyed.extend(corpus.keyed_sentences().map(|(k, s)| (k.to_owned(), s.to_owned())));
        }
        if let Some(path) = &a.captions {
            input(path)?;
            for set in load_captions(path)? {
                keyed.extend(set.caption_keys().into_iter().zip(set.captions));
            }
        }
        let provider = HashedBow::new(HashedBowConfig { dim: a.dim, seed })?;
        build_store(&keyed, &provider)?
    };
    save_store(&store, &a.out)?;
    println!("{} vectors of dimension {}", store.len(), store.dim());
    Ok(())
}

fn gen_pairs(a: GenPairsArgs, seed: u64) -> CliResult {
    input(&a.captions)?;
    a.corpus.as_deref().map(input).transpose()?;
    a.lexicon.as_deref().map(input).transpose()?;
    output(&a.out)?;
    let sets = load_captions(&a.captions)?;
    let views = strip_labels(&sets);
    let corpus = a.corpus.as_deref().map(corpus_from).transpose()?;
    let lexicon = a.lexicon.as_deref().map(NounLexicon::load).transpose()?;
    let cfg = PairGenConfig {
        seed,
        emit_both_orders: a.both_orders,
        neutral_fraction: a.neutral_fraction,
        classes: match a.classes {
            Classes::Two => ClassMode::Binary,
            Classes::Three => ClassMode::ThreeClass,
        },
        neutral_doc_share: a.neutral_doc_share,
        ..PairGenConfig::default()
    };
    let set = build_training_set(&views, corpus.as_ref(), lexicon.as_ref(), &cfg)?;
    save_pairs(&set.pairs, &a.out)?;
    println!(
        "{} pairs: {} positive, {} neutral, {} negative",
        set.pairs.len(),
        set.count(PairLabel::Positive),
        set.count(PairLabel::Neutral),
        set.count(PairLabel::Negative)
    );
    if set.neutral_shortfall > 0 {
        println!(
            "neutral shortfall: {} (positives and negatives subsampled to keep the ratio)",
            set.neutral_shortfall
        );
    }
    Ok(())
}

fn train_cmd(a: TrainArgs, seed: u64) -> CliResult {
    for p in [&a.pairs, &a.captions, &a.store] {
        input(p)?;
    }
    a.doc_store.as_deref().map(input).transpose()?;
    a.corpus.as_deref().map(input).transpose()?;
    output(&a.out)?;
    a.history.as_deref().map(output).transpose()?;

    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        reg_epochs: a.reg_epochs,
        lambda: a.lambda,
        seed,
        reg_image_batch: a.reg_image_batch,
        reg_doc_sample: a.reg_doc_sample,
        proj_dim: a.proj_dim,
        hidden_dim: a.hidden_dim,
        head: match a.classes {
            Classes::Two => Head::Binary,
            Classes::Three => Head::ThreeClass,
        },
        negate_scores: a.negate_scores,
        ..TrainConfig::default()
    };
    cfg.validate()?;

    let pairs = load_pairs(&a.pairs)?;
    let sets = load_captions(&a.captions)?;
    let views = strip_labels(&sets);
    let store = load_store(&a.store)?;
    let doc_store = a.doc_store.as_deref().map(load_store).transpose()?;
    let corpus = a.corpus.as_deref().map(corpus_from).transpose()?;
    let data = TrainingData {
        pairs: &pairs,
        images: &views,
        caption_store: &store,
        doc_store: Some(doc_store.as_ref().unwrap_or(&store)),
        corpus: corpus.as_ref(),
    };

    let history = match a.precision {
        Precision::F64 => fit::<f64>(&data, &cfg, &a.out)?,
        Precision::F32 => fit::<f32>(&data, &cfg, &a.out)?,
    };
    if let Some(path) = &a.history {
        write_text(path, &format_history(&history))?;
    }
    if let Some(last) = history.last() {
        println!(
            "trained {} epochs: pair loss {:.6}, prior {:.6}, total {:.6}",
            history.len(),
            last.pair_loss,
            last.reg_value,
            last.total
        );
    }
    Ok(())
}

fn fit<T: Scalar>(data: &TrainingData<'_>, cfg: &TrainConfig, out: &Path) -> CliResult<Vec<fieldguide_core::fgsm::EpochLog>> {
    let outcome = train::<T>(data, cfg)?;
    save_checkpoint(&outcome.params, out)?;
    Ok(outcome.history)
}

fn score(a: ScoreArgs) -> CliResult {
    for p in [&a.corpus, &a.captions, &a.store] {
        input(p)?;
    }
    a.doc_store.as_deref().map(input).transpose()?;
    a.checkpoint.as_deref().map(input).transpose()?;
    output(&a.out)?;
    let mode = match a.mode {
        ScoreModeArg::Fgsm => ScoreMode::Fgsm,
        ScoreModeArg::Cosine => ScoreMode::Cosine,
    };
    if mode == ScoreMode::Fgsm && a.checkpoint.is_none() {
        return Err(CliError::Usage("--mode fgsm needs --checkpoint".into()));
    }

    let corpus = corpus_from(&a.corpus)?;
    let sets = load_captions(&a.captions)?;
    let views = strip_labels(&sets);
    let store = load_store(&a.store)?;
    let doc_store = a.doc_store.as_deref().map(load_store).transpose()?;
    let params: Option<Params> = a.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let k = corpus.len();
    let scorer = Scorer::new(corpus, doc_store.as_ref().unwrap_or(&store), params)?.with_negate(a.negate_scores);
    let scores = scorer.score_views(&views, &store, mode)?;
    let method = match mode {
        ScoreMode::Fgsm => "fgsm",
        ScoreMode::Cosine => "cosine",
    };
    save_scores(&scores, Some(method), &a.out)?;
    println!("scored {} images against {k} documents", scores.len());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    for p in &a.scores {
        input(p)?;
    }
    input(&a.captions)?;
    a.corpus.as_deref().map(input).transpose()?;
    a.out.as_deref().map(output).transpose()?;
    a.per_class.as_deref().map(output).transpose()?;

    let sets: Vec<CaptionSet> = load_captions(&a.captions)?;
    let corpus = a.corpus.as_deref().map(corpus_from).transpose()?;
    let truth: HashMap<String, String> = ground_truth(&sets, corpus.as_ref())?;

    let mut rows: Vec<(String, EvalResult)> = Vec::new();
    for path in &a.scores {
        let lines = load_scores(path)?;
        let name = lines
            .first()
            .and_then(|l| l.method.clone())
            .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_default();
        let result = evaluate(lines.iter().map(|l| (l.image_id.as_str(), l.ranking.as_slice())), &truth)?;
        rows.push((name, result));
    }
    if let Some(k) = a.random_k {
        let e = expected_random_metrics(k, &[1, 5])?;
        let random = EvalResult {
            top1: e.top_n[0].1,
            top5: e.top_n[1].1,
            mean_rank: e.mean_rank,
            per_class: Default::default(),
        };
        rows.push(("random".into(), random));
    }

    let table: Vec<(&str, &EvalResult)> = rows.iter().map(|(n, r)| (n.as_str(), r)).collect();
    let report = format_report(&table);
    print!("{report}");
    if let Some(path) = &a.out {
        write_text(path, &report)?;
    }
    if let Some(path) = &a.per_class {
        write_text(path, &format_per_class(&rows[0].1))?;
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> CliResult {
    input(&a.corpus)?;
    input(&a.captions)?;
    output(&a.out)?;
    let method = match a.method {
        BaselineMethod::Tfidf => LexicalMethod::Tfidf,
        BaselineMethod::Bm25 => LexicalMethod::Bm25,
    };
    let params = Bm25Params {
        k1: a.k1,
        b: a.b,
        epsilon: a.epsilon,
        floor: match a.idf_floor {
            IdfFloorArg::MeanPositive => IdfFloor::MeanPositive,
            IdfFloorArg::MeanAll => IdfFloor::MeanAll,
        },
    };
    let query_mode = match a.query_mode {
        QueryModeArg::Concatenate => QueryMode::Concatenate,
        QueryModeArg::MeanPerCaption => QueryMode::MeanPerCaption,
    };
    let corpus = corpus_from(&a.corpus)?;
    let sets = load_captions(&a.captions)?;
    let index = LexicalIndex::build(method, &corpus, &a.ngram_sizes, params)?;
    let scores = rank_all(&index, &corpus, &strip_labels(&sets), query_mode)?;
    save_scores(&scores, Some(method.name()), &a.out)?;
    println!(
        "{} ranked {} images against {} documents",
        method.name(),
        scores.len(),
        corpus.len()
    );
    Ok(())
}

fn serve(a: ServeArgs, seed: u64, threads: Option<usize>) -> CliResult {
    input(&a.corpus)?;
    input(&a.store)?;
    a.checkpoint.as_deref().map(input).transpose()?;
    let mode = match a.mode {
        ServeMode::Fgsm => Mode::Fgsm,
        ServeMode::Cosine => Mode::Cosine,
        ServeMode::Tfidf => Mode::Tfidf,
        ServeMode::Bm25 => Mode::Bm25,
    };
    if mode == Mode::Fgsm && a.checkpoint.is_none() {
        return Err(CliError::Usage("--mode fgsm needs --checkpoint".into()));
    }
    let provider = HashedBowConfig { dim: a.dim, seed };
    provider.validate()?;
    let cfg = SnapshotConfig {
        corpus: a.corpus,
        store: a.store,
        checkpoint: a.checkpoint,
        provider,
        mode,
        limits: Limits::default(),
    };
    let state = match &a.session_log {
        Some(path) => AppState::with_session_log(path).map_err(|e| CliError::io(path, e))?,
        None => AppState::new(),
    };
    let mut runtime = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        runtime.worker_threads(n);
    }
    let runtime = runtime.enable_all().build().map_err(|e| CliError::Usage(e.to_string()))?;
    println!("serving on http://{}", a.addr);
    runtime
        .block_on(fieldguide_service::serve(a.addr, cfg, Arc::new(state), a.static_dir))
        .map_err(|e| CliError::Usage(format!("cannot serve on {}: {e}", a.addr)))
}

fn synth(a: SynthArgs, seed: u64) -> CliResult {
    if a.test_every < 2 {
        return Err(CliError::Usage("--test-every must be at least 2".into()));
    }
    let cfg = SyntheticConfig {
        classes: a.classes,
        images_per_class: a.images_per_class,
        captions_per_image: a.captions_per_image,
        attributes: a.attributes,
        distractor_sentences: a.distractor_sentences,
        noise: a.noise,
        seed,
    };
    let ds = generate(&cfg)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let dir = &a.out_dir;
    save_corpus(&ds.corpus, dir.join("corpus.jsonl"))?;
    save_captions(&ds.captions, dir.join("captions.jsonl"))?;
    let (train, test) = ds.split(a.test_every);
    save_captions(&train, dir.join("train_captions.jsonl"))?;
    save_captions(&test, dir.join("test_captions.jsonl"))?;
    write_text(&dir.join("lexicon.txt"), &(ds.lexicon_words.join("\n") + "\n"))?;
    println!(
        "{} documents, {} images ({} train, {} test) in {}",
        ds.corpus.len(),
        ds.captions.len(),
        train.len(),
        test.len(),
        dir.display()
    );
    Ok(())
}
