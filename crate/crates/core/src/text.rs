//! Tokenization, rule-based sentence splitting, n-grams and lexicon noun lookup.
//!
//! Everything here is a pure function of its inputs; lexicons and split rules
//! are immutable once built and can be shared across threads.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use crate::{Error, Result};

/// Abbreviations that do not end a sentence when followed by a period.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &["approx", "e.g", "i.e", "cm", "in", "mm", "sp", "subsp"];

/// A lowercase run of letters or digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Lowercase the input, then return its maximal alphanumeric runs.
pub fn tokenize(sentence: &str) -> Vec<Token> {
    sentence
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| Token(s.to_owned()))
        .collect()
}

/// All contiguous `n`-token windows joined by a single space, multiplicity kept.
///
/// Panics if `n == 0`.
pub fn ngrams(tokens: &[Token], n: usize) -> Vec<String> {
    assert!(n >= 1, "n-gram size must be at least 1");
    if tokens.len() < n {
        return Vec::new();
    }
    tokens
        .windows(n)
        .map(|w| {
            let mut s = String::with_capacity(w.iter().map(|t| t.0.len() + 1).sum());
            for (i, t) in w.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                s.push_str(&t.0);
            }
            s
        })
        .collect()
}

/// Parse a word-list file body: one entry per line, `#` comments and blank
/// lines skipped, entries lowercased.
pub fn parse_word_list<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let entry = line.trim();
        if entry.is_empty() || entry.starts_with('#') {
            continue;
        }
        out.push(entry.to_lowercase());
    }
    Ok(out)
}

fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_word_list(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Stream(source) => Error::io(path, source),
        other => other,
    })
}

/// Set of noun surface forms used to decide whether two sentences share a noun.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NounLexicon {
    entries: HashSet<String>,
}

impl NounLexicon {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            entries: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        Ok(Self::from_words(parse_word_list(reader)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_words(read_word_list(path.as_ref())?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Tokens of `tokens` that are lexicon nouns, deduplicated.
pub fn extract_nouns(tokens: &[Token], lexicon: &NounLexicon) -> BTreeSet<String> {
    tokens
        .iter()
        .filter(|t| lexicon.contains(t.as_str()))
        .map(|t| t.0.clone())
        .collect()
}

/// Sentence splitting rules: the abbreviation guard list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRules {
    abbreviations: HashSet<String>,
}

impl Default for SplitRules {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SplitRules {
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim_end_matches('.').to_lowercase())
                .collect(),
        }
    }

    /// Load an abbreviation list file (same format as the noun lexicon).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::with_abbreviations(read_word_list(path.as_ref())?))
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(word)
    }

    /// The word ending right before the terminator at byte offset `end`,
    /// stripped of leading punctuation and lowercased.
    fn word_before(text: &str, end: usize) -> String {
        let head = &text[..end];
        let start = head
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        head[start..].trim_start_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
    }
}

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

/// Split prose into trimmed, non-empty sentences.
///
/// A boundary is a run of `.`, `?` or `!` (optionally followed by closing
/// quotes or brackets), then whitespace, then an uppercase letter or digit.
/// A lone period directly after a listed abbreviation is not a boundary.
pub fn split_sentences(text: &str, rules: &SplitRules) -> Vec<String> {
    let mut sentences = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut seg_start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '?' | '!') {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && matches!(chars[j].1, '.' | '?' | '!') {
            j += 1;
        }
        let single_period = j == i + 1 && c == '.';
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let boundary = j;
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let splits = k > j
            && k < chars.len()
            && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit())
            && !(single_period && rules.is_abbreviation(&SplitRules::word_before(text, pos)));

        if splits {
            let end = chars[boundary].0;
            let sentence = text[seg_start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence.to_owned());
            }
            seg_start = end;
            i = k;
        } else {
            i = j.max(i + 1);
        }
    }

    let tail = text[seg_start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_owned());
    }
    sentences
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token((*w).to_owned())).collect()
    }

    #[test]
    fn splits_on_terminal_periods() {
        let rules = SplitRules::default();
        assert_eq!(split_sentences("A red bird. It sings.", &rules), vec!["A red bird.", "It sings."]);
        assert!(split_sentences("", &rules).is_empty());
        assert!(split_sentences("   \n ", &rules).is_empty());
    }

    #[test]
    fn abbreviation_guard() {
        let rules = SplitRules::default();
        assert_eq!(
            split_sentences("It is approx. 12 cm long. Males are red.", &rules),
            vec!["It is approx. 12 cm long.", "Males are red."]
        );
        assert_eq!(
            split_sentences("Seeds (e.g. Sunflower) are eaten. Nests are cups.", &rules),
            vec!["Seeds (e.g. Sunflower) are eaten.", "Nests are cups."]
        );
        // without the guard the same text splits after "approx."
        let bare = SplitRules::with_abbreviations(Vec::<String>::new());
        assert_eq!(split_sentences("It is approx. 12 cm long.", &bare).len(), 2);
    }

    #[test]
    fn lowercase_continuation_and_closers() {
        let rules = SplitRules::default();
        assert_eq!(split_sentences("Wing length 3.5 cm. tail short.", &rules).len(), 1);
        assert_eq!(
            split_sentences("It calls \"chip!\" Then it flies?! Yes.", &rules),
            vec!["It calls \"chip!\"", "Then it flies?!", "Yes."]
        );
    }

    #[test]
    fn tokenize_examples() {
        let t: Vec<String> = tokenize("A Red-winged bird!").into_iter().map(Token::into_string).collect();
        assert_eq!(t, vec!["a", "red", "winged", "bird"]);
        assert!(tokenize("").is_empty());
        let t: Vec<String> = tokenize("12 cm wings").into_iter().map(Token::into_string).collect();
        assert_eq!(t, vec!["12", "cm", "wings"]);
    }

    #[test]
    fn nouns_from_lexicon() {
        let lex = NounLexicon::from_words(["bird", "crown", "gulf", "coast"]);
        let nouns = extract_nouns(&toks(&["a", "small", "bird", "with", "a", "red", "crown"]), &lex);
        assert_eq!(nouns.into_iter().collect::<Vec<_>>(), vec!["bird", "crown"]);
        let nouns = extract_nouns(&toks(&["winters", "along", "the", "gulf", "coast"]), &lex);
        assert_eq!(nouns.len(), 2);
        assert!(extract_nouns(&[], &lex).is_empty());
    }

    #[test]
    fn lexicon_file_format() {
        let body = "# nouns\nBird\n\n  crown  \n#wing\n";
        let lex = NounLexicon::from_reader(body.as_bytes()).unwrap();
        assert_eq!(lex.len(), 2);
        assert!(lex.contains("bird") && lex.contains("crown") && !lex.contains("wing"));
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(ngrams(&toks(&["red", "bird", "tail"]), 2), vec!["red bird", "bird tail"]);
        assert!(ngrams(&toks(&["red"]), 2).is_empty());
        let grams = ngrams(&toks(&["a", "b", "c", "b", "c"]), 2);
        assert_eq!(grams.iter().filter(|g| *g == "b c").count(), 2);
    }

    proptest! {
        #[test]
        fn tokenize_ignores_case(s in "\\PC{0,40}") {
            prop_assert_eq!(tokenize(&s), tokenize(&s.to_lowercase()));
        }

        #[test]
        fn tokens_are_nonempty_without_whitespace(s in "\\PC{0,40}") {
            for t in tokenize(&s) {
                prop_assert!(!t.as_str().is_empty());
                prop_assert!(!t.as_str().chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn ngram_count(words in proptest::collection::vec("[a-z]{1,4}", 0..12), n in 1usize..6) {
            let t = toks(&words.iter().map(String::as_str).collect::<Vec<_>>());
            let expected = if t.len() >= n { t.len() - n + 1 } else { 0 };
            prop_assert_eq!(ngrams(&t, n).len(), expected);
        }

        #[test]
        fn nouns_subset_of_tokens(words in proptest::collection::vec("[a-e]{1,2}", 0..12)) {
            let t = toks(&words.iter().map(String::as_str).collect::<Vec<_>>());
            let lex = NounLexicon::from_words(["a", "bb", "c", "de"]);
            let set: BTreeSet<String> = t.iter().map(|x| x.as_str().to_owned()).collect();
            prop_assert!(extract_nouns(&t, &lex).is_subset(&set));
        }

        #[test]
        fn split_covers_input(s in "[A-Za-z0-9 .?!]{0,60}") {
            let rules = SplitRules::default();
            let parts = split_sentences(&s, &rules);
            let squash = |x: &str| x.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            prop_assert_eq!(squash(&parts.concat()), squash(&s));
            for p in &parts {
                prop_assert!(!p.is_empty());
                prop_assert_eq!(p.trim(), p.as_str());
            }
            prop_assert_eq!(split_sentences(&s, &rules), parts);
        }
    }
}
