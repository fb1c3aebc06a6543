//! Corpus ingestion, statistics and train/dev/test splitting.
//!
//! Two input formats are supported: CoNLL-U (only FORM and LEMMA are read)
//! and a plain two-column `wordform<TAB>lemma` format with blank lines
//! between sentences. All text is NFC-normalized on ingest.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus '{0}' contains no sentences")]
    Empty(String),
    #[error("split of {requested} sentences requested but corpus '{corpus}' has {available}")]
    InfeasibleSplit {
        corpus: String,
        requested: usize,
        available: usize,
    },
    #[error("split manifest: {0}")]
    Manifest(String),
}

/// One syntactic word with its gold lemma.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position within the sentence.
    pub index: usize,
    pub wordform: String,
    pub lemma: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Builds a sentence from `(wordform, lemma)` pairs, numbering tokens from 1.
    pub fn from_pairs<W, L>(id: impl Into<String>, pairs: impl IntoIterator<Item = (W, L)>) -> Self
    where
        W: Into<String>,
        L: Into<String>,
    {
        let tokens = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (w, l))| Token {
                index: i + 1,
                wordform: w.into(),
                lemma: Some(l.into()),
            })
            .collect();
        Sentence { id: id.into(), tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn wordforms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.wordform.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    /// ISO 639-1 code.
    pub language: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub tokens: usize,
    pub sentences: usize,
}

impl Corpus {
    pub fn new(name: impl Into<String>, language: impl Into<String>) -> Self {
        Corpus {
            name: name.into(),
            language: language.into(),
            sentences: Vec::new(),
        }
    }

    pub fn stats(&self) -> CorpusStats {
        corpus_stats(self)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    /// Copy of this corpus restricted to the sentences at `indices`, in the given order.
    fn subset(&self, name: String, indices: &[usize]) -> Corpus {
        Corpus {
            name,
            language: self.language.clone(),
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
        }
    }
}

/// Stable sentence identifier: corpus name plus 1-based ordinal.
pub fn sentence_id(corpus: &str, ordinal: usize) -> String {
    format!("{corpus}:{ordinal:05}")
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

struct SentenceBuilder<'a> {
    corpus: &'a str,
    sentences: Vec<Sentence>,
    current: Vec<Token>,
}

impl<'a> SentenceBuilder<'a> {
    fn new(corpus: &'a str) -> Self {
        SentenceBuilder {
            corpus,
            sentences: Vec::new(),
            current: Vec::new(),
        }
    }

    fn push(&mut self, wordform: &str, lemma: Option<&str>) {
        self.current.push(Token {
            index: self.current.len() + 1,
            wordform: nfc(wordform),
            lemma: lemma.map(nfc),
        });
    }

    fn close(&mut self) {
        if !self.current.is_empty() {
            let id = sentence_id(self.corpus, self.sentences.len() + 1);
            self.sentences.push(Sentence {
                id,
                tokens: std::mem::take(&mut self.current),
            });
        }
    }

    fn finish(mut self) -> Vec<Sentence> {
        self.close();
        self.sentences
    }
}

fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a CoNLL-U file. Multiword-token ranges (`3-4`) and empty nodes
/// (`5.1`) are skipped; FORM becomes the wordform and LEMMA the lemma.
pub fn ingest_conllu(path: &Path, name: &str, language: &str) -> Result<Corpus, CorpusError> {
    parse_conllu(&read_file(path)?, name, language)
}

pub fn parse_conllu(text: &str, name: &str, language: &str) -> Result<Corpus, CorpusError> {
    let mut builder = SentenceBuilder::new(name);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            builder.close();
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(CorpusError::Parse {
                line: lineno + 1,
                message: format!("expected 10 tab-separated columns, found {}", fields.len()),
            });
        }
        let id = fields[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        if id.parse::<usize>().is_err() {
            return Err(CorpusError::Parse {
                line: lineno + 1,
                message: format!("invalid token id '{id}'"),
            });
        }
        let form = fields[1];
        if form.is_empty() {
            return Err(CorpusError::Parse {
                line: lineno + 1,
                message: "empty FORM".into(),
            });
        }
        // "_" is the CoNLL-U placeholder, except for the underscore token itself.
        let lemma = match fields[2] {
            "_" if form != "_" => None,
            "" => None,
            l => Some(l),
        };
        builder.push(form, lemma);
    }
    let sentences = builder.finish();
    if sentences.is_empty() {
        return Err(CorpusError::Empty(name.to_string()));
    }
    Ok(Corpus {
        name: name.to_string(),
        language: language.to_string(),
        sentences,
    })
}

/// Reads a two-column `wordform<TAB>lemma` file. An empty lemma field means
/// the lemma is absent. Lines starting with `# ` and containing no tab are comments.
pub fn ingest_tsv(path: &Path, name: &str, language: &str) -> Result<Corpus, CorpusError> {
    parse_tsv(&read_file(path)?, name, language)
}

pub fn parse_tsv(text: &str, name: &str, language: &str) -> Result<Corpus, CorpusError> {
    let mut builder = SentenceBuilder::new(name);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            builder.close();
            continue;
        }
        if is_comment(line) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() {
            return Err(CorpusError::Parse {
                line: lineno + 1,
                message: format!("expected 'wordform<TAB>lemma', found {} field(s)", fields.len()),
            });
        }
        let lemma = (!fields[1].is_empty()).then_some(fields[1]);
        builder.push(fields[0], lemma);
    }
    let sentences = builder.finish();
    if sentences.is_empty() {
        return Err(CorpusError::Empty(name.to_string()));
    }
    Ok(Corpus {
        name: name.to_string(),
        language: language.to_string(),
        sentences,
    })
}

pub(crate) fn is_comment(line: &str) -> bool {
    (line == "#" || line.starts_with("# ")) && !line.contains('\t')
}

/// Serializes a corpus in the two-column format read by [`parse_tsv`].
pub fn to_tsv(corpus: &Corpus) -> String {
    let mut out = String::new();
    for (i, sentence) in corpus.sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for token in &sentence.tokens {
            let _ = writeln!(out, "{}\t{}", token.wordform, token.lemma.as_deref().unwrap_or(""));
        }
    }
    out
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    CorpusStats {
        tokens: corpus.sentences.iter().map(Sentence::len).sum(),
        sentences: corpus.sentences.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SelectionRule {
    FirstN,
    SeededRandom { seed: u64 },
}

impl std::fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionRule::FirstN => f.write_str("first-n"),
            SelectionRule::SeededRandom { seed } => write!(f, "seeded-random(seed={seed})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_count: usize,
    pub dev_count: usize,
    pub test_count: usize,
    pub selection_rule: SelectionRule,
}

impl SplitSpec {
    pub fn first_n(train: usize, dev: usize, test: usize) -> Self {
        SplitSpec {
            train_count: train,
            dev_count: dev,
            test_count: test,
            selection_rule: SelectionRule::FirstN,
        }
    }

    pub fn total(&self) -> usize {
        self.train_count + self.dev_count + self.test_count
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

/// Picks `count` sentence indices under `rule`, returned in corpus order.
fn choose_indices(len: usize, count: usize, rule: SelectionRule) -> Vec<usize> {
    match rule {
        SelectionRule::FirstN => (0..count).collect(),
        SelectionRule::SeededRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = sample(&mut rng, len, count).into_vec();
            picked.sort_unstable();
            picked
        }
    }
}

/// Partitions `corpus` into disjoint train/dev/test sets.
///
/// Under `first-n` the three sets are consecutive blocks of the corpus
/// prefix. Under `seeded-random` the sentences are drawn with a seeded
/// generator and each set keeps original corpus order.
pub fn make_splits(corpus: &Corpus, spec: &SplitSpec) -> Result<Splits, CorpusError> {
    let available = corpus.sentences.len();
    if spec.total() > available {
        return Err(CorpusError::InfeasibleSplit {
            corpus: corpus.name.clone(),
            requested: spec.total(),
            available,
        });
    }
    let order: Vec<usize> = match spec.selection_rule {
        SelectionRule::FirstN => (0..spec.total()).collect(),
        SelectionRule::SeededRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, available, spec.total()).into_vec()
        }
    };
    let (train, rest) = order.split_at(spec.train_count);
    let (dev, test) = rest.split_at(spec.dev_count);
    let part = |suffix: &str, idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        corpus.subset(format!("{}.{suffix}", corpus.name), &idx)
    };
    Ok(Splits {
        train: part("train", train),
        dev: part("dev", dev),
        test: part("test", test),
    })
}

/// Reduces a corpus to at most `max_sentences` sentences. Sentence ids are kept.
pub fn reduce(corpus: &Corpus, max_sentences: usize, rule: SelectionRule) -> Corpus {
    let len = corpus.sentences.len();
    if max_sentences >= len {
        return corpus.clone();
    }
    let idx = choose_indices(len, max_sentences, rule);
    corpus.subset(corpus.name.clone(), &idx)
}

const MANIFEST_HEADER: &str = "# lemmata split manifest v1";

/// Renders the sentence ids of each split, one `split<TAB>id` line per sentence.
pub fn write_manifest(source: &Corpus, splits: &Splits, rule: SelectionRule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MANIFEST_HEADER}");
    let _ = writeln!(out, "# corpus = {}", source.name);
    let _ = writeln!(out, "# rule = {rule}");
    for (label, part) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
        for s in &part.sentences {
            let _ = writeln!(out, "{label}\t{}", s.id);
        }
    }
    out
}

/// Re-creates the splits recorded in a manifest.
pub fn apply_manifest(corpus: &Corpus, manifest: &str) -> Result<Splits, CorpusError> {
    let mut lines = manifest.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(CorpusError::Manifest("missing version header".into()));
    }
    let mut ids: [Vec<usize>; 3] = Default::default();
    let mut seen = HashSet::new();
    let position: std::collections::HashMap<&str, usize> = corpus
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    for line in lines.filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let (label, id) = line
            .split_once('\t')
            .ok_or_else(|| CorpusError::Manifest(format!("malformed line '{line}'")))?;
        let slot = match label {
            "train" => 0,
            "dev" => 1,
            "test" => 2,
            other => return Err(CorpusError::Manifest(format!("unknown split '{other}'"))),
        };
        let &idx = position
            .get(id)
            .ok_or_else(|| CorpusError::Manifest(format!("unknown sentence id '{id}'")))?;
        if !seen.insert(idx) {
            return Err(CorpusError::Manifest(format!("sentence '{id}' listed twice")));
        }
        ids[slot].push(idx);
    }
    let [train, dev, test] = ids;
    Ok(Splits {
        train: corpus.subset(format!("{}.train", corpus.name), &train),
        dev: corpus.subset(format!("{}.dev", corpus.name), &dev),
        test: corpus.subset(format!("{}.test", corpus.name), &test),
    })
}
