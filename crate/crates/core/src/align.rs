//! Parsing and aligning free-form model output.
//!
//! Model answers are expected as `word<TAB>lemma` lines but in practice
//! carry stray quotation marks, explanations, skipped or altered words and
//! repeated blocks. [`parse_output`] is total: every non-blank line becomes
//! either a pair or a noise line. [`align`] then matches the output pairs to
//! the input tokens with an order-preserving global alignment and tallies
//! missing words, wrong (altered) words and random output.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{is_comment, Corpus, Sentence};

const MATCH: i64 = 2;
const NEAR_MATCH: i64 = 1;
const GAP: i64 = -1;

const QUOTES: &[char] = &['"', '\'', '`', '“', '”', '‘', '’', '«', '»', '„'];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputLine {
    Pair { wordform: String, lemma: String },
    /// A line that is not a word/lemma pair: prose, headers, code fences.
    Noise(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub lines: Vec<OutputLine>,
}

impl ParsedOutput {
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.lines.iter().filter_map(|l| match l {
            OutputLine::Pair { wordform, lemma } => Some((wordform.as_str(), lemma.as_str())),
            OutputLine::Noise(_) => None,
        })
    }

    pub fn noise_count(&self) -> usize {
        self.lines.iter().filter(|l| matches!(l, OutputLine::Noise(_))).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCounts {
    pub missing_words: usize,
    pub wrong_words: usize,
    pub random_outputs: usize,
}

impl std::ops::AddAssign for AlignmentCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.missing_words += rhs.missing_words;
        self.wrong_words += rhs.wrong_words;
        self.random_outputs += rhs.random_outputs;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPrediction {
    pub sentence_id: String,
    /// One entry per input token; `None` marks a token the output skipped.
    pub pairs: Vec<Option<String>>,
    pub counts: AlignmentCounts,
}

impl AlignedPrediction {
    /// Complete prediction, e.g. from a supervised model.
    pub fn from_lemmas(sentence_id: impl Into<String>, lemmas: Vec<String>) -> Self {
        AlignedPrediction {
            sentence_id: sentence_id.into(),
            pairs: lemmas.into_iter().map(Some).collect(),
            counts: AlignmentCounts::default(),
        }
    }

    /// Every token missing; used when a request or input block failed.
    pub fn all_missing(sentence: &Sentence) -> Self {
        AlignedPrediction {
            sentence_id: sentence.id.clone(),
            pairs: vec![None; sentence.len()],
            counts: AlignmentCounts {
                missing_words: sentence.len(),
                ..AlignmentCounts::default()
            },
        }
    }

    /// Aligned tokens whose lemma differs from gold (missing tokens excluded).
    pub fn incorrect_lemmas(&self, gold: &Sentence) -> usize {
        self.pairs
            .iter()
            .zip(&gold.tokens)
            .filter(|(p, t)| matches!(p, Some(l) if Some(l.as_str()) != t.lemma.as_deref()))
            .count()
    }
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

fn strip_quotes(field: &str) -> &str {
    let stripped = field.trim_start_matches(QUOTES).trim_end_matches(QUOTES);
    if stripped.is_empty() {
        field
    } else {
        stripped
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        return line.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect();
    }
    if line.contains("  ") {
        return line.split("  ").map(str::trim).filter(|f| !f.is_empty()).collect();
    }
    line.split_whitespace().collect()
}

/// Splits raw model output into pairs and noise lines. Blank lines are dropped.
pub fn parse_output(raw: &str) -> ParsedOutput {
    let mut lines = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(line);
        let parsed = match fields.as_slice() {
            [w, l] => {
                let (w, l) = (strip_quotes(w), strip_quotes(l));
                OutputLine::Pair {
                    wordform: nfc(w),
                    lemma: nfc(l),
                }
            }
            _ => OutputLine::Noise(line.to_string()),
        };
        lines.push(parsed);
    }
    ParsedOutput { lines }
}

/// At most one character inserted, deleted or substituted.
fn within_one_edit(a: &[char], b: &[char]) -> bool {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    match long.len() - short.len() {
        0 => short.iter().zip(long).filter(|(x, y)| x != y).count() <= 1,
        1 => {
            let skip = short.iter().zip(long).position(|(x, y)| x != y).unwrap_or(short.len());
            short[skip..] == long[skip + 1..]
        }
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordMatch {
    Exact,
    /// Case-only difference or a single-character edit.
    Near,
    None,
}

pub fn compare_wordforms(output: &str, input: &str) -> WordMatch {
    if output == input {
        return WordMatch::Exact;
    }
    if output.to_lowercase() == input.to_lowercase() {
        return WordMatch::Near;
    }
    let a: Vec<char> = output.chars().collect();
    let b: Vec<char> = input.chars().collect();
    if within_one_edit(&a, &b) {
        WordMatch::Near
    } else {
        WordMatch::None
    }
}

/// Aligns parsed output against the input sentence.
///
/// Scores: exact match +2, near match +1, gap -1; unrelated words are never
/// paired. Among optimal alignments the one pairing output lines as early as
/// possible is chosen, so a repeated block leaves the first copy aligned.
pub fn align(parsed: &ParsedOutput, input: &Sentence) -> AlignedPrediction {
    let out: Vec<(&str, &str)> = parsed.pairs().collect();
    let n = out.len();
    let m = input.len();
    let kinds: Vec<Vec<WordMatch>> = out
        .iter()
        .map(|(w, _)| input.tokens.iter().map(|t| compare_wordforms(w, &t.wordform)).collect())
        .collect();
    let pair_score = |i: usize, j: usize| match kinds[i][j] {
        WordMatch::Exact => Some(MATCH),
        WordMatch::Near => Some(NEAR_MATCH),
        WordMatch::None => None,
    };

    // best[i][j]: optimal score aligning out[i..] with input[j..]
    let width = m + 1;
    let mut best = vec![0i64; (n + 1) * width];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            let idx = i * width + j;
            best[idx] = if i == n {
                GAP * (m - j) as i64
            } else if j == m {
                GAP * (n - i) as i64
            } else {
                let mut s = (GAP + best[(i + 1) * width + j]).max(GAP + best[i * width + j + 1]);
                if let Some(p) = pair_score(i, j) {
                    s = s.max(p + best[(i + 1) * width + j + 1]);
                }
                s
            };
        }
    }

    let mut pairs = vec![None; m];
    let mut counts = AlignmentCounts {
        random_outputs: parsed.noise_count(),
        ..AlignmentCounts::default()
    };
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = best[i * width + j];
        if i < n && j < m {
            if let Some(p) = pair_score(i, j) {
                if here == p + best[(i + 1) * width + j + 1] {
                    pairs[j] = Some(out[i].1.to_string());
                    if kinds[i][j] == WordMatch::Near {
                        counts.wrong_words += 1;
                    }
                    i += 1;
                    j += 1;
                    continue;
                }
            }
        }
        if i < n && (j == m || here == GAP + best[(i + 1) * width + j]) {
            counts.random_outputs += 1;
            i += 1;
        } else {
            counts.missing_words += 1;
            j += 1;
        }
    }

    AlignedPrediction {
        sentence_id: input.id.clone(),
        pairs,
        counts,
    }
}

pub const PREDICTIONS_HEADER: &str = "# lemmata predictions v1";

/// Renders predictions as two-column TSV, one block per sentence, headed by
/// `# key = value` metadata lines. Skipped tokens get an empty lemma field.
pub fn write_predictions(metadata: &[(String, String)], predictions: &[AlignedPrediction], gold: &Corpus) -> String {
    let by_id: HashMap<&str, &AlignedPrediction> =
        predictions.iter().map(|p| (p.sentence_id.as_str(), p)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "{PREDICTIONS_HEADER}");
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k} = {v}");
    }
    for sentence in &gold.sentences {
        let Some(pred) = by_id.get(sentence.id.as_str()) else {
            continue;
        };
        let _ = writeln!(out, "\n# sent_id = {}", sentence.id);
        for (token, lemma) in sentence.tokens.iter().zip(&pred.pairs) {
            let _ = writeln!(out, "{}\t{}", token.wordform, lemma.as_deref().unwrap_or(""));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictionIssue {
    /// A row without exactly two tab-separated fields; the sentence is scored as all missing.
    MalformedLine { line: usize, sentence: String },
    /// No block for a gold sentence; scored as all missing.
    MissingSentence(String),
    /// A block whose id is not in the gold corpus; ignored.
    UnknownSentence(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictionFile {
    pub metadata: Vec<(String, String)>,
    pub predictions: Vec<AlignedPrediction>,
    pub issues: Vec<PredictionIssue>,
}

struct Block {
    id: Option<String>,
    rows: Vec<(usize, String)>,
}

/// Reads a prediction file against the gold corpus.
///
/// Blocks carrying `# sent_id` comments are matched by id, otherwise by
/// position. A block whose wordforms line up with the gold tokens is read
/// positionally; any other block goes through [`align`]. Predictions come
/// back in gold order, one per gold sentence.
pub fn read_predictions(text: &str, gold: &Corpus) -> PredictionFile {
    let mut metadata = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut current = Block { id: None, rows: Vec::new() };
    let mut pending_id: Option<String> = None;
    let flush = |current: &mut Block, blocks: &mut Vec<Block>| {
        if !current.rows.is_empty() {
            blocks.push(std::mem::replace(current, Block { id: None, rows: Vec::new() }));
        }
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut current, &mut blocks);
            continue;
        }
        if is_comment(line) {
            if let Some(id) = line.strip_prefix("# sent_id = ") {
                flush(&mut current, &mut blocks);
                pending_id = Some(id.trim().to_string());
            } else if blocks.is_empty() && current.rows.is_empty() && pending_id.is_none() {
                if let Some((k, v)) = line[2.min(line.len())..].split_once(" = ") {
                    metadata.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            continue;
        }
        if current.rows.is_empty() {
            current.id = pending_id.take();
        }
        current.rows.push((lineno + 1, line.to_string()));
    }
    flush(&mut current, &mut blocks);

    let gold_ids: HashSet<&str> = gold.sentences.iter().map(|s| s.id.as_str()).collect();
    let mut issues = Vec::new();
    let mut assigned: HashMap<String, Block> = HashMap::new();
    for (pos, block) in blocks.into_iter().enumerate() {
        let id = match &block.id {
            Some(id) => id.clone(),
            None => match gold.sentences.get(pos) {
                Some(s) => s.id.clone(),
                None => {
                    issues.push(PredictionIssue::UnknownSentence(format!("#{}", pos + 1)));
                    continue;
                }
            },
        };
        if !gold_ids.contains(id.as_str()) {
            issues.push(PredictionIssue::UnknownSentence(id));
            continue;
        }
        assigned.entry(id).or_insert(block);
    }

    let mut predictions = Vec::with_capacity(gold.sentences.len());
    for sentence in &gold.sentences {
        let Some(block) = assigned.remove(&sentence.id) else {
            issues.push(PredictionIssue::MissingSentence(sentence.id.clone()));
            predictions.push(AlignedPrediction::all_missing(sentence));
            continue;
        };
        let mut rows = Vec::with_capacity(block.rows.len());
        let mut malformed = None;
        for (lineno, row) in &block.rows {
            match row.split('\t').collect::<Vec<_>>().as_slice() {
                [w, l] => rows.push((nfc(w), nfc(l))),
                _ => {
                    malformed = Some(*lineno);
                    break;
                }
            }
        }
        if let Some(line) = malformed {
            issues.push(PredictionIssue::MalformedLine {
                line,
                sentence: sentence.id.clone(),
            });
            predictions.push(AlignedPrediction::all_missing(sentence));
            continue;
        }
        let positional = rows.len() == sentence.len()
            && rows.iter().zip(&sentence.tokens).all(|((w, _), t)| *w == t.wordform);
        let prediction = if positional {
            let pairs: Vec<Option<String>> = rows
                .into_iter()
                .map(|(_, l)| (!l.is_empty()).then_some(l))
                .collect();
            let missing = pairs.iter().filter(|p| p.is_none()).count();
            AlignedPrediction {
                sentence_id: sentence.id.clone(),
                pairs,
                counts: AlignmentCounts {
                    missing_words: missing,
                    ..AlignmentCounts::default()
                },
            }
        } else {
            let parsed = ParsedOutput {
                lines: rows
                    .into_iter()
                    .filter(|(_, l)| !l.is_empty())
                    .map(|(wordform, lemma)| OutputLine::Pair { wordform, lemma })
                    .collect(),
            };
            align(&parsed, sentence)
        };
        predictions.push(prediction);
    }
    PredictionFile {
        metadata,
        predictions,
        issues,
    }
}
