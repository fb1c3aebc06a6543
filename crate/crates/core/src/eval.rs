//! Word/sentence accuracy, multi-run aggregation and McNemar's test.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::align::{AlignedPrediction, AlignmentCounts};
use crate::corpus::Corpus;

/// Below this many discordant pairs McNemar's test uses the exact binomial distribution.
pub const EXACT_THRESHOLD: u64 = 25;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no predictions for sentences: {}", .0.join(", "))]
    MissingSentences(Vec<String>),
    #[error("sentence {id}: {predicted} predictions for {expected} tokens")]
    LengthMismatch { id: String, predicted: usize, expected: usize },
    #[error("gold token {index} of sentence {id} has no lemma")]
    UnannotatedGold { id: String, index: usize },
    #[error("cannot aggregate zero runs")]
    NoRuns,
    #[error("correctness vectors differ in length ({0} vs {1})")]
    PairedLength(usize, usize),
}

/// How skipped tokens enter word accuracy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// A skipped token is an incorrect token.
    #[default]
    Strict,
    /// Skipped tokens are left out of the word accuracy denominator.
    Renormalize,
}

/// Per-token outcome in gold order: `Some(correct)` or `None` for skipped tokens.
pub fn token_outcomes(predictions: &[AlignedPrediction], gold: &Corpus) -> Result<Vec<Vec<Option<bool>>>, EvalError> {
    let by_id: HashMap<&str, &AlignedPrediction> =
        predictions.iter().map(|p| (p.sentence_id.as_str(), p)).collect();
    let missing: Vec<String> = gold
        .sentences
        .iter()
        .filter(|s| !by_id.contains_key(s.id.as_str()))
        .map(|s| s.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingSentences(missing));
    }
    gold.sentences
        .iter()
        .map(|sentence| {
            let pred = by_id[sentence.id.as_str()];
            if pred.pairs.len() != sentence.len() {
                return Err(EvalError::LengthMismatch {
                    id: sentence.id.clone(),
                    predicted: pred.pairs.len(),
                    expected: sentence.len(),
                });
            }
            sentence
                .tokens
                .iter()
                .zip(&pred.pairs)
                .map(|(token, p)| {
                    let gold_lemma = token.lemma.as_deref().ok_or_else(|| EvalError::UnannotatedGold {
                        id: sentence.id.clone(),
                        index: token.index,
                    })?;
                    Ok(p.as_deref().map(|l| l == gold_lemma))
                })
                .collect()
        })
        .collect()
}

/// Flat per-token correctness in gold order; skipped tokens count as wrong.
pub fn token_correctness(predictions: &[AlignedPrediction], gold: &Corpus) -> Result<Vec<bool>, EvalError> {
    Ok(token_outcomes(predictions, gold)?
        .into_iter()
        .flatten()
        .map(|o| o == Some(true))
        .collect())
}

/// Per-sentence all-correct flags in gold order.
pub fn sentence_correctness(predictions: &[AlignedPrediction], gold: &Corpus) -> Result<Vec<bool>, EvalError> {
    Ok(token_outcomes(predictions, gold)?
        .into_iter()
        .map(|s| s.iter().all(|o| *o == Some(true)))
        .collect())
}

pub fn word_accuracy(predictions: &[AlignedPrediction], gold: &Corpus, policy: MissingPolicy) -> Result<f64, EvalError> {
    let outcomes = token_outcomes(predictions, gold)?;
    let (mut correct, mut total) = (0usize, 0usize);
    for o in outcomes.iter().flatten() {
        match (o, policy) {
            (None, MissingPolicy::Renormalize) => {}
            (o, _) => {
                total += 1;
                correct += usize::from(*o == Some(true));
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

/// Fraction of sentences whose every lemma is correct. Skipped tokens make a sentence wrong
/// under either policy.
pub fn sentence_accuracy(predictions: &[AlignedPrediction], gold: &Corpus) -> Result<f64, EvalError> {
    let flags = sentence_correctness(predictions, gold)?;
    if flags.is_empty() {
        return Ok(0.0);
    }
    Ok(flags.iter().filter(|&&c| c).count() as f64 / flags.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn aggregate_runs(values: &[f64]) -> Result<RunStats, EvalError> {
    if values.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(RunStats { mean, std: var.sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// A wrong, B right.
    pub b01: u64,
    /// A right, B wrong.
    pub b10: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
    pub alpha: f64,
    pub significant: bool,
}

/// Two-sided exact binomial p-value for `b01` vs `b10` discordant pairs.
pub fn exact_binomial_p(b01: u64, b10: u64) -> f64 {
    let n = b01 + b10;
    if n == 0 {
        return 1.0;
    }
    let k = b01.min(b10);
    let ln_half_n = n as f64 * 0.5f64.ln();
    let tail: f64 = (0..=k).map(|i| (ln_binomial(n, i) + ln_half_n).exp()).sum();
    (2.0 * tail).min(1.0)
}

/// Chi-square (1 df) p-value with Edwards' continuity correction.
pub fn chi_square_p(b01: u64, b10: u64) -> (f64, f64) {
    let n = b01 + b10;
    if n == 0 {
        return (0.0, 1.0);
    }
    let diff = (b01 as f64 - b10 as f64).abs() - 1.0;
    let statistic = diff.max(0.0).powi(2) / n as f64;
    let dist = ChiSquared::new(1.0).expect("1 degree of freedom");
    (statistic, dist.sf(statistic).clamp(0.0, 1.0))
}

pub fn mcnemar_counts(b01: u64, b10: u64, alpha: f64) -> McNemarResult {
    let (method, statistic, p_value) = if b01 + b10 < EXACT_THRESHOLD {
        (McNemarMethod::ExactBinomial, b01.min(b10) as f64, exact_binomial_p(b01, b10))
    } else {
        let (s, p) = chi_square_p(b01, b10);
        (McNemarMethod::ChiSquareCorrected, s, p)
    };
    McNemarResult {
        b01,
        b10,
        statistic,
        p_value,
        method,
        alpha,
        significant: p_value < alpha,
    }
}

/// McNemar's test over paired per-item correctness of systems A and B.
pub fn mcnemar(a: &[bool], b: &[bool], alpha: f64) -> Result<McNemarResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::PairedLength(a.len(), b.len()));
    }
    let (mut b01, mut b10) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        match (x, y) {
            (false, true) => b01 += 1,
            (true, false) => b10 += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b01, b10, alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub word_accuracy: f64,
    pub sentence_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system_id: String,
    pub corpus_name: String,
    pub per_run: Vec<RunScore>,
    pub word_accuracy: RunStats,
    pub sentence_accuracy: RunStats,
    pub diagnostics: AlignmentCounts,
}

impl EvalReport {
    /// Scores every run of one system on one corpus.
    pub fn build(
        system_id: &str,
        gold: &Corpus,
        runs: &[Vec<AlignedPrediction>],
        policy: MissingPolicy,
    ) -> Result<Self, EvalError> {
        let mut per_run = Vec::with_capacity(runs.len());
        let mut diagnostics = AlignmentCounts::default();
        for run in runs {
            per_run.push(RunScore {
                word_accuracy: word_accuracy(run, gold, policy)?,
                sentence_accuracy: sentence_accuracy(run, gold)?,
            });
            for p in run {
                diagnostics += p.counts;
            }
        }
        let wacc: Vec<f64> = per_run.iter().map(|r| r.word_accuracy).collect();
        let sacc: Vec<f64> = per_run.iter().map(|r| r.sentence_accuracy).collect();
        Ok(EvalReport {
            system_id: system_id.to_string(),
            corpus_name: gold.name.clone(),
            word_accuracy: aggregate_runs(&wacc)?,
            sentence_accuracy: aggregate_runs(&sacc)?,
            per_run,
            diagnostics,
        })
    }
}

/// Pairwise comparison of two systems on one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub corpus: String,
    pub system_a: String,
    pub system_b: String,
    /// Over tokens, for word accuracy.
    pub tokens: McNemarResult,
    /// Over sentences, for sentence accuracy.
    pub sentences: McNemarResult,
}

pub fn compare_systems(
    corpus: &Corpus,
    system_a: (&str, &[AlignedPrediction]),
    system_b: (&str, &[AlignedPrediction]),
    alpha: f64,
) -> Result<PairwiseComparison, EvalError> {
    let tokens = mcnemar(
        &token_correctness(system_a.1, corpus)?,
        &token_correctness(system_b.1, corpus)?,
        alpha,
    )?;
    let sentences = mcnemar(
        &sentence_correctness(system_a.1, corpus)?,
        &sentence_correctness(system_b.1, corpus)?,
        alpha,
    )?;
    Ok(PairwiseComparison {
        corpus: corpus.name.clone(),
        system_a: system_a.0.to_string(),
        system_b: system_b.0.to_string(),
        tokens,
        sentences,
    })
}

/// Best system per corpus and whether it beats every other system significantly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Marks {
    pub best_word: Option<String>,
    pub best_sentence: Option<String>,
    pub word_significant: bool,
    pub sentence_significant: bool,
}

pub fn best_marks(reports: &[&EvalReport], comparisons: &[&PairwiseComparison]) -> Marks {
    let pick = |key: fn(&EvalReport) -> f64| {
        reports
            .iter()
            .max_by(|a, b| {
                key(a)
                    .total_cmp(&key(b))
                    .then_with(|| b.system_id.cmp(&a.system_id))
            })
            .map(|r| r.system_id.clone())
    };
    let best_word = pick(|r| r.word_accuracy.mean);
    let best_sentence = pick(|r| r.sentence_accuracy.mean);
    let beats_all = |best: &Option<String>, tokens: bool| {
        let Some(best) = best else { return false };
        let relevant: Vec<_> = comparisons
            .iter()
            .filter(|c| &c.system_a == best || &c.system_b == best)
            .collect();
        !relevant.is_empty()
            && relevant.len() + 1 == reports.len()
            && relevant.iter().all(|c| {
                let r = if tokens { &c.tokens } else { &c.sentences };
                r.significant
            })
    };
    Marks {
        word_significant: beats_all(&best_word, true),
        sentence_significant: beats_all(&best_sentence, false),
        best_word,
        best_sentence,
    }
}

/// Renders reports as a fixed-width table: one row per corpus, a WAcc and
/// SentAcc column per system, `B` marking the best system per corpus and `*`
/// marking a best result significantly better than every other system.
pub fn render_table(
    reports: &[EvalReport],
    comparisons: &[PairwiseComparison],
    systems: &[String],
    corpora: &[String],
) -> String {
    let index: BTreeMap<(&str, &str), &EvalReport> = reports
        .iter()
        .map(|r| ((r.corpus_name.as_str(), r.system_id.as_str()), r))
        .collect();
    let corpus_w = corpora.iter().map(String::len).chain([7]).max().unwrap_or(7);
    let cell_w = 15usize;
    let sys_w = systems.iter().map(|s| s.len()).max().unwrap_or(0).max(2 * cell_w + 1);
    let mut out = String::new();
    let _ = write!(out, "{:<corpus_w$}", "");
    for s in systems {
        let _ = write!(out, " | {s:<sys_w$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<corpus_w$}", "corpus");
    for _ in systems {
        let _ = write!(out, " | {:<cell_w$} {:<cell_w$}", "WAcc", "SentAcc");
        let _ = write!(out, "{:width$}", "", width = sys_w - (2 * cell_w + 1));
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(corpus_w + systems.len() * (sys_w + 3)));

    let cell = |value: f64, std: f64, best: bool, sig: bool| {
        format!(
            "{value:.2}±{std:.2} {}{}",
            if best { 'B' } else { ' ' },
            if sig { '*' } else { ' ' }
        )
    };
    let mut sums: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for corpus in corpora {
        let rows: Vec<&EvalReport> = systems
            .iter()
            .filter_map(|s| index.get(&(corpus.as_str(), s.as_str())).copied())
            .collect();
        let comps: Vec<&PairwiseComparison> = comparisons.iter().filter(|c| &c.corpus == corpus).collect();
        let marks = best_marks(&rows, &comps);
        let _ = write!(out, "{corpus:<corpus_w$}");
        for s in systems {
            match index.get(&(corpus.as_str(), s.as_str())) {
                Some(r) => {
                    let w = cell(
                        r.word_accuracy.mean,
                        r.word_accuracy.std,
                        marks.best_word.as_deref() == Some(s),
                        marks.best_word.as_deref() == Some(s) && marks.word_significant,
                    );
                    let sa = cell(
                        r.sentence_accuracy.mean,
                        r.sentence_accuracy.std,
                        marks.best_sentence.as_deref() == Some(s),
                        marks.best_sentence.as_deref() == Some(s) && marks.sentence_significant,
                    );
                    let _ = write!(out, " | {w:<cell_w$} {sa:<cell_w$}");
                    let e = sums.entry(s.as_str()).or_default();
                    e.0 += r.word_accuracy.mean;
                    e.1 += r.sentence_accuracy.mean;
                    e.2 += 1;
                }
                None => {
                    let _ = write!(out, " | {:<cell_w$} {:<cell_w$}", "-", "-");
                }
            }
            let _ = write!(out, "{:width$}", "", width = sys_w - (2 * cell_w + 1));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{}", "-".repeat(corpus_w + systems.len() * (sys_w + 3)));
    let _ = write!(out, "{:<corpus_w$}", "average");
    for s in systems {
        match sums.get(s.as_str()) {
            Some(&(w, sa, n)) if n > 0 => {
                let _ = write!(
                    out,
                    " | {:<cell_w$} {:<cell_w$}",
                    format!("{:.2}", w / n as f64),
                    format!("{:.2}", sa / n as f64)
                );
            }
            _ => {
                let _ = write!(out, " | {:<cell_w$} {:<cell_w$}", "-", "-");
            }
        }
        let _ = write!(out, "{:width$}", "", width = sys_w - (2 * cell_w + 1));
    }
    out.push('\n');
    out
}
