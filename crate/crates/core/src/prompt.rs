//! Prompt construction for in-context lemmatization.
//!
//! Templates are plain text assets with `{slot}` placeholders, versioned
//! through [`TEMPLATE_VERSION`]. The task description and instructions are
//! always in English; only the language name slot varies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Sentence};

pub const TEMPLATE_VERSION: &str = "lemma-prompt/v1";
pub const MAX_SHOTS: usize = 5;

const ZERO_SHOT: &str = include_str!("../assets/prompts/zero_shot.v1.txt");
const FEW_SHOT: &str = include_str!("../assets/prompts/few_shot.v1.txt");
const EXAMPLE: &str = include_str!("../assets/prompts/example.v1.txt");
const INSTRUCTIONS: &str = include_str!("../assets/prompts/instructions.v1.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt expects {expected} examples, got {actual}")]
    ShotMismatch { expected: usize, actual: usize },
    #[error("shot count {0} outside 0..={MAX_SHOTS}")]
    ShotRange(usize),
    #[error("{k} examples requested from a pool of {pool}")]
    PoolTooSmall { k: usize, pool: usize },
    #[error("most-errors selection needs dev diagnostics")]
    MissingDiagnostics,
    #[error("no diagnostics for pool sentence '{0}'")]
    UncoveredSentence(String),
    #[error("sentence '{0}' not found in example pool")]
    UnknownSentence(String),
    #[error("example sentence '{0}' has tokens without a gold lemma")]
    UnannotatedExample(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// Task description only.
    #[default]
    Basic,
    /// Task description plus the numbered lemmatization instructions.
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// The target sentence as one quoted string.
    SentenceString,
    /// The target sentence as a bracketed list of quoted words.
    #[default]
    WordList,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum Selection {
    Manual { ids: Vec<String> },
    Random { seed: u64 },
    MostErrors,
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selection::Manual { ids } => write!(f, "manual({})", ids.join(",")),
            Selection::Random { seed } => write!(f, "random(seed={seed})"),
            Selection::MostErrors => f.write_str("most-errors"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub template: Template,
    pub input_mode: InputMode,
    pub k: usize,
    pub selection: Selection,
    /// English exonym of the target language, e.g. "Spanish".
    pub language_name: String,
}

impl PromptSpec {
    /// Basic template, word-list input, four examples ranked by dev errors.
    pub fn default_for(language_name: impl Into<String>) -> Self {
        PromptSpec {
            template: Template::Basic,
            input_mode: InputMode::WordList,
            k: 4,
            selection: Selection::MostErrors,
            language_name: language_name.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FewShotExample {
    pub sentence: Sentence,
    pub gold_pairs: Vec<(String, String)>,
}

impl FewShotExample {
    pub fn from_sentence(sentence: &Sentence) -> Result<Self, PromptError> {
        let gold_pairs = sentence
            .tokens
            .iter()
            .map(|t| t.lemma.clone().map(|l| (t.wordform.clone(), l)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| PromptError::UnannotatedExample(sentence.id.clone()))?;
        Ok(FewShotExample {
            sentence: sentence.clone(),
            gold_pairs,
        })
    }
}

/// Replaces `{name}` placeholders in one pass; inserted values are not rescanned.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| {
            let name = &after[..close];
            slots.iter().find(|(n, _)| *n == name).map(|(_, v)| (close, *v))
        }) {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Python-style `repr` of a string: single quotes unless the text contains
/// a single quote and no double quote.
fn py_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// The target sentence as it appears after `Sentence:`.
pub fn sentence_slot(mode: InputMode, target: &Sentence) -> String {
    match mode {
        InputMode::SentenceString => {
            let text: Vec<&str> = target.wordforms().collect();
            format!(" \"{}\"", text.join(" "))
        }
        InputMode::WordList => {
            let items: Vec<String> = target.wordforms().map(py_repr).collect();
            format!("\n[{}]", items.join(", "))
        }
    }
}

fn example_block(example: &FewShotExample) -> String {
    let words: Vec<&str> = example.sentence.wordforms().collect();
    let mut pairs = String::new();
    for (i, (w, l)) in example.gold_pairs.iter().enumerate() {
        if i > 0 {
            pairs.push('\n');
        }
        let _ = write!(pairs, "{w}\t{l}");
    }
    fill(EXAMPLE, &[("words", &words.join("\n")), ("pairs", &pairs)])
}

pub fn render_prompt(spec: &PromptSpec, examples: &[FewShotExample], target: &Sentence) -> Result<String, PromptError> {
    if spec.k > MAX_SHOTS {
        return Err(PromptError::ShotRange(spec.k));
    }
    if examples.len() != spec.k {
        return Err(PromptError::ShotMismatch {
            expected: spec.k,
            actual: examples.len(),
        });
    }
    let instructions = match spec.template {
        Template::Basic => "",
        Template::Full => INSTRUCTIONS,
    };
    let sentence = sentence_slot(spec.input_mode, target);
    let examples: String = examples.iter().map(example_block).collect();
    let template = if spec.k == 0 { ZERO_SHOT } else { FEW_SHOT };
    let rendered = fill(
        template,
        &[
            ("language", &spec.language_name),
            ("instructions", instructions),
            ("examples", &examples),
            ("sentence", &sentence),
        ],
    );
    Ok(rendered.trim_end_matches('\n').to_string())
}

/// Picks `k` few-shot examples from `pool`.
///
/// `diagnostics` maps sentence ids to error totals from an earlier dev run;
/// only `most-errors` uses it. Results are in selection order: explicit
/// order for manual lists, descending error count (ties by id) for
/// most-errors, and pool order for random draws.
pub fn select_examples(
    selection: &Selection,
    k: usize,
    pool: &Corpus,
    diagnostics: Option<&BTreeMap<String, usize>>,
) -> Result<Vec<FewShotExample>, PromptError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > pool.sentences.len() {
        return Err(PromptError::PoolTooSmall {
            k,
            pool: pool.sentences.len(),
        });
    }
    let chosen: Vec<&Sentence> = match selection {
        Selection::Manual { ids } => {
            if ids.len() < k {
                return Err(PromptError::PoolTooSmall { k, pool: ids.len() });
            }
            ids[..k]
                .iter()
                .map(|id| pool.sentence(id).ok_or_else(|| PromptError::UnknownSentence(id.clone())))
                .collect::<Result<_, _>>()?
        }
        Selection::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut idx = sample(&mut rng, pool.sentences.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| &pool.sentences[i]).collect()
        }
        Selection::MostErrors => {
            let diag = diagnostics.ok_or(PromptError::MissingDiagnostics)?;
            let mut ranked = pool
                .sentences
                .iter()
                .map(|s| {
                    diag.get(&s.id)
                        .map(|&n| (n, s))
                        .ok_or_else(|| PromptError::UncoveredSentence(s.id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
            ranked.into_iter().take(k).map(|(_, s)| s).collect()
        }
    };
    chosen.into_iter().map(FewShotExample::from_sentence).collect()
}

/// English exonym for an ISO 639-1 code, for the languages in common lemmatization benchmarks.
pub fn language_name(code: &str) -> Option<&'static str> {
    Some(match code {
        "cs" => "Czech",
        "de" => "German",
        "en" => "English",
        "es" => "Spanish",
        "eu" => "Basque",
        "fi" => "Finnish",
        "fr" => "French",
        "is" => "Icelandic",
        "it" => "Italian",
        "pl" => "Polish",
        "ru" => "Russian",
        "sv" => "Swedish",
        "tr" => "Turkish",
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> Corpus {
        let mut c = Corpus::new("p", "es");
        for i in 1..=n {
            c.sentences.push(Sentence::from_pairs(format!("s{i}"), [("w", "w")]));
        }
        c
    }

    #[test]
    fn k_mismatch() {
        let spec = PromptSpec::default_for("Spanish");
        let t = Sentence::from_pairs("t", [("a", "a")]);
        assert_eq!(
            render_prompt(&spec, &[], &t),
            Err(PromptError::ShotMismatch { expected: 4, actual: 0 })
        );
    }

    #[test]
    fn slot_values_not_rescanned() {
        assert_eq!(fill("{a}{b}", &[("a", "{b}"), ("b", "x")]), "{b}x");
        assert_eq!(fill("{unknown} {a}", &[("a", "1")]), "{unknown} 1");
    }

    #[test]
    fn repr_quotes() {
        assert_eq!(py_repr("El"), "'El'");
        assert_eq!(py_repr("l'homme"), "\"l'homme\"");
        assert_eq!(py_repr("a'b\"c"), "'a\\'b\"c'");
    }

    #[test]
    fn zero_k_selects_nothing() {
        assert!(select_examples(&Selection::MostErrors, 0, &pool(3), None).unwrap().is_empty());
    }

    #[test]
    fn most_errors_ranking() {
        let diag: BTreeMap<String, usize> = [("s1", 5), ("s2", 2), ("s3", 5)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let got = select_examples(&Selection::MostErrors, 2, &pool(3), Some(&diag)).unwrap();
        let ids: Vec<_> = got.iter().map(|e| e.sentence.id.as_str()).collect();
        assert_eq!(ids, ["s1", "s3"]);
    }

    #[test]
    fn most_errors_requires_diagnostics() {
        assert_eq!(
            select_examples(&Selection::MostErrors, 1, &pool(3), None),
            Err(PromptError::MissingDiagnostics)
        );
        let diag: BTreeMap<String, usize> = [("s1".to_string(), 1)].into();
        assert_eq!(
            select_examples(&Selection::MostErrors, 1, &pool(2), Some(&diag)),
            Err(PromptError::UncoveredSentence("s2".into()))
        );
    }

    #[test]
    fn random_is_reproducible() {
        let p = pool(20);
        let a = select_examples(&Selection::Random { seed: 7 }, 4, &p, None).unwrap();
        let b = select_examples(&Selection::Random { seed: 7 }, 4, &p, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn manual_and_pool_size_errors() {
        let p = pool(3);
        let sel = Selection::Manual {
            ids: vec!["s3".into(), "s1".into()],
        };
        let got = select_examples(&sel, 2, &p, None).unwrap();
        assert_eq!(got[0].sentence.id, "s3");
        let sel = Selection::Manual { ids: vec!["nope".into()] };
        assert_eq!(
            select_examples(&sel, 1, &p, None),
            Err(PromptError::UnknownSentence("nope".into()))
        );
        assert_eq!(
            select_examples(&Selection::Random { seed: 1 }, 4, &p, None),
            Err(PromptError::PoolTooSmall { k: 4, pool: 3 })
        );
    }

    #[test]
    fn every_target_word_once_in_order() {
        let spec = PromptSpec {
            k: 0,
            ..PromptSpec::default_for("English")
        };
        let t = Sentence::from_pairs("t", [("zqa", "x"), ("zqb", "x"), ("zqc", "x")]);
        let p = render_prompt(&spec, &[], &t).unwrap();
        let pos: Vec<usize> = ["'zqa'", "'zqb'", "'zqc'"].iter().map(|w| p.find(w).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        for w in ["zqa", "zqb", "zqc"] {
            assert_eq!(p.matches(w).count(), 1);
        }
    }
}
