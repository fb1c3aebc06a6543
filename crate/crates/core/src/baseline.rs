//! Frequency-based lemmatizer over edit-script labels.
//!
//! Each token is looked up by its lowercased form, then by its longest known
//! suffix (up to `max_suffix_len` characters), falling back to the identity
//! script. Ties between equally frequent scripts go to the lower inventory id.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{Corpus, Sentence};
use crate::editscript::{induce, EditScript, LabelInventory};

pub const DEFAULT_MAX_SUFFIX_LEN: usize = 5;
pub const MODEL_HEADER: &str = "# lemmata baseline model v1";

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training corpus is empty")]
    EmptyTraining,
    #[error("token '{0}' has no lemma")]
    MissingLemma(String),
    #[error("script {0} is not in the label inventory")]
    UnknownLabel(String),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselineModel {
    form_table: BTreeMap<String, EditScript>,
    suffix_table: BTreeMap<String, EditScript>,
    max_suffix_len: usize,
}

fn fold(wordform: &str) -> String {
    wordform.to_lowercase()
}

fn suffixes(folded: &str, max_len: usize) -> impl Iterator<Item = &str> {
    let starts: Vec<usize> = folded.char_indices().map(|(i, _)| i).collect();
    let n = starts.len();
    (1..=max_len.min(n)).map(move |k| &folded[starts[n - k]..])
}

/// Majority label per key; ties resolved by the smaller inventory id.
fn majority(counts: HashMap<String, HashMap<usize, usize>>, inventory: &LabelInventory) -> BTreeMap<String, EditScript> {
    counts
        .into_iter()
        .map(|(key, by_label)| {
            let (&id, _) = by_label
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .expect("non-empty");
            (key, inventory.label(id).expect("id from inventory").clone())
        })
        .collect()
}

impl BaselineModel {
    pub fn train(train: &Corpus, inventory: &LabelInventory, max_suffix_len: usize) -> Result<Self, BaselineError> {
        if train.sentences.iter().all(Sentence::is_empty) {
            return Err(BaselineError::EmptyTraining);
        }
        let mut forms: HashMap<String, HashMap<usize, usize>> = HashMap::new();
        let mut sufs: HashMap<String, HashMap<usize, usize>> = HashMap::new();
        for token in train.tokens() {
            let lemma = token
                .lemma
                .as_deref()
                .ok_or_else(|| BaselineError::MissingLemma(token.wordform.clone()))?;
            let script = induce(&token.wordform, lemma);
            let id = inventory
                .id(&script)
                .ok_or_else(|| BaselineError::UnknownLabel(script.encode()))?;
            let folded = fold(&token.wordform);
            for suffix in suffixes(&folded, max_suffix_len) {
                *sufs.entry(suffix.to_string()).or_default().entry(id).or_default() += 1;
            }
            *forms.entry(folded).or_default().entry(id).or_default() += 1;
        }
        Ok(BaselineModel {
            form_table: majority(forms, inventory),
            suffix_table: majority(sufs, inventory),
            max_suffix_len,
        })
    }

    pub fn max_suffix_len(&self) -> usize {
        self.max_suffix_len
    }

    pub fn form_script(&self, wordform: &str) -> Option<&EditScript> {
        self.form_table.get(&fold(wordform))
    }

    pub fn suffix_script(&self, suffix: &str) -> Option<&EditScript> {
        self.suffix_table.get(suffix)
    }

    pub fn lemmatize(&self, wordform: &str) -> String {
        let folded = fold(wordform);
        let suffix_hits = suffixes(&folded, self.max_suffix_len)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .filter_map(|s| self.suffix_table.get(s));
        self.form_table
            .get(&folded)
            .into_iter()
            .chain(suffix_hits)
            .find_map(|script| script.apply(wordform).ok())
            .unwrap_or_else(|| wordform.to_string())
    }

    /// One lemma per input token.
    pub fn predict(&self, sentence: &Sentence) -> Vec<String> {
        sentence.tokens.iter().map(|t| self.lemmatize(&t.wordform)).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{MODEL_HEADER}\n# max_suffix_len = {}\n", self.max_suffix_len);
        for (key, script) in &self.form_table {
            let _ = writeln!(out, "form\t{key}\t{}", script.encode());
        }
        for (key, script) in &self.suffix_table {
            let _ = writeln!(out, "suffix\t{key}\t{}", script.encode());
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, BaselineError> {
        let mut lines = text.lines();
        if lines.next() != Some(MODEL_HEADER) {
            return Err(BaselineError::Format("missing version header".into()));
        }
        let max_suffix_len = lines
            .next()
            .and_then(|l| l.strip_prefix("# max_suffix_len = "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| BaselineError::Format("missing max_suffix_len".into()))?;
        let mut model = BaselineModel {
            form_table: BTreeMap::new(),
            suffix_table: BTreeMap::new(),
            max_suffix_len,
        };
        for line in lines.filter(|l| !crate::corpus::is_comment(l)) {
            let bad = || BaselineError::Format(format!("malformed row '{line}'"));
            let mut f = line.splitn(3, '\t');
            let (Some(kind), Some(key), Some(enc)) = (f.next(), f.next(), f.next()) else {
                return Err(bad());
            };
            let script = EditScript::decode(enc).map_err(|_| bad())?;
            let table = match kind {
                "form" => &mut model.form_table,
                "suffix" => &mut model.suffix_table,
                _ => return Err(bad()),
            };
            table.insert(key.to_string(), script);
        }
        Ok(model)
    }
}

/// Convenience wrapper: builds the inventory, then trains.
pub fn train(train: &Corpus, inventory: &LabelInventory) -> Result<BaselineModel, BaselineError> {
    BaselineModel::train(train, inventory, DEFAULT_MAX_SUFFIX_LEN)
}
