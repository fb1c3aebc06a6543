//! Edit scripts: the class labels of edit-based lemmatization.
//!
//! A script optionally changes the case of the first character, then
//! deletes characters from the front and back of the word and inserts
//! replacement strings there. Counts are in Unicode scalar values.
//!
//! [`induce`] picks, among all scripts that turn a wordform into its lemma,
//! one with the fewest edited characters. Ties prefer edits at the end of the
//! word over edits at the start, then shorter replacement strings.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScriptError {
    #[error("script deletes {deletes} characters but '{wordform}' has {len}")]
    Inapplicable {
        wordform: String,
        deletes: usize,
        len: usize,
    },
    #[error("malformed script encoding '{0}'")]
    Decode(String),
}

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("token {index} ('{wordform}') of sentence {sentence} has no lemma")]
    MissingLemma {
        sentence: String,
        index: usize,
        wordform: String,
    },
    #[error("training corpus is empty")]
    Empty,
    #[error("inventory file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseFlag {
    #[default]
    Preserve,
    LowercaseFirst,
    UppercaseFirst,
}

impl CaseFlag {
    const ALL: [CaseFlag; 3] = [CaseFlag::Preserve, CaseFlag::LowercaseFirst, CaseFlag::UppercaseFirst];

    fn code(self) -> char {
        match self {
            CaseFlag::Preserve => '=',
            CaseFlag::LowercaseFirst => 'L',
            CaseFlag::UppercaseFirst => 'U',
        }
    }

    fn from_code(c: &str) -> Option<Self> {
        match c {
            "=" => Some(CaseFlag::Preserve),
            "L" => Some(CaseFlag::LowercaseFirst),
            "U" => Some(CaseFlag::UppercaseFirst),
            _ => None,
        }
    }

    /// Applies the flag to the first character of `word`.
    pub fn apply(self, word: &str) -> String {
        let mut chars = word.chars();
        let Some(first) = chars.next() else {
            return String::new();
        };
        let mut out = String::with_capacity(word.len() + 2);
        match self {
            CaseFlag::Preserve => out.push(first),
            CaseFlag::LowercaseFirst => out.extend(first.to_lowercase()),
            CaseFlag::UppercaseFirst => out.extend(first.to_uppercase()),
        }
        out.push_str(chars.as_str());
        out
    }
}

/// Delete `delete` characters at one end of the word, then insert `insert` there.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EditOp {
    pub delete: usize,
    pub insert: String,
}

impl EditOp {
    pub fn new(delete: usize, insert: impl Into<String>) -> Self {
        EditOp {
            delete,
            insert: insert.into(),
        }
    }

    pub fn is_noop(&self) -> bool {
        self.delete == 0 && self.insert.is_empty()
    }

    fn size(&self) -> usize {
        self.delete + self.insert.chars().count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditScript {
    pub case: CaseFlag,
    pub prefix: EditOp,
    pub suffix: EditOp,
}

impl EditScript {
    pub fn identity() -> Self {
        EditScript::default()
    }

    pub fn is_identity(&self) -> bool {
        self.case == CaseFlag::Preserve && self.prefix.is_noop() && self.suffix.is_noop()
    }

    /// Number of edited characters; a case change counts as one.
    pub fn cost(&self) -> usize {
        usize::from(self.case != CaseFlag::Preserve) + self.prefix.size() + self.suffix.size()
    }

    pub fn apply(&self, wordform: &str) -> Result<String, ScriptError> {
        let cased = self.case.apply(wordform);
        let chars: Vec<char> = cased.chars().collect();
        let deletes = self.prefix.delete + self.suffix.delete;
        if deletes > chars.len() {
            return Err(ScriptError::Inapplicable {
                wordform: wordform.to_string(),
                deletes,
                len: chars.len(),
            });
        }
        let mut out = String::with_capacity(cased.len() + self.prefix.insert.len() + self.suffix.insert.len());
        out.push_str(&self.prefix.insert);
        out.extend(&chars[self.prefix.delete..chars.len() - self.suffix.delete]);
        out.push_str(&self.suffix.insert);
        Ok(out)
    }

    /// Compact single-line encoding: `case|prefix-del|prefix-ins|suffix-del|suffix-ins`.
    ///
    /// Backslash, `|`, tab, CR and LF inside replacement strings are escaped.
    pub fn encode(&self) -> String {
        let mut out = String::new();
        out.push(self.case.code());
        let _ = write!(out, "|{}|", self.prefix.delete);
        escape_into(&self.prefix.insert, &mut out);
        let _ = write!(out, "|{}|", self.suffix.delete);
        escape_into(&self.suffix.insert, &mut out);
        out
    }

    pub fn decode(encoded: &str) -> Result<Self, ScriptError> {
        let bad = || ScriptError::Decode(encoded.to_string());
        let fields = split_escaped(encoded).ok_or_else(bad)?;
        let [case, pd, pi, sd, si]: [String; 5] = fields.try_into().map_err(|_| bad())?;
        Ok(EditScript {
            case: CaseFlag::from_code(&case).ok_or_else(bad)?,
            prefix: EditOp::new(pd.parse().map_err(|_| bad())?, pi),
            suffix: EditOp::new(sd.parse().map_err(|_| bad())?, si),
        })
    }
}

impl fmt::Display for EditScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

fn escape_into(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn split_escaped(s: &str) -> Option<Vec<String>> {
    let mut fields = vec![String::new()];
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                let unescaped = match chars.next()? {
                    '\\' => '\\',
                    '|' => '|',
                    't' => '\t',
                    'n' => '\n',
                    'r' => '\r',
                    _ => return None,
                };
                fields.last_mut()?.push(unescaped);
            }
            '|' => fields.push(String::new()),
            c => fields.last_mut()?.push(c),
        }
    }
    Some(fields)
}

/// Induces a minimal edit script turning `wordform` into `lemma`.
///
/// Total: whole-word replacement is always representable, so every pair of
/// strings gets a script and `induce(w, l).apply(w) == Ok(l)` holds.
pub fn induce(wordform: &str, lemma: &str) -> EditScript {
    let target: Vec<char> = lemma.chars().collect();
    let mut best: Option<(Candidate, EditScript)> = None;

    for (rank, case) in CaseFlag::ALL.into_iter().enumerate() {
        let cased = case.apply(wordform);
        if case != CaseFlag::Preserve && cased == wordform {
            continue;
        }
        let source: Vec<char> = cased.chars().collect();
        let (mid_len, src_start, tgt_start) = longest_common_substring(&source, &target);
        let prefix = EditOp::new(src_start, target[..tgt_start].iter().collect::<String>());
        let suffix = EditOp::new(
            source.len() - src_start - mid_len,
            target[tgt_start + mid_len..].iter().collect::<String>(),
        );
        let script = EditScript { case, prefix, suffix };
        let candidate = Candidate {
            cost: script.cost(),
            case_rank: rank,
            prefix_size: script.prefix.size(),
            replacement: script.prefix.insert.chars().count() + script.suffix.insert.chars().count(),
            prefix_delete: script.prefix.delete,
        };
        if best.as_ref().is_none_or(|(b, _)| candidate < *b) {
            best = Some((candidate, script));
        }
    }
    best.map(|(_, s)| s).expect("preserve is always a candidate")
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    cost: usize,
    case_rank: usize,
    prefix_size: usize,
    replacement: usize,
    prefix_delete: usize,
}

/// Longest common substring of `a` and `b` as `(len, start_a, start_b)`.
///
/// Among occurrences of maximal length, the one with the smallest
/// `start_a + start_b` wins, then the smallest `start_a`. An empty common
/// substring is reported at `(0, 0, 0)`.
fn longest_common_substring(a: &[char], b: &[char]) -> (usize, usize, usize) {
    let mut best = (0usize, 0usize, 0usize);
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            let len = cur[j];
            if len == 0 {
                continue;
            }
            let (sa, sb) = (i - len, j - len);
            let better = len > best.0
                || (len == best.0 && (sa + sb, sa) < (best.1 + best.2, best.1));
            if better {
                best = (len, sa, sb);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// The distinct edit scripts of a training corpus with dense ids.
///
/// Ids are ordered by descending frequency, then by script encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelInventory {
    labels: Vec<EditScript>,
    frequency: Vec<usize>,
    ids: HashMap<EditScript, usize>,
}

pub const INVENTORY_HEADER: &str = "# lemmata label inventory v1";

impl LabelInventory {
    fn from_counts(counts: HashMap<EditScript, usize>) -> Self {
        let mut entries: Vec<(String, EditScript, usize)> =
            counts.into_iter().map(|(s, n)| (s.encode(), s, n)).collect();
        entries.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        let mut inv = LabelInventory {
            labels: Vec::with_capacity(entries.len()),
            frequency: Vec::with_capacity(entries.len()),
            ids: HashMap::with_capacity(entries.len()),
        };
        for (id, (_, script, n)) in entries.into_iter().enumerate() {
            inv.ids.insert(script.clone(), id);
            inv.labels.push(script);
            inv.frequency.push(n);
        }
        inv
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, script: &EditScript) -> Option<usize> {
        self.ids.get(script).copied()
    }

    pub fn label(&self, id: usize) -> Option<&EditScript> {
        self.labels.get(id)
    }

    pub fn frequency(&self, id: usize) -> Option<usize> {
        self.frequency.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &EditScript, usize)> {
        self.labels
            .iter()
            .zip(&self.frequency)
            .enumerate()
            .map(|(id, (s, &n))| (id, s, n))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{INVENTORY_HEADER}\nid\tscript\tfrequency\n");
        for (id, script, n) in self.iter() {
            let _ = writeln!(out, "{id}\t{}\t{n}", script.encode());
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, InventoryError> {
        let mut lines = text.lines();
        if lines.next() != Some(INVENTORY_HEADER) {
            return Err(InventoryError::Format("missing version header".into()));
        }
        let mut lines = lines.filter(|l| !crate::corpus::is_comment(l));
        if lines.next() != Some("id\tscript\tfrequency") {
            return Err(InventoryError::Format("missing column header".into()));
        }
        let mut counts = HashMap::new();
        for (n, line) in lines.enumerate() {
            let bad = || InventoryError::Format(format!("malformed row {}: '{line}'", n + 1));
            let mut fields = line.split('\t');
            let (Some(id), Some(script), Some(freq), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad());
            };
            if id.parse::<usize>().ok() != Some(n) {
                return Err(bad());
            }
            let script = EditScript::decode(script).map_err(|_| bad())?;
            counts.insert(script, freq.parse().map_err(|_| bad())?);
        }
        Ok(Self::from_counts(counts))
    }
}

/// Induces a script for every training token and collects the label set.
pub fn build_inventory(train: &Corpus) -> Result<LabelInventory, InventoryError> {
    let mut counts: HashMap<EditScript, usize> = HashMap::new();
    for sentence in &train.sentences {
        for token in &sentence.tokens {
            let lemma = token.lemma.as_deref().ok_or_else(|| InventoryError::MissingLemma {
                sentence: sentence.id.clone(),
                index: token.index,
                wordform: token.wordform.clone(),
            })?;
            *counts.entry(induce(&token.wordform, lemma)).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(InventoryError::Empty);
    }
    Ok(LabelInventory::from_counts(counts))
}
