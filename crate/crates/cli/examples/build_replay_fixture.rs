//! Regenerates the shipped response cache, dev diagnostics and imported
//! prediction file under `fixtures/`.
//!
//! Responses come from a simulated chat model that lemmatizes from the gold
//! corpus and then perturbs its answer the way real models do: quoted
//! fields, lowercased initial words, skipped words, chatty preambles, code
//! fences, repeated blocks and plain lemma errors. Perturbations are seeded
//! from the request fingerprint, so regeneration is reproducible.
//!
//!     cargo run -p lemmata-cli --example build_replay_fixture

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use lemmata_cli::commands::{self, diagnostics_path};
use lemmata_cli::config::SystemConfig;
use lemmata_cli::Experiment;
use lemmata_core::corpus::parse_conllu;
use lemmata_core::gateway::{ChatRequest, ChatTransport, TransportError};
use lemmata_core::prompt::sentence_slot;
use lemmata_core::{CacheMode, InputMode, ProviderConfig, Sentence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct SimulatedModel {
    by_slot: HashMap<String, Sentence>,
}

impl SimulatedModel {
    fn new(corpus: &[Sentence]) -> Self {
        let mut by_slot = HashMap::new();
        for s in corpus {
            for mode in [InputMode::WordList, InputMode::SentenceString] {
                by_slot.insert(sentence_slot(mode, s), s.clone());
            }
        }
        SimulatedModel { by_slot }
    }

    fn target(&self, prompt: &str) -> Option<&Sentence> {
        let start = prompt.rfind("Sentence:")? + "Sentence:".len();
        let end = prompt[start..].find("\nAnswer with")? + start;
        self.by_slot.get(&prompt[start..end])
    }
}

fn wrong_lemma(form: &str, gold: &str) -> String {
    let lower = form.to_lowercase();
    if lower != gold {
        lower
    } else {
        format!("{gold}s")
    }
}

fn respond(sentence: &Sentence, few_shot: bool, rng: &mut ChaCha8Rng) -> String {
    let m = if few_shot { 1.0 } else { 2.5 };
    let mut rows: Vec<(String, String)> = sentence
        .tokens
        .iter()
        .map(|t| {
            let gold = t.lemma.clone().unwrap_or_default();
            let lemma = if rng.random_bool(0.03 * m) {
                wrong_lemma(&t.wordform, &gold)
            } else {
                gold
            };
            (t.wordform.clone(), lemma)
        })
        .collect();
    if rows.len() > 3 && rng.random_bool(0.04 * m) {
        let i = rng.random_range(1..rows.len() - 1);
        rows.remove(i);
    }
    if rng.random_bool(0.05 * m) {
        let first = &mut rows[0].0;
        let lower = first.to_lowercase();
        if lower != *first {
            *first = lower;
        }
    }
    if rng.random_bool(0.01 * m) {
        let at = rng.random_range(0..rows.len());
        rows.insert(at, ("también".into(), "también".into()));
    }
    let quote = rng.random_bool(0.03);
    let mut body: Vec<String> = rows
        .iter()
        .map(|(w, l)| if quote { format!("\"{w}\"\t\"{l}\"") } else { format!("{w}\t{l}") })
        .collect();
    if rng.random_bool(0.01 * m) {
        let dup = body.clone();
        body.extend(dup);
    }
    let mut out = String::new();
    if rng.random_bool(0.04 * m) {
        out.push_str("Here is the lemmatized sentence:\n");
    }
    let fence = rng.random_bool(0.03 * m);
    if fence {
        out.push_str("```\n");
    }
    out.push_str(&body.join("\n"));
    if fence {
        out.push_str("\n```");
    }
    if rng.random_bool(0.02 * m) {
        out.push_str("\n\nNote: punctuation marks are kept as their own lemma.");
    }
    out
}

impl ChatTransport for SimulatedModel {
    fn send(&self, _: &ProviderConfig, request: &ChatRequest<'_>) -> Result<String, TransportError> {
        let sentence = self
            .target(request.prompt)
            .ok_or_else(|| TransportError::Decode("prompt names no known sentence".into()))?;
        let fp = request.fingerprint();
        let seed = u64::from_str_radix(&fp[..16], 16).expect("hex fingerprint");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(respond(sentence, request.prompt.contains("For example"), &mut rng))
    }
}

/// Gold test split with a few seeded lemma errors and one malformed row.
fn imported_predictions(test: &[Sentence]) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = String::from("# produced by an external tagger\n");
    for (n, s) in test.iter().enumerate() {
        let _ = writeln!(out, "\n# sent_id = {}", s.id);
        for (i, t) in s.tokens.iter().enumerate() {
            let gold = t.lemma.clone().unwrap_or_default();
            if n == 6 && i == 1 {
                let _ = writeln!(out, "{}\t{gold}\tNOUN", t.wordform);
                continue;
            }
            let lemma = if rng.random_bool(0.05) {
                wrong_lemma(&t.wordform, &gold)
            } else {
                gold
            };
            let _ = writeln!(out, "{}\t{lemma}", t.wordform);
        }
    }
    out
}

fn load(path: &Path, out: &Path) -> Result<Experiment> {
    let mut exp = Experiment::load(path)?;
    exp.config.cache_mode = CacheMode::Record;
    exp.config.output_dir = out.to_path_buf();
    for s in &mut exp.config.systems {
        if let SystemConfig::Llm(llm) = s {
            // One worker keeps the cache index in request order.
            llm.parallelism = 1;
        }
    }
    Ok(exp)
}

fn main() -> Result<()> {
    env_logger::init();
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let experiments = fixtures.join("experiments");
    let scratch = tempfile::tempdir()?;

    let cache = fixtures.join("cache");
    if cache.exists() {
        fs::remove_dir_all(&cache).context("clearing old cache")?;
    }
    let text = fs::read_to_string(fixtures.join("corpora/es_synth.conllu"))?;
    let corpus = parse_conllu(&text, "es_synth", "es")?;
    let model = Arc::new(SimulatedModel::new(&corpus.sentences));

    let dev = load(&experiments.join("dev0.toml"), &scratch.path().join("dev0"))?;
    let summary = commands::cmd_run_with(&dev, model.clone())?;
    anyhow::ensure!(summary.failures == 0, "dev run had failures");
    let diag = diagnostics_path(&dev.output_dir(), "sim-chat", "es_synth", 0);
    fs::create_dir_all(experiments.join("diagnostics"))?;
    fs::copy(&diag, experiments.join("diagnostics/es_synth.dev.json"))?;

    let replay = load(&experiments.join("replay.toml"), &scratch.path().join("replay"))?;
    let prepared = commands::prepare_corpus(&replay, &replay.config.corpora[0])?;
    fs::write(
        fixtures.join("external/es_synth.test.tsv"),
        imported_predictions(&prepared.splits.test.sentences),
    )?;
    let summary = commands::cmd_run_with(&replay, model)?;
    anyhow::ensure!(summary.failures == 0, "test run had failures");
    println!("recorded {} live calls into {}", summary.live_calls, cache.display());
    Ok(())
}
