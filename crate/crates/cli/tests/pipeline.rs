use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use lemmata_cli::commands::{self, diagnostics_path, predictions_path, RunDiagnostics};
use lemmata_cli::Experiment;
use lemmata_core::gateway::{ChatRequest, ChatTransport, TransportError};
use lemmata_core::ProviderConfig;

fn experiments() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/experiments")
}

fn load(name: &str, out: &Path) -> Experiment {
    let mut exp = Experiment::load(&experiments().join(name)).unwrap();
    exp.config.output_dir = out.to_path_buf();
    exp
}

const LIVE: &str = r#"
output_dir = "unused"
cache_mode = "live"
runs = 2

[prompt]
k = 2
selection = "random"
seed = 5

[[corpora]]
name = "es_synth"
path = "../corpora/es_synth.conllu"
language = "es"
split = { train = 120, dev = 40, test = 60 }

[[systems]]
kind = "llm"
id = "echo"
parallelism = 3
[systems.provider]
base_url = "http://127.0.0.1:9/v1"
model_id = "echo-1"
api_key_env = "LEMMATA_TEST_KEY"
max_retries = 0
"#;

/// Copies the target word list back with identity lemmas; rejects prompts
/// whose target sentence mentions a garden.
struct Echo {
    calls: AtomicUsize,
}

impl ChatTransport for Echo {
    fn send(&self, _: &ProviderConfig, request: &ChatRequest<'_>) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let target = &request.prompt[request.prompt.rfind("Sentence:").unwrap()..];
        let list = target.lines().nth(1).unwrap();
        if list.contains("'jardín'") {
            return Err(TransportError::Status {
                status: 400,
                body: "rejected".into(),
            });
        }
        let words: Vec<&str> = list
            .trim_matches(|c| c == '[' || c == ']')
            .split(", ")
            .map(|w| &w[1..w.len() - 1])
            .collect();
        Ok(words.iter().map(|w| format!("{w}\t{w}")).collect::<Vec<_>>().join("\n"))
    }
}

#[test]
fn failed_requests_become_all_missing_sentences() {
    let out = tempfile::tempdir().unwrap();
    let mut exp = Experiment::from_toml(LIVE, experiments()).unwrap();
    exp.config.output_dir = out.path().to_path_buf();
    let echo = Arc::new(Echo {
        calls: AtomicUsize::new(0),
    });
    let summary = commands::cmd_run_with(&exp, echo.clone()).unwrap();

    let prepared = commands::prepare_all(&exp).unwrap();
    let test = &prepared[0].splits.test;
    let garden = test
        .sentences
        .iter()
        .filter(|s| s.wordforms().any(|w| w == "jardín"))
        .count();
    assert!(garden > 0, "fixture should mention a garden in the test split");
    assert_eq!(summary.failures, 2 * garden);
    assert_eq!(summary.live_calls, 2 * test.sentences.len());
    assert_eq!(echo.calls.load(Ordering::SeqCst), summary.live_calls);

    let diag = RunDiagnostics::load(&diagnostics_path(out.path(), "echo", "es_synth", 1)).unwrap();
    assert_eq!(diag.totals.failed_sentences, garden);
    for s in &diag.sentences {
        let sentence = test.sentences.iter().find(|t| t.id == s.id).unwrap();
        if s.failure.is_some() {
            assert_eq!(s.missing_words, sentence.len());
            assert!(s.failure.as_deref().unwrap().contains("400"));
        } else {
            assert_eq!(s.missing_words + s.wrong_words + s.random_outputs, 0);
            assert!(s.fingerprint.is_some());
        }
    }

    let scores = commands::cmd_score(&exp).unwrap();
    let report = &scores.reports[0];
    assert_eq!(report.per_run.len(), 2);
    let total: usize = test.sentences.iter().map(|s| s.len()).sum();
    let missing: usize = test
        .sentences
        .iter()
        .filter(|s| s.wordforms().any(|w| w == "jardín"))
        .map(|s| s.len())
        .sum();
    assert_eq!(report.diagnostics.missing_words, 2 * missing);
    assert!(report.word_accuracy.mean < 1.0 - missing as f64 / total as f64 + 1e-12);
}

#[test]
fn score_lists_every_missing_prediction_file() {
    let out = tempfile::tempdir().unwrap();
    let exp = load("replay.toml", out.path());
    let err = format!("{:#}", commands::cmd_score(&exp).unwrap_err());
    assert!(err.contains("missing prediction files"), "{err}");
    for needle in ["system freq", "system sim-chat, corpus es_synth, run 2", "system imported"] {
        assert!(err.contains(needle), "{needle} not in {err}");
    }
}

#[test]
fn every_output_carries_metadata() {
    let out = tempfile::tempdir().unwrap();
    let exp = load("replay.toml", out.path());
    commands::cmd_ingest(&exp).unwrap();
    commands::cmd_split(&exp).unwrap();
    commands::cmd_induce(&exp).unwrap();
    commands::cmd_train_baseline(&exp).unwrap();
    commands::cmd_run(&exp).unwrap();
    commands::cmd_score(&exp).unwrap();
    let files = [
        out.path().join("stats.tsv"),
        out.path().join("splits/es_synth.manifest"),
        out.path().join("inventory/es_synth.tsv"),
        out.path().join("models/freq/es_synth.tsv"),
        predictions_path(out.path(), "sim-chat", "es_synth", 0),
        predictions_path(out.path(), "imported", "es_synth", 0),
        diagnostics_path(out.path(), "sim-chat", "es_synth", 2),
        out.path().join("scores/report.tsv"),
        out.path().join("scores/mcnemar.tsv"),
        out.path().join("scores/scores.json"),
    ];
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        for key in ["config_sha256", "cache_mode", "missing_policy", "template_version"] {
            assert!(text.contains(key), "{} lacks {key}", f.display());
        }
    }
    let llm = fs::read_to_string(predictions_path(out.path(), "sim-chat", "es_synth", 0)).unwrap();
    assert!(llm.contains("# selection = most-errors"));
    assert!(llm.contains("# k = 4"));
}

#[test]
fn imported_predictions_report_the_malformed_row() {
    let out = tempfile::tempdir().unwrap();
    let exp = load("replay.toml", out.path());
    commands::cmd_run(&exp).unwrap();
    let diag = RunDiagnostics::load(&diagnostics_path(out.path(), "imported", "es_synth", 0)).unwrap();
    assert_eq!(diag.issues.len(), 1, "{:?}", diag.issues);
    assert!(diag.issues[0].contains("malformed"));
    let bad = diag.sentences.iter().filter(|s| s.missing_words > 0).count();
    assert_eq!(bad, 1);
}

#[test]
fn compare_and_report_read_the_scores() {
    let out = tempfile::tempdir().unwrap();
    let exp = load("replay.toml", out.path());
    assert!(commands::cmd_report(&exp).is_err());
    commands::cmd_run(&exp).unwrap();
    let scores = commands::cmd_score(&exp).unwrap();
    assert_eq!(scores.comparisons.len(), 3);
    let table = commands::cmd_report(&exp).unwrap();
    assert!(table.contains("WAcc") && table.contains("SentAcc"));
    assert!(table.contains("sim-chat"));
    let cmp = commands::cmd_compare(&exp, "imported", "freq", Some("es_synth")).unwrap();
    assert_eq!(cmp.len(), 1);
    assert!(commands::cmd_compare(&exp, "freq", "nobody", None).is_err());
}

#[test]
fn replay_misses_are_failures_not_errors() {
    let out = tempfile::tempdir().unwrap();
    let mut exp = load("replay.toml", out.path());
    exp.config.prompt.k = 3;
    let summary = commands::cmd_run(&exp).unwrap();
    assert_eq!(summary.failures, 3 * 60);
    assert_eq!(summary.live_calls, 0);
}

#[test]
fn binary_induces_ad_hoc_scripts() {
    let out = Command::new(env!("CARGO_BIN_EXE_lemmata"))
        .args(["induce", "--form", "Los", "--lemma", "el"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "L|0|e|2|\tcost=4\n");
}

#[test]
fn binary_runs_the_replay_pipeline() {
    let out = tempfile::tempdir().unwrap();
    let config = experiments().join("replay.toml");
    for cmd in ["run", "score", "report"] {
        let status = Command::new(env!("CARGO_BIN_EXE_lemmata"))
            .arg("--config")
            .arg(&config)
            .arg("--output-dir")
            .arg(out.path())
            .arg(cmd)
            .env("RUST_LOG", "error")
            .status()
            .unwrap();
        assert!(status.success(), "{cmd} failed");
    }
    assert!(out.path().join("scores/table.txt").exists());
    let missing = Command::new(env!("CARGO_BIN_EXE_lemmata")).arg("run").output().unwrap();
    assert!(!missing.status.success());
}
