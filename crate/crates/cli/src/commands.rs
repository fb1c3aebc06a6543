//! Pipeline commands. Each writes its outputs under the experiment's
//! `output_dir` and returns a summary for the caller to print.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use lemmata_core::align::{read_predictions, write_predictions, PredictionIssue};
use lemmata_core::corpus::{self, Splits};
use lemmata_core::editscript::build_inventory;
use lemmata_core::eval::{compare_systems, render_table, PairwiseComparison};
use lemmata_core::gateway::{ChatTransport, HttpTransport, ResponseCache};
use lemmata_core::prompt::{render_prompt, select_examples, TEMPLATE_VERSION};
use lemmata_core::{
    align, parse_output, AlignedPrediction, BaselineModel, CacheMode, Corpus, EvalReport, Gateway, MissingPolicy,
    PromptSpec, Selection, SplitSpec,
};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{
    BaselineSystem, CorpusConfig, CorpusFormat, Experiment, ExternalSystem, LlmSystem, PromptConfig, SelectionName,
    SplitName, SystemConfig,
};

pub type Metadata = Vec<(String, String)>;

/// A corpus after ingestion, reduction and splitting.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: CorpusConfig,
    pub source: Corpus,
    pub splits: Splits,
}

impl Prepared {
    pub fn split(&self, which: SplitName) -> &Corpus {
        match which {
            SplitName::Train => &self.splits.train,
            SplitName::Dev => &self.splits.dev,
            SplitName::Test => &self.splits.test,
        }
    }

    /// The split under evaluation, named after the corpus.
    pub fn eval_corpus(&self, which: SplitName) -> Corpus {
        let mut c = self.split(which).clone();
        c.name = self.config.name.clone();
        c
    }
}

pub fn prepare_corpus(exp: &Experiment, cc: &CorpusConfig) -> Result<Prepared> {
    let path = exp.resolve(&cc.path);
    let full = match cc.format {
        CorpusFormat::Conllu => corpus::ingest_conllu(&path, &cc.name, &cc.language),
        CorpusFormat::Tsv => corpus::ingest_tsv(&path, &cc.name, &cc.language),
    }
    .with_context(|| format!("ingesting corpus {}", cc.name))?;
    let source = match cc.reduce_to {
        Some(n) => corpus::reduce(&full, n, cc.reduction()?),
        None => full,
    };
    let spec = match &cc.split {
        Some(s) => SplitSpec {
            train_count: s.train,
            dev_count: s.dev,
            test_count: s.test,
            selection_rule: cc.split_rule()?,
        },
        None => SplitSpec::first_n(0, 0, source.sentences.len()),
    };
    let splits = corpus::make_splits(&source, &spec)?;
    Ok(Prepared {
        config: cc.clone(),
        source,
        splits,
    })
}

pub fn prepare_all(exp: &Experiment) -> Result<Vec<Prepared>> {
    exp.config.corpora.iter().map(|cc| prepare_corpus(exp, cc)).collect()
}

/// Serialized name of a unit enum variant.
fn kebab<T: Serialize>(value: &T) -> Result<String> {
    match serde_json::to_value(value)? {
        serde_json::Value::String(s) => Ok(s),
        other => bail!("expected a unit variant, got {other}"),
    }
}

fn policy_name(policy: MissingPolicy) -> &'static str {
    match policy {
        MissingPolicy::Strict => "strict",
        MissingPolicy::Renormalize => "renormalize",
    }
}

/// Settings every output file records.
pub fn base_metadata(exp: &Experiment) -> Metadata {
    let c = &exp.config;
    let mut m: Metadata = vec![
        ("tool".into(), format!("lemmata {}", env!("CARGO_PKG_VERSION"))),
        ("config_sha256".into(), exp.config_hash.clone()),
        ("cache_mode".into(), c.cache_mode.to_string()),
        ("eval_split".into(), c.eval_split.to_string()),
        ("missing_policy".into(), policy_name(c.scoring.missing_policy).into()),
        ("mcnemar_run".into(), c.scoring.mcnemar_run.to_string()),
        ("alpha".into(), c.scoring.alpha.to_string()),
        ("error_weighting".into(), "equal".into()),
        ("template_version".into(), TEMPLATE_VERSION.into()),
    ];
    for cc in &c.corpora {
        let reduction = match (cc.reduce_to, cc.reduction()) {
            (Some(n), Ok(rule)) => format!("{n} {rule}"),
            _ => "none".into(),
        };
        let split = match (&cc.split, cc.split_rule()) {
            (Some(s), Ok(rule)) => format!("{}/{}/{} {rule}", s.train, s.dev, s.test),
            _ => "test-only".into(),
        };
        m.push((format!("corpus.{}", cc.name), format!("reduction={reduction} split={split}")));
    }
    m
}

fn metadata_lines(metadata: &Metadata) -> String {
    metadata.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
}

/// Inserts metadata comments after the first (version header) line.
fn after_header(text: &str, metadata: &Metadata) -> String {
    let (head, rest) = text.split_once('\n').unwrap_or((text, ""));
    format!("{head}\n{}{rest}", metadata_lines(metadata))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------------------
// ingest / split / induce / train-baseline

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub name: String,
    pub language: String,
    pub source_sentences: usize,
    pub source_tokens: usize,
    pub eval_sentences: usize,
    pub eval_tokens: usize,
    /// `none`, or the sentence cap and the rule that picked the kept sentences.
    pub reduction: String,
}

pub const STATS_HEADER: &str = "# lemmata corpus stats v1";

/// Ingests every corpus, writes normalized copies and the statistics table.
pub fn cmd_ingest(exp: &Experiment) -> Result<Vec<CorpusSummary>> {
    let out = exp.output_dir();
    let metadata = base_metadata(exp);
    let mut summaries = Vec::new();
    for p in prepare_all(exp)? {
        write_file(&out.join("corpora").join(format!("{}.tsv", p.config.name)), &corpus::to_tsv(&p.source))?;
        let src = p.source.stats();
        let eval = p.split(exp.config.eval_split).stats();
        summaries.push(CorpusSummary {
            name: p.config.name.clone(),
            language: p.config.language.clone(),
            source_sentences: src.sentences,
            source_tokens: src.tokens,
            eval_sentences: eval.sentences,
            eval_tokens: eval.tokens,
            reduction: match p.config.reduce_to {
                Some(n) => format!("{n} {}", p.config.reduction()?),
                None => "none".into(),
            },
        });
    }

    let mut tsv = format!("{STATS_HEADER}\n{}", metadata_lines(&metadata));
    tsv.push_str("corpus\tlanguage\tsource_tokens\tsource_sentences\teval_tokens\teval_sentences\treduction\n");
    for s in &summaries {
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.name, s.language, s.source_tokens, s.source_sentences, s.eval_tokens, s.eval_sentences, s.reduction
        );
    }
    write_file(&out.join("stats.tsv"), &tsv)?;
    write_file(&out.join("stats.txt"), &render_stats(&summaries))?;
    Ok(summaries)
}

/// Corpus, token and sentence counts of the evaluation sets as a text table.
pub fn render_stats(summaries: &[CorpusSummary]) -> String {
    let w = summaries.iter().map(|s| s.name.len()).chain([6]).max().unwrap_or(6);
    let mut out = format!("{:<w$}  {:>8}  {:>9}  Reduction\n", "Corpus", "Tokens", "Sentences");
    for s in summaries {
        let _ = writeln!(out, "{:<w$}  {:>8}  {:>9}  {}", s.name, s.eval_tokens, s.eval_sentences, s.reduction);
    }
    out
}

/// Writes split manifests and the split corpora.
pub fn cmd_split(exp: &Experiment) -> Result<Vec<PathBuf>> {
    let dir = exp.output_dir().join("splits");
    let metadata = base_metadata(exp);
    let mut written = Vec::new();
    for p in prepare_all(exp)? {
        let name = &p.config.name;
        let manifest = corpus::write_manifest(&p.source, &p.splits, p.config.split_rule()?);
        let path = dir.join(format!("{name}.manifest"));
        write_file(&path, &after_header(&manifest, &metadata))?;
        written.push(path);
        for which in [SplitName::Train, SplitName::Dev, SplitName::Test] {
            let path = dir.join(format!("{name}.{which}.tsv"));
            write_file(&path, &corpus::to_tsv(p.split(which)))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Builds the edit-script inventory of each training split.
pub fn cmd_induce(exp: &Experiment) -> Result<Vec<PathBuf>> {
    let dir = exp.output_dir().join("inventory");
    let metadata = base_metadata(exp);
    let mut written = Vec::new();
    for p in prepare_all(exp)? {
        if p.splits.train.sentences.is_empty() {
            info!("corpus {} has no train split; skipping", p.config.name);
            continue;
        }
        let inventory = build_inventory(&p.splits.train)?;
        let path = dir.join(format!("{}.tsv", p.config.name));
        write_file(&path, &after_header(&inventory.to_tsv(), &metadata))?;
        written.push(path);
    }
    Ok(written)
}

fn train_baseline(p: &Prepared, system: &BaselineSystem) -> Result<BaselineModel> {
    if p.splits.train.sentences.is_empty() {
        bail!("baseline {} needs a train split for corpus {}", system.id, p.config.name);
    }
    let inventory = build_inventory(&p.splits.train)?;
    Ok(BaselineModel::train(&p.splits.train, &inventory, system.max_suffix_len)?)
}

/// Trains every baseline system on every corpus and saves the models.
pub fn cmd_train_baseline(exp: &Experiment) -> Result<Vec<PathBuf>> {
    let dir = exp.output_dir().join("models");
    let metadata = base_metadata(exp);
    let prepared = prepare_all(exp)?;
    let mut written = Vec::new();
    for system in &exp.config.systems {
        let SystemConfig::Baseline(b) = system else { continue };
        for p in &prepared {
            let model = train_baseline(p, b)?;
            let path = dir.join(&b.id).join(format!("{}.tsv", p.config.name));
            write_file(&path, &after_header(&model.to_tsv(), &metadata))?;
            written.push(path);
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// run

/// Per-sentence alignment diagnostics of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceDiagnostics {
    pub id: String,
    pub missing_words: usize,
    pub wrong_words: usize,
    pub random_outputs: usize,
    pub incorrect_lemmas: usize,
    /// Equal-weight sum of the four counts above.
    pub errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticTotals {
    pub missing_words: usize,
    pub wrong_words: usize,
    pub random_outputs: usize,
    pub incorrect_lemmas: usize,
    pub failed_sentences: usize,
}

/// Sidecar written next to every prediction file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub metadata: BTreeMap<String, String>,
    pub system: String,
    pub corpus: String,
    pub run: usize,
    pub totals: DiagnosticTotals,
    pub sentences: Vec<SentenceDiagnostics>,
    #[serde(default)]
    pub issues: Vec<String>,
}

impl RunDiagnostics {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Sentence id to total error count, as used by most-errors selection.
    pub fn error_map(&self) -> BTreeMap<String, usize> {
        self.sentences.iter().map(|s| (s.id.clone(), s.errors)).collect()
    }
}

fn sentence_diagnostics(
    gold: &lemmata_core::Sentence,
    pred: &AlignedPrediction,
    fingerprint: Option<String>,
    failure: Option<String>,
) -> SentenceDiagnostics {
    let c = pred.counts;
    let incorrect = pred.incorrect_lemmas(gold);
    SentenceDiagnostics {
        id: gold.id.clone(),
        missing_words: c.missing_words,
        wrong_words: c.wrong_words,
        random_outputs: c.random_outputs,
        incorrect_lemmas: incorrect,
        errors: c.missing_words + c.wrong_words + c.random_outputs + incorrect,
        fingerprint,
        failure,
    }
}

pub fn predictions_path(out: &Path, system: &str, corpus: &str, run: usize) -> PathBuf {
    out.join("predictions").join(system).join(corpus).join(format!("run{run}.tsv"))
}

pub fn diagnostics_path(out: &Path, system: &str, corpus: &str, run: usize) -> PathBuf {
    out.join("predictions")
        .join(system)
        .join(corpus)
        .join(format!("run{run}.diagnostics.json"))
}

struct RunOutput<'a> {
    system: &'a str,
    gold: &'a Corpus,
    run: usize,
    metadata: Metadata,
    predictions: Vec<AlignedPrediction>,
    sentences: Vec<SentenceDiagnostics>,
    issues: Vec<String>,
}

fn write_run(out: &Path, r: RunOutput<'_>) -> Result<Vec<PathBuf>> {
    let mut metadata = r.metadata;
    metadata.push(("run".into(), r.run.to_string()));
    let mut totals = DiagnosticTotals::default();
    for s in &r.sentences {
        totals.missing_words += s.missing_words;
        totals.wrong_words += s.wrong_words;
        totals.random_outputs += s.random_outputs;
        totals.incorrect_lemmas += s.incorrect_lemmas;
        totals.failed_sentences += usize::from(s.failure.is_some());
    }
    let diagnostics = RunDiagnostics {
        metadata: metadata.iter().cloned().collect(),
        system: r.system.to_string(),
        corpus: r.gold.name.clone(),
        run: r.run,
        totals,
        sentences: r.sentences,
        issues: r.issues,
    };
    let pred_path = predictions_path(out, r.system, &r.gold.name, r.run);
    write_file(&pred_path, &write_predictions(&metadata, &r.predictions, r.gold))?;
    let diag_path = diagnostics_path(out, r.system, &r.gold.name, r.run);
    write_file(&diag_path, &(serde_json::to_string_pretty(&diagnostics)? + "\n"))?;
    Ok(vec![pred_path, diag_path])
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    /// Transport attempts made; zero for a pure replay.
    pub live_calls: usize,
    /// Sentences scored as all-missing because their request failed.
    pub failures: usize,
    pub files: Vec<PathBuf>,
}

/// Runs every system over the evaluation split, calling models over HTTP.
pub fn cmd_run(exp: &Experiment) -> Result<RunSummary> {
    let needs_http = exp.config.cache_mode != CacheMode::Replay
        && exp.config.systems.iter().any(|s| matches!(s, SystemConfig::Llm(_)));
    let transport: Arc<dyn ChatTransport> = if needs_http {
        Arc::new(HttpTransport::new()?)
    } else {
        Arc::new(NoNetwork)
    };
    cmd_run_with(exp, transport)
}

/// Transport for replay runs: any call is a bug in the cache lookup.
struct NoNetwork;

impl ChatTransport for NoNetwork {
    fn send(
        &self,
        _: &lemmata_core::ProviderConfig,
        _: &lemmata_core::gateway::ChatRequest<'_>,
    ) -> std::result::Result<String, lemmata_core::gateway::TransportError> {
        Err(lemmata_core::gateway::TransportError::Network(
            "network disabled in replay mode".into(),
        ))
    }
}

/// [`cmd_run`] with an explicit transport for LLM systems.
pub fn cmd_run_with(exp: &Experiment, transport: Arc<dyn ChatTransport>) -> Result<RunSummary> {
    let prepared = prepare_all(exp)?;
    let mut summary = RunSummary::default();
    for system in &exp.config.systems {
        match system {
            SystemConfig::Baseline(b) => {
                for p in &prepared {
                    run_baseline(exp, b, p, &mut summary)?;
                }
            }
            SystemConfig::Llm(llm) => {
                let cache = match exp.config.cache_mode {
                    CacheMode::Live => None,
                    _ => {
                        let dir = exp
                            .cache_dir()
                            .with_context(|| format!("{} mode needs cache_dir", exp.config.cache_mode))?;
                        Some(ResponseCache::open(dir)?)
                    }
                };
                let gateway = Gateway::new(llm.provider.clone(), exp.config.cache_mode, transport.clone(), cache)?;
                for p in &prepared {
                    run_llm(exp, llm, &gateway, p, &mut summary)?;
                }
                summary.live_calls += gateway.live_calls();
            }
            SystemConfig::External(ext) => {
                for p in prepared.iter().filter(|p| system.covers(&p.config.name)) {
                    run_external(exp, ext, p, &mut summary)?;
                }
            }
        }
    }
    Ok(summary)
}

fn system_metadata(exp: &Experiment, system: &SystemConfig, corpus: &str) -> Metadata {
    let mut m = base_metadata(exp);
    m.push(("system".into(), system.id().into()));
    m.push(("kind".into(), system.kind().into()));
    m.push(("corpus".into(), corpus.into()));
    m
}

fn run_baseline(exp: &Experiment, b: &BaselineSystem, p: &Prepared, summary: &mut RunSummary) -> Result<()> {
    let model = train_baseline(p, b)?;
    let gold = p.eval_corpus(exp.config.eval_split);
    let predictions: Vec<AlignedPrediction> = gold
        .sentences
        .iter()
        .map(|s| AlignedPrediction::from_lemmas(s.id.clone(), model.predict(s)))
        .collect();
    let sentences = gold
        .sentences
        .iter()
        .zip(&predictions)
        .map(|(s, pred)| sentence_diagnostics(s, pred, None, None))
        .collect();
    let mut metadata = system_metadata(exp, &SystemConfig::Baseline(b.clone()), &gold.name);
    metadata.push(("max_suffix_len".into(), b.max_suffix_len.to_string()));
    let files = write_run(
        &exp.output_dir(),
        RunOutput {
            system: &b.id,
            gold: &gold,
            run: 0,
            metadata,
            predictions,
            sentences,
            issues: Vec::new(),
        },
    )?;
    summary.files.extend(files);
    Ok(())
}

fn selection_for(prompt: &PromptConfig, corpus: &str) -> Result<Selection> {
    Ok(match prompt.selection {
        SelectionName::MostErrors => Selection::MostErrors,
        SelectionName::Random => Selection::Random {
            seed: prompt.seed.unwrap_or_default(),
        },
        SelectionName::Manual => Selection::Manual {
            ids: match prompt.manual_ids.get(corpus) {
                Some(ids) => ids.clone(),
                None if prompt.k == 0 => Vec::new(),
                None => bail!("manual selection has no ids for corpus {corpus}"),
            },
        },
    })
}

/// Resolves the prompt for one LLM system on one corpus and picks its examples.
pub fn build_prompts(exp: &Experiment, llm: &LlmSystem, p: &Prepared) -> Result<(PromptSpec, Vec<String>, Vec<String>)> {
    let pc = exp.prompt_for(llm);
    let name = &p.config.name;
    let spec = PromptSpec {
        template: pc.template,
        input_mode: pc.input_mode,
        k: pc.k,
        selection: selection_for(pc, name)?,
        language_name: p.config.language_name()?,
    };
    let diagnostics = match pc.diagnostics.get(name) {
        Some(path) if spec.k > 0 => Some(RunDiagnostics::load(&exp.resolve(path))?.error_map()),
        _ => None,
    };
    let examples = select_examples(&spec.selection, spec.k, p.split(pc.example_pool), diagnostics.as_ref())
        .with_context(|| format!("selecting examples for {} on {name}", llm.id))?;
    let gold = p.split(exp.config.eval_split);
    let prompts = gold
        .sentences
        .iter()
        .map(|s| render_prompt(&spec, &examples, s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let ids = examples.iter().map(|e| e.sentence.id.clone()).collect();
    Ok((spec, prompts, ids))
}

fn run_llm(exp: &Experiment, llm: &LlmSystem, gateway: &Gateway, p: &Prepared, summary: &mut RunSummary) -> Result<()> {
    let gold = p.eval_corpus(exp.config.eval_split);
    let (spec, prompts, example_ids) = build_prompts(exp, llm, p)?;
    let system = SystemConfig::Llm(llm.clone());
    let runs = system.runs(exp.config.runs);
    info!("{}: {} prompts x {runs} runs on {}", llm.id, prompts.len(), gold.name);

    let mut metadata = system_metadata(exp, &system, &gold.name);
    let pc = exp.prompt_for(llm);
    metadata.extend([
        ("model_id".into(), llm.provider.model_id.clone()),
        ("sampling".into(), serde_json::to_string(&llm.provider.sampling)?),
        ("template".into(), kebab(&spec.template)?),
        ("input_mode".into(), kebab(&spec.input_mode)?),
        ("k".into(), spec.k.to_string()),
        ("selection".into(), spec.selection.to_string()),
        ("example_pool".into(), pc.example_pool.to_string()),
        ("examples".into(), example_ids.join(",")),
    ]);

    let results = gateway.run_batch(&prompts, runs, llm.parallelism);
    for (run, responses) in results.into_iter().enumerate() {
        let mut predictions = Vec::with_capacity(gold.sentences.len());
        let mut sentences = Vec::with_capacity(gold.sentences.len());
        for (sentence, response) in gold.sentences.iter().zip(responses) {
            let (pred, fingerprint, failure) = match response {
                Ok(r) => (align(&parse_output(&r.raw_text), sentence), Some(r.request_fingerprint), None),
                Err(e) => {
                    warn!("{} run {run}: sentence {} failed: {e}", llm.id, sentence.id);
                    summary.failures += 1;
                    (AlignedPrediction::all_missing(sentence), None, Some(e.to_string()))
                }
            };
            sentences.push(sentence_diagnostics(sentence, &pred, fingerprint, failure));
            predictions.push(pred);
        }
        let files = write_run(
            &exp.output_dir(),
            RunOutput {
                system: &llm.id,
                gold: &gold,
                run,
                metadata: metadata.clone(),
                predictions,
                sentences,
                issues: Vec::new(),
            },
        )?;
        summary.files.extend(files);
    }
    Ok(())
}

fn describe_issue(issue: &PredictionIssue) -> String {
    match issue {
        PredictionIssue::MalformedLine { line, sentence } => {
            format!("line {line}: malformed row; sentence {sentence} scored as missing")
        }
        PredictionIssue::MissingSentence(id) => format!("no prediction for sentence {id}; scored as missing"),
        PredictionIssue::UnknownSentence(id) => format!("block {id} matches no gold sentence; ignored"),
    }
}

fn run_external(exp: &Experiment, ext: &ExternalSystem, p: &Prepared, summary: &mut RunSummary) -> Result<()> {
    let gold = p.eval_corpus(exp.config.eval_split);
    let path = exp.resolve(&ext.predictions[&p.config.name]);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let file = read_predictions(&text, &gold);
    let issues: Vec<String> = file.issues.iter().map(describe_issue).collect();
    for issue in &issues {
        warn!("{} on {}: {issue}", ext.id, gold.name);
    }
    let sentences = gold
        .sentences
        .iter()
        .zip(&file.predictions)
        .map(|(s, pred)| sentence_diagnostics(s, pred, None, None))
        .collect();
    let mut metadata = system_metadata(exp, &SystemConfig::External(ext.clone()), &gold.name);
    metadata.push(("source".into(), path.file_name().unwrap_or_default().to_string_lossy().into_owned()));
    let files = write_run(
        &exp.output_dir(),
        RunOutput {
            system: &ext.id,
            gold: &gold,
            run: 0,
            metadata,
            predictions: file.predictions,
            sentences,
            issues,
        },
    )?;
    summary.files.extend(files);
    Ok(())
}

// ---------------------------------------------------------------------------
// score / compare / report

/// Everything `score` computes, as written to `scores/scores.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub metadata: BTreeMap<String, String>,
    pub systems: Vec<String>,
    pub corpora: Vec<String>,
    pub reports: Vec<EvalReport>,
    pub comparisons: Vec<PairwiseComparison>,
}

impl ScoreSummary {
    pub fn load(exp: &Experiment) -> Result<Self> {
        let path = exp.output_dir().join("scores").join("scores.json");
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {} (run `lemmata score` first)", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn table(&self) -> String {
        render_table(&self.reports, &self.comparisons, &self.systems, &self.corpora)
    }
}

fn load_run(out: &Path, system: &str, gold: &Corpus, run: usize) -> Result<Vec<AlignedPrediction>> {
    let path = predictions_path(out, system, &gold.name, run);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut predictions = read_predictions(&text, gold).predictions;
    let diag = diagnostics_path(out, system, &gold.name, run);
    if diag.exists() {
        let diag = RunDiagnostics::load(&diag)?;
        let by_id: BTreeMap<&str, &SentenceDiagnostics> = diag.sentences.iter().map(|s| (s.id.as_str(), s)).collect();
        for p in &mut predictions {
            if let Some(s) = by_id.get(p.sentence_id.as_str()) {
                p.counts.missing_words = s.missing_words;
                p.counts.wrong_words = s.wrong_words;
                p.counts.random_outputs = s.random_outputs;
            }
        }
    }
    Ok(predictions)
}

/// Scores all prediction files and runs pairwise McNemar tests per corpus.
pub fn cmd_score(exp: &Experiment) -> Result<ScoreSummary> {
    let out = exp.output_dir();
    let c = &exp.config;
    let prepared = prepare_all(exp)?;

    let mut missing = Vec::new();
    for p in &prepared {
        for s in c.systems.iter().filter(|s| s.covers(&p.config.name)) {
            for run in 0..s.runs(c.runs) {
                let path = predictions_path(&out, s.id(), &p.config.name, run);
                if !path.exists() {
                    missing.push(format!("  {} (system {}, corpus {}, run {run})", path.display(), s.id(), p.config.name));
                }
            }
        }
    }
    if !missing.is_empty() {
        bail!("missing prediction files (run `lemmata run` first):\n{}", missing.join("\n"));
    }

    let mut reports = Vec::new();
    let mut comparisons = Vec::new();
    for p in &prepared {
        let gold = p.eval_corpus(c.eval_split);
        let mut loaded: Vec<(&str, Vec<Vec<AlignedPrediction>>)> = Vec::new();
        for s in c.systems.iter().filter(|s| s.covers(&p.config.name)) {
            let runs = (0..s.runs(c.runs))
                .map(|run| load_run(&out, s.id(), &gold, run))
                .collect::<Result<Vec<_>>>()?;
            reports.push(EvalReport::build(s.id(), &gold, &runs, c.scoring.missing_policy)?);
            loaded.push((s.id(), runs));
        }
        for i in 0..loaded.len() {
            for j in i + 1..loaded.len() {
                let (a, runs_a) = &loaded[i];
                let (b, runs_b) = &loaded[j];
                let ra = &runs_a[c.scoring.mcnemar_run.min(runs_a.len() - 1)];
                let rb = &runs_b[c.scoring.mcnemar_run.min(runs_b.len() - 1)];
                comparisons.push(compare_systems(&gold, (a, ra), (b, rb), c.scoring.alpha)?);
            }
        }
    }
    // System-major order, matching the configuration.
    let system_order: Vec<String> = c.systems.iter().map(|s| s.id().to_string()).collect();
    reports.sort_by_key(|r| system_order.iter().position(|s| *s == r.system_id));

    let summary = ScoreSummary {
        metadata: base_metadata(exp).into_iter().collect(),
        systems: system_order,
        corpora: c.corpora.iter().map(|cc| cc.name.clone()).collect(),
        reports,
        comparisons,
    };
    write_scores(exp, &summary)?;
    Ok(summary)
}

pub const REPORT_HEADER: &str = "# lemmata report v1";
pub const MCNEMAR_HEADER: &str = "# lemmata mcnemar v1";

fn write_scores(exp: &Experiment, summary: &ScoreSummary) -> Result<()> {
    let dir = exp.output_dir().join("scores");
    let metadata = base_metadata(exp);
    write_file(&dir.join("scores.json"), &(serde_json::to_string_pretty(summary)? + "\n"))?;

    let mut report = format!("{REPORT_HEADER}\n{}", metadata_lines(&metadata));
    report.push_str(
        "system\tcorpus\truns\twacc_mean\twacc_std\tsentacc_mean\tsentacc_std\tmissing\twrong\trandom\twacc_runs\tsentacc_runs\n",
    );
    for r in &summary.reports {
        let join = |f: fn(&lemmata_core::eval::RunScore) -> f64| {
            r.per_run.iter().map(|s| format!("{:.6}", f(s))).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(
            report,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}",
            r.system_id,
            r.corpus_name,
            r.per_run.len(),
            r.word_accuracy.mean,
            r.word_accuracy.std,
            r.sentence_accuracy.mean,
            r.sentence_accuracy.std,
            r.diagnostics.missing_words,
            r.diagnostics.wrong_words,
            r.diagnostics.random_outputs,
            join(|s| s.word_accuracy),
            join(|s| s.sentence_accuracy),
        );
    }
    write_file(&dir.join("report.tsv"), &report)?;

    let mut mc = format!("{MCNEMAR_HEADER}\n{}", metadata_lines(&metadata));
    mc.push_str("corpus\tsystem_a\tsystem_b\tlevel\tb01\tb10\tmethod\tstatistic\tp_value\tsignificant\n");
    for cmp in &summary.comparisons {
        for (level, r) in [("tokens", &cmp.tokens), ("sentences", &cmp.sentences)] {
            let _ = writeln!(
                mc,
                "{}\t{}\t{}\t{level}\t{}\t{}\t{:?}\t{:.6}\t{:.6e}\t{}",
                cmp.corpus, cmp.system_a, cmp.system_b, r.b01, r.b10, r.method, r.statistic, r.p_value, r.significant
            );
        }
    }
    write_file(&dir.join("mcnemar.tsv"), &mc)?;
    write_file(&dir.join("table.txt"), &summary.table())?;
    Ok(())
}

/// Pairwise results between two systems, on one corpus or all.
pub fn cmd_compare(exp: &Experiment, a: &str, b: &str, corpus: Option<&str>) -> Result<Vec<PairwiseComparison>> {
    for id in [a, b] {
        if exp.system(id).is_none() {
            bail!("unknown system '{id}'");
        }
    }
    let summary = ScoreSummary::load(exp)?;
    let found: Vec<PairwiseComparison> = summary
        .comparisons
        .into_iter()
        .filter(|c| (c.system_a == a && c.system_b == b) || (c.system_a == b && c.system_b == a))
        .filter(|c| corpus.is_none_or(|name| c.corpus == name))
        .collect();
    if found.is_empty() {
        bail!("no comparison between {a} and {b} in the scores");
    }
    Ok(found)
}

/// Renders the results table from `scores/scores.json`.
pub fn cmd_report(exp: &Experiment) -> Result<String> {
    let table = ScoreSummary::load(exp)?.table();
    write_file(&exp.output_dir().join("scores").join("table.txt"), &table)?;
    Ok(table)
}
