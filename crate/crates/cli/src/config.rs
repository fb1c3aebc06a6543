//! Experiment configuration, read from TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lemmata_core::corpus::SelectionRule;
use lemmata_core::prompt::MAX_SHOTS;
use lemmata_core::{CacheMode, InputMode, MissingPolicy, ProviderConfig, Template};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Response cache directory; required unless `cache_mode` is `live`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache_mode: CacheMode,
    /// Default number of runs per LLM system.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Which split is lemmatized and scored.
    #[serde(default = "default_eval_split")]
    pub eval_split: SplitName,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub prompt: PromptConfig,
    pub corpora: Vec<CorpusConfig>,
    pub systems: Vec<SystemConfig>,
}

fn default_runs() -> usize {
    3
}

fn default_eval_split() -> SplitName {
    SplitName::Test
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringConfig {
    #[serde(default = "default_policy")]
    pub missing_policy: MissingPolicy,
    /// Run whose predictions feed McNemar's test.
    #[serde(default)]
    pub mcnemar_run: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_policy() -> MissingPolicy {
    MissingPolicy::Strict
}

fn default_alpha() -> f64 {
    lemmata_core::eval::DEFAULT_ALPHA
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            missing_policy: default_policy(),
            mcnemar_run: 0,
            alpha: default_alpha(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    #[default]
    Conllu,
    Tsv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    #[default]
    FirstN,
    SeededRandom,
}

fn to_rule(rule: RuleName, seed: Option<u64>, what: &str) -> Result<SelectionRule> {
    match (rule, seed) {
        (RuleName::FirstN, _) => Ok(SelectionRule::FirstN),
        (RuleName::SeededRandom, Some(seed)) => Ok(SelectionRule::SeededRandom { seed }),
        (RuleName::SeededRandom, None) => bail!("{what}: seeded-random needs a seed"),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    #[serde(default)]
    pub rule: RuleName,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub format: CorpusFormat,
    /// ISO 639-1 code.
    pub language: String,
    /// English name used in prompts; derived from `language` when omitted.
    #[serde(default)]
    pub language_name: Option<String>,
    /// Cap on the number of sentences kept after ingestion.
    #[serde(default)]
    pub reduce_to: Option<usize>,
    #[serde(default)]
    pub reduction_rule: RuleName,
    #[serde(default)]
    pub reduction_seed: Option<u64>,
    /// Without a split the whole corpus is the test set.
    #[serde(default)]
    pub split: Option<SplitConfig>,
}

impl CorpusConfig {
    pub fn reduction(&self) -> Result<SelectionRule> {
        to_rule(self.reduction_rule, self.reduction_seed, &self.name)
    }

    pub fn split_rule(&self) -> Result<SelectionRule> {
        match &self.split {
            Some(s) => to_rule(s.rule, s.seed, &self.name),
            None => Ok(SelectionRule::FirstN),
        }
    }

    pub fn language_name(&self) -> Result<String> {
        if let Some(name) = &self.language_name {
            return Ok(name.clone());
        }
        lemmata_core::prompt::language_name(&self.language)
            .map(str::to_string)
            .with_context(|| format!("corpus {}: set language_name for '{}'", self.name, self.language))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionName {
    Manual,
    Random,
    #[default]
    MostErrors,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    #[serde(default)]
    pub template: Template,
    #[serde(default)]
    pub input_mode: InputMode,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub selection: SelectionName,
    /// Seed for `random` selection.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Split the few-shot examples are drawn from.
    #[serde(default = "default_pool")]
    pub example_pool: SplitName,
    /// Per corpus: diagnostics sidecar of an earlier run over the example pool.
    #[serde(default)]
    pub diagnostics: BTreeMap<String, PathBuf>,
    /// Per corpus: sentence ids for `manual` selection.
    #[serde(default)]
    pub manual_ids: BTreeMap<String, Vec<String>>,
}

fn default_k() -> usize {
    4
}

fn default_pool() -> SplitName {
    SplitName::Dev
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            template: Template::Basic,
            input_mode: InputMode::WordList,
            k: default_k(),
            selection: SelectionName::MostErrors,
            seed: None,
            example_pool: default_pool(),
            diagnostics: BTreeMap::new(),
            manual_ids: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemConfig {
    /// Frequency baseline trained on the train split.
    Baseline(BaselineSystem),
    /// Chat model behind an OpenAI-compatible endpoint.
    Llm(LlmSystem),
    /// Predictions produced elsewhere, one file per corpus.
    External(ExternalSystem),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSystem {
    pub id: String,
    #[serde(default = "default_suffix_len")]
    pub max_suffix_len: usize,
}

fn default_suffix_len() -> usize {
    lemmata_core::baseline::DEFAULT_MAX_SUFFIX_LEN
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSystem {
    pub id: String,
    pub provider: ProviderConfig,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Overrides the experiment-wide run count.
    #[serde(default)]
    pub runs: Option<usize>,
    /// Overrides the experiment-wide prompt settings.
    #[serde(default)]
    pub prompt: Option<PromptConfig>,
}

fn default_parallelism() -> usize {
    4
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSystem {
    pub id: String,
    /// Corpus name to prediction file.
    pub predictions: BTreeMap<String, PathBuf>,
}

impl SystemConfig {
    pub fn id(&self) -> &str {
        match self {
            SystemConfig::Baseline(s) => &s.id,
            SystemConfig::Llm(s) => &s.id,
            SystemConfig::External(s) => &s.id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SystemConfig::Baseline(_) => "baseline",
            SystemConfig::Llm(_) => "llm",
            SystemConfig::External(_) => "external",
        }
    }

    pub fn runs(&self, default: usize) -> usize {
        match self {
            SystemConfig::Llm(s) => s.runs.unwrap_or(default),
            _ => 1,
        }
    }

    pub fn covers(&self, corpus: &str) -> bool {
        match self {
            SystemConfig::External(s) => s.predictions.contains_key(corpus),
            _ => true,
        }
    }
}

/// A loaded configuration plus where it came from.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Relative paths in the config resolve against this directory.
    pub base_dir: PathBuf,
    /// Hex SHA-256 of the config file text.
    pub config_hash: String,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base_dir).with_context(|| format!("loading {}", path.display()))
    }

    pub fn from_toml(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        validate(&config)?;
        Ok(Experiment {
            config,
            base_dir,
            config_hash: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.config.cache_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn corpus(&self, name: &str) -> Option<&CorpusConfig> {
        self.config.corpora.iter().find(|c| c.name == name)
    }

    pub fn system(&self, id: &str) -> Option<&SystemConfig> {
        self.config.systems.iter().find(|s| s.id() == id)
    }

    /// Prompt settings for an LLM system, falling back to the experiment default.
    pub fn prompt_for<'a>(&'a self, system: &'a LlmSystem) -> &'a PromptConfig {
        system.prompt.as_ref().unwrap_or(&self.config.prompt)
    }
}

fn check_name(kind: &str, name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !name.starts_with('.');
    if !ok {
        bail!("{kind} name '{name}' must be non-empty ASCII letters, digits, '_', '-' or '.'");
    }
    Ok(())
}

fn check_prompt(prompt: &PromptConfig, owner: &str) -> Result<()> {
    if prompt.k > MAX_SHOTS {
        bail!("{owner}: k = {} exceeds the maximum of {MAX_SHOTS}", prompt.k);
    }
    if prompt.selection == SelectionName::Random && prompt.seed.is_none() && prompt.k > 0 {
        bail!("{owner}: random selection needs a seed");
    }
    Ok(())
}

pub fn validate(config: &ExperimentConfig) -> Result<()> {
    if config.corpora.is_empty() {
        bail!("no corpora configured");
    }
    if config.systems.is_empty() {
        bail!("no systems configured");
    }
    if config.runs == 0 {
        bail!("runs must be at least 1");
    }
    if !(config.scoring.alpha > 0.0 && config.scoring.alpha < 1.0) {
        bail!("alpha must lie in (0, 1)");
    }
    let mut names = BTreeSet::new();
    for c in &config.corpora {
        check_name("corpus", &c.name)?;
        if !names.insert(c.name.as_str()) {
            bail!("corpus '{}' configured twice", c.name);
        }
        c.reduction()?;
        c.split_rule()?;
        if c.split.is_none() && config.eval_split != SplitName::Test {
            bail!("corpus '{}' has no split but eval_split is {}", c.name, config.eval_split);
        }
    }
    check_prompt(&config.prompt, "prompt")?;
    let mut ids = BTreeSet::new();
    for s in &config.systems {
        check_name("system", s.id())?;
        if !ids.insert(s.id()) {
            bail!("system '{}' configured twice", s.id());
        }
        match s {
            SystemConfig::Llm(llm) => {
                if llm.runs == Some(0) {
                    bail!("system '{}': runs must be at least 1", llm.id);
                }
                if let Some(p) = &llm.prompt {
                    check_prompt(p, &llm.id)?;
                }
            }
            SystemConfig::External(ext) => {
                for corpus in ext.predictions.keys() {
                    if !names.contains(corpus.as_str()) {
                        bail!("system '{}': unknown corpus '{corpus}'", ext.id);
                    }
                }
            }
            SystemConfig::Baseline(b) => {
                if b.max_suffix_len == 0 {
                    bail!("system '{}': max_suffix_len must be at least 1", b.id);
                }
            }
        }
    }
    Ok(())
}
