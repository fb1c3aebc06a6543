//! Contextual lemmatization toolkit.
//!
//! The crate covers the full experiment loop:
//!
//! * [`corpus`]: CoNLL-U / two-column TSV ingestion, statistics and splits.
//! * [`editscript`]: minimal prefix/suffix/case edit scripts and label inventories.
//! * [`baseline`]: a frequency-based supervised lemmatizer over edit-script labels.
//! * [`prompt`]: prompt templates, input modes and few-shot example selection.
//! * [`gateway`]: chat-completion client with a record/replay response cache.
//! * [`align`]: parsing and aligning free-form model output against input tokens.
//! * [`eval`]: word/sentence accuracy, run aggregation and McNemar's test.

pub mod align;
pub mod baseline;
pub mod corpus;
pub mod editscript;
pub mod eval;
pub mod gateway;
pub mod prompt;

pub use align::{align, parse_output, AlignedPrediction, AlignmentCounts, OutputLine, ParsedOutput};
pub use baseline::BaselineModel;
pub use corpus::{Corpus, CorpusStats, SelectionRule, Sentence, SplitSpec, Token};
pub use editscript::{induce, CaseFlag, EditOp, EditScript, LabelInventory};
pub use eval::{EvalReport, McNemarResult, MissingPolicy, RunStats};
pub use gateway::{CacheMode, Gateway, LlmResponse, ProviderConfig};
pub use prompt::{FewShotExample, InputMode, PromptSpec, Selection, Template};
