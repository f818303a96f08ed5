//! Question-driven text fact transfer.
//!
//! A source document about one topic is rewritten for another topic by
//! generating questions about the source's facts, transferring them to the
//! target topic, answering them over a retrieved factual corpus, and
//! splicing the answers back into the source text.
//!
//! The retrieval index and metrics are generic over the scalar type; the
//! aliases below fix the types the CLI uses.

pub mod backends;
pub mod config;
pub mod error;
pub mod infill;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod questions;
pub mod retrieval;
pub mod saqa;
pub mod scalar;
pub mod seed;
pub mod text;
pub mod types;

pub use backends::Backends;
pub use config::{BackendConfig, BackendKind, RunConfig};
pub use error::{Error, Result};
pub use infill::{apply_infill, plan_infill, InfillPlan, Replacement, ReplacementOrigin};
pub use pipeline::{run_batch, run_transfer, BatchOptions, BatchResult, PipelineTrace};
pub use questions::{make_generic, transfer_specific, QuestionEntityPair, QuestionKind, TransferredQuestion};
pub use retrieval::{build_index, retrieve, RetrievedContext, VectorIndex};
pub use saqa::{fold_entity_map, AnswerCandidate, EntityMap};
pub use scalar::Scalar;
pub use types::{Corpus, CorpusSet, Fact, PipelineConfig, TransferTask};

/// Index element type used by the CLI and on disk.
pub type Index = VectorIndex<f32>;
/// Metric precision used for reports.
pub type Report = metrics::MetricsReport<f64>;
pub type Metrics = metrics::ExampleMetrics<f64>;
