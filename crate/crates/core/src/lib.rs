//! Question answering over RDF knowledge graphs by skeleton generation and
//! guided placeholder resolution, plus training-data synthesis and
//! benchmark evaluation.

pub mod config;
pub mod eval;
pub mod generator;
pub mod index;
pub mod kgclient;
pub mod lm;
pub mod pipeline;
pub mod ranker;
pub mod resolver;
pub mod skeleton;
pub mod synth;

pub use config::Config;
pub use pipeline::{Answer, AskOptions, Pipeline, PipelineError};
pub use resolver::{ResolutionOutcome, Status, TraceEvent};
pub use skeleton::{canonicalize, parse_skeleton, Skeleton};
