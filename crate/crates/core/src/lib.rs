//! Retrieval augmented decision-making: turn a document corpus and a
//! decision description into a weighted criteria hierarchy, then score and
//! rank options against it with a traceable report.
//!
//! Modules, in pipeline order: [`corpus`] segmentation, [`index`]
//! retrieval, [`criteria`] extraction and relations, [`mcdm`] ISM levels
//! and AHP weights, [`panel`] expert ranking, [`decision`] scoring and
//! reporting. [`gateway`] wraps every language-model call.

pub mod config;
pub mod corpus;
pub mod criteria;
pub mod decision;
pub mod gateway;
pub mod index;
pub mod mcdm;
pub mod panel;
pub mod pipeline;
pub mod store;
pub mod text;

mod limit;

pub use config::{BackendKind, Config, ConfigError};
pub use corpus::{Chunk, DirectoryTree, Document, Span};
pub use criteria::{Criterion, RelationMatrix};
pub use decision::{
    Alternative, DecisionReport, DecisionRequest, HierarchicalModel, RankedOption, ScoreMatrix,
    TraceRow,
};
pub use gateway::{Gateway, GatewayError, TaskKind};
pub use index::{EmbeddingProvider, MockEmbedder, RetrievalResult, VectorIndex};
pub use mcdm::{ConsistencyReport, LevelPartition, PairwiseMatrix, ReachabilityMatrix, WeightVector};
pub use panel::{ExpertRanking, ExpertRole, PanelTranscript};
pub use pipeline::PipelineError;
pub use store::ChunkStore;
