//! Discrete entropic optimal transport with top-k barycentric projection
//! over frame-embedding sequences, plus EER and Fréchet distance metrics.
//!
//! Pipeline: [`embedio`] loads EMB1 files and assembles target pools,
//! [`otcore`] builds the cosine cost and solves the entropic plan,
//! [`transport`] maps each source frame to a weighted average of its
//! heaviest targets, and [`metrics`] scores the result.

pub mod cli;
pub mod embedio;
pub mod error;
pub mod metrics;
pub mod otcore;
pub mod synth;
pub mod transport;

pub use embedio::{
    build_pool, read_embeddings, read_scores, write_embeddings, EmbeddingSequence, Label,
    PoolOrder, ScoreSet, TargetPool,
};
pub use error::{Error, FormatError, OtError};
pub use metrics::{
    compute_eer, frechet_distance, gaussian_stats, mean_pairwise_cost, Eer, GaussianStats,
    PairingMode,
};
pub use otcore::{
    cosine_cost, sinkhorn, transport_cost, CostMatrix, CouplingPlan, SinkhornConfig,
    SinkhornDiagnostics,
};
pub use transport::{
    align, project_full, project_topk, ProjectionConfig, ProjectionMode, TransportResult,
};
