//! Ground-truth functional similarity for code pairs via differential fuzzing,
//! generation of surface/semantics-divergent variants, and statistical audits of
//! code evaluation metrics for surface bias.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`model`]: records, datasets and their JSONL persistence.
//! - [`surface`]: edit, AST and combined surface similarity.
//! - [`mutation`]: first-order source mutants of a reference implementation.
//! - [`optimizer`]: optimized variants from a language-model service or a fixture.
//! - [`fuzz`]: byte-buffer generation and the reference input-provider semantics.
//! - [`harness`]: the runner protocol and per-pair differential scoring.
//! - [`audit`]: MAE, Spearman, distinguishability and cross-pairing.
//! - [`regions`]: SFD/DFS/Control classification and threshold search.
//! - [`toy`]: a tiny deterministic subject language used to exercise the harness.

pub mod audit;
pub mod fuzz;
pub mod harness;
pub mod model;
pub mod mutation;
pub mod optimizer;
pub mod regions;
pub mod surface;
pub mod toy;

pub use model::{CodePairRecord, Dataset, DatasetHeader, Level, RegionThresholds, TaskSpec, VariantRecord};

/// Version string stamped into dataset headers.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
