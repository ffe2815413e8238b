//! Empirical p-values and family-wise error control for patterns reported by
//! arbitrary data mining algorithms.
//!
//! The mining algorithm is treated as a black box: it is run on the original
//! data and on `n` datasets drawn from a null model, and each pattern's test
//! statistic is compared against everything the algorithm produced on the
//! null datasets.

pub mod dataset;
pub mod error;
pub mod mining;
pub mod minp;
pub mod randomize;
pub mod rng;
pub mod significance;
pub mod stats;
pub mod synthetic;

pub use dataset::{
    load_graphs, load_transactions, AssociationRule, BinaryDataset, Graph, GraphTransactionSet,
    Itemset, TransactionFormat,
};
pub use error::{Error, Result};
pub use mining::{run_miner, MinerKind, MinerSpec, Pattern, PatternOutput, ScoredPattern};
pub use minp::{minp_check, minp_test, MinPCurve, MinPResult};
pub use randomize::{sample_ensemble, sample_graph_ensemble, RandomizerKind, RandomizerSpec};
pub use significance::{
    adjust_bonferroni, adjust_holm, significant, NullEnsemble, PValueMethod, SignificanceReport,
};
pub use stats::StatisticKind;
