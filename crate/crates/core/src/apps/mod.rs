//! Data generation, benchmarks, the classifier and result files behind the
//! command-line tool.

pub mod bench;
pub mod classify;
pub mod data;
pub mod emit;

pub use bench::{
    attention_benchmark, fairness_divisor, pair_sweep, variance_benchmark, AttentionBenchResult, BenchEntry,
    BenchResult, PairSweep,
};
pub use classify::{classify, default_sigma_grid, predict_exact, predict_rf, ClassifyConfig, ClassifyReport};
pub use data::{generate_blobs, generate_regime, stack_sets, write_labeled_csv, LabeledDataset, Regime, RegimeKind};
pub use emit::{emit_results, format_float, to_csv_bytes, to_json_bytes, OutputFormat, Tabular};
