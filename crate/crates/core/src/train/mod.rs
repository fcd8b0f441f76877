//! Loss, optimisation, evaluation and the experiment harness.

pub mod ablation;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod trainer;

pub use ablation::{ablation_sets, repeated_runs, run_ablation, run_fusion_bench, AblationRow, FusionRow, Splits, Summary};
pub use loss::{three_term_loss, total_loss};
pub use metrics::{ClassMetrics, ConfusionMatrix, EvalReport, PredictionRecord};
pub use optim::Adam;
pub use trainer::{evaluate, train, write_history_csv, write_json, EpochRecord, TrainOutcome};
