//! Staged benchmark: accuracy and wall-clock per algorithm, elimination
//! gates, efficiency ratios and CSV reports.

pub mod env;
pub mod metrics;
pub mod report;
pub mod stages;

pub use env::{cpu_info, environment_note, CpuInfo};
pub use metrics::{compute_accuracy, confusion_matrix, ConfusionMatrix};
pub use report::{
    apply_elimination, efficiency_ratio, emit_report, load_report, summarize, summary_path, BenchRecord,
    Elimination, EliminationGate, REPORT_COLUMNS,
};
pub use stages::{
    default_roster, mnist_split, run_stage, run_stage1, run_stage2_mnist, run_stage4, DataSource, StageOutcome,
    StagePlan, StageReport,
};
