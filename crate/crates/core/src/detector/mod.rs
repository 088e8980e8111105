//! Decision rule, detection metrics and the likelihood oracle.

pub mod kde;
pub mod metrics;
pub mod scoring;
pub mod stats;
pub mod theorem1;

pub use kde::{glrt_oracle_fit, DensityModel};
pub use metrics::{
    auc_exact, classify, default_report, fa_md_curves, roc_points, threshold_grid, DetectionReport, Hypothesis,
    ScoreSet, Source, DEFAULT_GRID_POINTS, DEFAULT_TARGET_RATE,
};
pub use scoring::{bitmap_input, cae_errors, score_cae, score_cnn, CaeCalibration, CAE_HEADROOM};
pub use stats::{average_ranks, spearman};
pub use theorem1::{theorem1_check, Scorer, Theorem1Report, Toy};
