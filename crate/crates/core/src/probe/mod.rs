//! Render-free probes: per-block MLPs that regress splat parameters from
//! local point-cloud geometry, used to compare learnability across density
//! terciles.

pub mod features;
pub mod mlp;
pub mod report;
pub mod synthetic;
pub mod train;

pub use features::{extract_features, FeatureExtractor, FeatureVec, DEFAULT_FEATURE_K, FEATURE_DIM};
pub use mlp::{mlp_grad_check, Adam, Mlp, DIMS};
pub use report::{block_results_csv, tercile_report, TercileReport, TercileRow};
pub use synthetic::{synthetic_stratified_scene, SyntheticConfig, SyntheticScene};
pub use train::{
    build_block_data, improvement_pct, target_of, train_block, train_probe, train_probe_models, BlockData, BlockResult, ProbeConfig, ProbeModel,
    ProbeRun, SkippedBlock, Standardizer, TARGET_DIM,
};
