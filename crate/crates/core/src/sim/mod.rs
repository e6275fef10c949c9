//! Single-Gaussian simulator of visibility-coupled gradients.
//!
//! One Gaussian at the origin is observed along `R` rays. Appearance error
//! `(I − t·S)²` depends on Σ only through the visibility `t`, so minibatch
//! gradients of Σ and S share noise. The submodules estimate that shared
//! variance, test how it scales, compare coupled and decoupled optimizers,
//! and simulate multiplicative scale dynamics.

pub mod dynamics;
pub mod model;
pub mod optimize;
pub mod scaling;
pub mod scene;
pub mod variance;

pub use dynamics::{scale_dynamics_sim, DynamicsConfig};
pub use model::{
    clean_app_error, full_losses, grad_analytic, grad_check, losses, ray_visibility, visibility_sensitivity,
    GradientSample, Losses, SimState,
};
pub use optimize::{optimize, trace_csv, OptimizeConfig, Scheme, TraceRow, TrainingTrace, TRACE_CSV_HEADER};
pub use scaling::{covariance_scaling_experiment, probe_variance, ScalingConfig, ScalingPoint, ScalingReport};
pub use scene::{build_scene, Ray, SceneConfig, SimScene};
pub use variance::{estimate_variance, Batch, Sampling, VarianceOptions, VarianceReport, DEFAULT_RAY_POOL};
