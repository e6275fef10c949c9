//! Analysis toolkit for converged Gaussian-splat scenes.
//!
//! * [`stats`]: mixture-model characterization of scale spectra and radiance.
//! * [`density`]: kNN density, grid block partitioning and tercile stratification.
//! * [`probe`]: render-free MLP probes trained per density block.
//! * [`sim`]: the single-Gaussian visibility-coupled model, its gradient
//!   variance decomposition, and coupled vs decoupled optimization.

pub mod error;
pub mod ingest;
pub mod density;
pub mod linalg;
pub mod numeric;
pub mod probe;
pub mod seed;
pub mod sim;
pub mod splat;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{eigvals_sym3, Quat, SymMat3, Vec3};
pub use splat::{covariance_of, radiance_dc, GaussianPrimitive, PointCloud, SH_C0};
