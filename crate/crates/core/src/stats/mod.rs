//! Distributional characterization of splat parameters: 1D Gaussian
//! mixtures, BIC order selection, bimodality scoring and reports.

pub mod gmm;
pub mod report;

pub use gmm::{ashman_d, fit_gmm_1d, select_k_bic, verdict, BicSelection, GmmFit, OrderFit, Verdict};
pub use report::{
    log_eigenvalues, mean_radiance, radiance_report, sample_report, scale_spectrum_report, DistributionReport, ReportKind,
    StatsOptions,
};
