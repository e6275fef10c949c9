//! How the ξ_Σ/ξ_S covariance tracks `‖∂T/∂Σ‖²·Var(L_app)` across ray
//! counts and noise levels.

use rayon::prelude::*;
use serde::Serialize;

use super::model::SimState;
use super::scene::{build_scene, SceneConfig};
use super::variance::{estimate_variance, VarianceOptions, VarianceReport};
use crate::error::{Error, Result};
use crate::numeric::{linear_fit, median, pearson};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingConfig {
    pub r_grid: Vec<usize>,
    pub sigma_grid: Vec<f64>,
    /// Independent scenes per configuration; medians are reported.
    pub seeds: usize,
    pub variance: VarianceOptions,
    pub scene: SceneConfig,
    /// Appearance at which variance is probed (geometry sits at Σ_pc).
    pub s_probe: f64,
    pub omega: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            r_grid: vec![8, 16, 32, 64, 128, 256, 512],
            sigma_grid: vec![0.01, 0.05, 0.1],
            seeds: 20,
            variance: VarianceOptions::default(),
            scene: SceneConfig::default(),
            s_probe: 0.5,
            omega: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub rays: usize,
    pub sigma_obs: f64,
    pub cov_abs_median: f64,
    pub predictor_median: f64,
    /// Median of `2·cov / v_total`.
    pub cov_share_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Pearson r of ln|cov| against ln(predictor); `None` when inconclusive.
    pub pearson_r: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub inconclusive: bool,
    pub seeds: usize,
}

/// Variance report at the probe state for one scene.
pub fn probe_variance(scene_cfg: &SceneConfig, cfg: &ScalingConfig, scene_seed: u64, draw_seed: u64) -> Result<VarianceReport> {
    let scene = build_scene(scene_cfg, scene_seed)?;
    let state = SimState::from_sigma(&scene.sigma_pc, cfg.s_probe, cfg.omega)?;
    estimate_variance(&state, &scene, &cfg.variance, &mut rng_for(draw_seed, 1))
}

pub fn covariance_scaling_experiment(cfg: &ScalingConfig, seed: u64) -> Result<ScalingReport> {
    let configs: Vec<(usize, f64)> = cfg
        .r_grid
        .iter()
        .flat_map(|&r| cfg.sigma_grid.iter().map(move |&s| (r, s)))
        .collect();
    if configs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a correlation needs at least 3 configurations, got {}",
            configs.len()
        )));
    }
    if cfg.seeds == 0 {
        return Err(Error::InvalidArgument("seeds must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..cfg.seeds).map(move |s| (c, s)))
        .collect();
    let reports: Vec<VarianceReport> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let (rays, sigma_obs) = configs[c];
            let scene_cfg = SceneConfig {
                rays,
                sigma_obs,
                ..cfg.scene.clone()
            };
            // Scenes depend on the seed index only, so every configuration
            // sees the same ray geometry family.
            probe_variance(&scene_cfg, cfg, derive_seed(seed, s as u64), derive_seed(seed, (1 << 32) + (c * cfg.seeds + s) as u64))
        })
        .collect::<Result<_>>()?;

    let points: Vec<ScalingPoint> = configs
        .iter()
        .enumerate()
        .map(|(c, &(rays, sigma_obs))| {
            let rs = &reports[c * cfg.seeds..(c + 1) * cfg.seeds];
            let covs: Vec<f64> = rs.iter().map(|r| r.cov.abs()).collect();
            let preds: Vec<f64> = rs.iter().map(|r| r.sensitivity * r.app_var).collect();
            let shares: Vec<f64> = rs
                .iter()
                .map(|r| if r.v_total > 0.0 { 2.0 * r.cov / r.v_total } else { 0.0 })
                .collect();
            ScalingPoint {
                rays,
                sigma_obs,
                cov_abs_median: median(&covs).expect("seeds ≥ 1"),
                predictor_median: median(&preds).expect("seeds ≥ 1"),
                cov_share_median: median(&shares).expect("seeds ≥ 1"),
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.cov_abs_median > 0.0 && p.predictor_median > 0.0)
        .map(|p| (p.predictor_median.ln(), p.cov_abs_median.ln()))
        .unzip();
    let r = if xs.len() >= 3 { pearson(&xs, &ys) } else { None };
    let fit = if r.is_some() { linear_fit(&xs, &ys) } else { None };
    Ok(ScalingReport {
        points,
        pearson_r: r,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        inconclusive: r.is_none(),
        seeds: cfg.seeds,
    })
}
