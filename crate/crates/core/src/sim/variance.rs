//! Monte Carlo decomposition of minibatch gradient variance.

use rand::Rng;
use serde::Serialize;

use super::model::{app_grad, geo_terms, ray_terms, visibility_sensitivity, Frame, GeoOptions, SimState};
use super::scene::SimScene;
use crate::error::{Error, Result};
use crate::seed::SimRng;

/// Default candidate pool size for pooled minibatches.
pub const DEFAULT_RAY_POOL: usize = 512;

/// How minibatch slots pick rays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Each slot draws uniformly from a pool of `max(size, R)` candidate rays
    /// of which only the scene's `R` rays exist; a hit is weighted by
    /// `pool/R` and a miss contributes nothing. The estimate of the mean
    /// per-ray loss stays unbiased while its spread grows as rays thin out.
    Pool { size: usize },
    /// Slots draw uniformly from the `R` rays with replacement.
    WithReplacement,
    /// Every ray once with unit weight; no sampling variation.
    FullBatch,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Pool {
            size: DEFAULT_RAY_POOL,
        }
    }
}

/// A drawn minibatch: `(ray, weight)` hits over `slots` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub hits: Vec<(usize, f64)>,
    pub slots: usize,
}

impl Batch {
    pub fn draw(sampling: Sampling, rays: usize, size: usize, rng: &mut SimRng) -> Self {
        match sampling {
            Sampling::FullBatch => Self {
                hits: (0..rays).map(|r| (r, 1.0)).collect(),
                slots: rays,
            },
            Sampling::WithReplacement => Self {
                hits: (0..size).map(|_| (rng.random_range(0..rays), 1.0)).collect(),
                slots: size,
            },
            Sampling::Pool { size: pool } => {
                let pool = pool.max(rays);
                let w = pool as f64 / rays as f64;
                let hits = (0..size)
                    .filter_map(|_| {
                        let j = rng.random_range(0..pool);
                        (j < rays).then_some((j, w))
                    })
                    .collect();
                Self { hits, slots: size }
            }
        }
    }

    pub fn ray_ids(&self) -> Vec<usize> {
        self.hits.iter().map(|h| h.0).collect()
    }
}

/// Gradient and appearance loss estimates for one weighted minibatch.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BatchEstimate {
    pub xi_sigma: [f64; 6],
    pub xi_s: f64,
    pub app: f64,
}

/// `app_weight` scales the appearance part of ξ_Σ; `reg` adds the spectrum
/// regularizer to the geometric part.
pub(crate) fn batch_estimate(
    state: &SimState,
    frame: &Frame,
    scene: &SimScene,
    batch: &Batch,
    app_weight: f64,
    reg: f64,
) -> BatchEstimate {
    let (_, g_geo) = geo_terms(frame, &scene.sigma_pc, GeoOptions { reg });
    let mut xi_sigma = frame.theta_grad(&g_geo);
    let mut xi_s = 0.0;
    let mut app = 0.0;
    let inv = 1.0 / batch.slots as f64;
    for &(r, w) in &batch.hits {
        let terms = ray_terms(frame, scene, r, state.s);
        let (gt, gs) = app_grad(frame, &terms, state);
        for i in 0..6 {
            xi_sigma[i] += app_weight * w * inv * gt[i];
        }
        xi_s += w * inv * gs;
        app += w * inv * terms.e * terms.e;
    }
    BatchEstimate { xi_sigma, xi_s, app }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceOptions {
    pub draws: usize,
    pub batch: usize,
    pub sampling: Sampling,
}

impl Default for VarianceOptions {
    fn default() -> Self {
        Self {
            draws: 1000,
            batch: 4,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    /// Trace of the covariance of ξ_Σ.
    pub var_sigma: f64,
    pub var_s: f64,
    /// `Σᵢ Cov(ξ_Σ[i], ξ_S)`.
    pub cov: f64,
    /// `var_sigma + var_s + 2·cov`.
    pub v_total: f64,
    /// `‖mean_r ∂t_r/∂Σ‖_F²`.
    pub sensitivity: f64,
    /// Variance of the minibatch appearance loss.
    pub app_var: f64,
    /// Mean visibility over all rays.
    pub mean_visibility: f64,
    #[serde(rename = "M")]
    pub draws: usize,
    #[serde(rename = "B")]
    pub batch: usize,
    pub rays: usize,
}

/// Shifted accumulation of sample (co)variances; exact zeros for constant input.
struct Moments {
    shift: Option<[f64; 8]>,
    sum: [f64; 8],
    cross: [[f64; 8]; 8],
    n: usize,
}

impl Moments {
    fn new() -> Self {
        Self {
            shift: None,
            sum: [0.0; 8],
            cross: [[0.0; 8]; 8],
            n: 0,
        }
    }

    fn push(&mut self, x: [f64; 8]) {
        let s = *self.shift.get_or_insert(x);
        let d: [f64; 8] = std::array::from_fn(|i| x[i] - s[i]);
        for i in 0..8 {
            self.sum[i] += d[i];
            for j in i..8 {
                self.cross[i][j] += d[i] * d[j];
            }
        }
        self.n += 1;
    }

    fn cov(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        let n = self.n as f64;
        (self.cross[i][j] - self.sum[i] * self.sum[j] / n) / (n - 1.0)
    }
}

/// Draws `draws` minibatches at a fixed state and reduces their gradients.
pub fn estimate_variance(
    state: &SimState,
    scene: &SimScene,
    opts: &VarianceOptions,
    rng: &mut SimRng,
) -> Result<VarianceReport> {
    if opts.draws < 30 {
        return Err(Error::InvalidArgument(format!("need at least 30 draws, got {}", opts.draws)));
    }
    if opts.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let frame = Frame::new(state)?;
    let mut m = Moments::new();
    for _ in 0..opts.draws {
        let batch = Batch::draw(opts.sampling, scene.ray_count(), opts.batch, rng);
        let est = batch_estimate(state, &frame, scene, &batch, 1.0, 0.0);
        let mut row = [0.0; 8];
        row[..6].copy_from_slice(&est.xi_sigma);
        row[6] = est.xi_s;
        row[7] = est.app;
        m.push(row);
    }
    let var_sigma: f64 = (0..6).map(|i| m.cov(i, i).max(0.0)).sum();
    let var_s = m.cov(6, 6).max(0.0);
    let cov: f64 = (0..6).map(|i| m.cov(i, 6)).sum();
    let mean_visibility = (0..scene.ray_count())
        .map(|r| ray_terms(&frame, scene, r, state.s).t)
        .sum::<f64>()
        / scene.ray_count() as f64;
    Ok(VarianceReport {
        var_sigma,
        var_s,
        cov,
        v_total: var_sigma + var_s + 2.0 * cov,
        sensitivity: visibility_sensitivity(state, scene)?,
        app_var: m.cov(7, 7).max(0.0),
        mean_visibility,
        draws: opts.draws,
        batch: opts.batch,
        rays: scene.ray_count(),
    })
}
