//! Multiplicative scale updates with mean reversion toward attractors.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsConfig {
    pub steps: usize,
    /// Standard deviation of the multiplicative noise ε.
    pub noise_std: f64,
    /// Fraction of the gap to the nearest attractor closed per step.
    pub reversion: f64,
    /// Attractor log-scales.
    pub attractors: Vec<f64>,
    pub n_particles: usize,
    /// Common starting log-scale; `None` draws each start uniformly over
    /// the attractor span widened by one on each side.
    pub initial: Option<f64>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            noise_std: 0.05,
            reversion: 0.1,
            attractors: vec![-2.0, 1.0],
            n_particles: 1000,
            initial: None,
        }
    }
}

/// `ln λ ← ln λ + ln(1+ε) − reversion·(ln λ − nearest attractor)`, with
/// `ε ~ N(0, noise_std²)` truncated above −1. Returns final log-scales.
pub fn scale_dynamics_sim(cfg: &DynamicsConfig, seed: u64) -> Result<Vec<f64>> {
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(Error::InvalidArgument("noise_std must be finite and >= 0".into()));
    }
    if !(0.0..=1.0).contains(&cfg.reversion) {
        return Err(Error::InvalidArgument("reversion must lie in [0, 1]".into()));
    }
    if cfg.attractors.is_empty() || !cfg.attractors.iter().all(|a| a.is_finite()) {
        return Err(Error::InvalidArgument("need at least one finite attractor".into()));
    }
    let lo = cfg.attractors.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = cfg.attractors.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated std");
    Ok((0..cfg.n_particles)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_for(seed, p as u64);
            let mut x = cfg.initial.unwrap_or_else(|| rng.random_range(lo..=hi));
            for _ in 0..cfg.steps {
                let target = cfg
                    .attractors
                    .iter()
                    .copied()
                    .min_by(|a, b| (x - a).abs().total_cmp(&(x - b).abs()))
                    .expect("non-empty");
                let eps: f64 = if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                x += eps.max(-1.0 + 1e-12).ln_1p() - cfg.reversion * (x - target);
            }
            x
        })
        .collect())
}
