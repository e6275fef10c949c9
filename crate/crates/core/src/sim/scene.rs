//! Single-Gaussian scenes observed along random rays.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use super::model::ray_visibility;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scale, sub, SymMat3, Vec3};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneConfig {
    /// Number of observing rays; the density knob.
    pub rays: usize,
    pub sigma_obs: f64,
    /// Per-axis standard deviations of the target covariance.
    pub target_scales: Vec3,
    pub target_appearance: f64,
    /// Spread of ray impact offsets around the center.
    pub impact_spread: f64,
    pub camera_distance: f64,
    /// `Σ_pc = reference_scale · Σ*`.
    pub reference_scale: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            rays: 512,
            sigma_obs: 0.05,
            target_scales: [0.5, 0.3, 0.2],
            target_appearance: 1.0,
            impact_spread: 0.35,
            camera_distance: 3.0,
            reference_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimScene {
    pub mu: Vec3,
    pub sigma_star: SymMat3,
    pub s_star: f64,
    pub rays: Vec<Ray>,
    /// Observed intensities `t_r(Σ*)·S* + noise`.
    pub observations: Vec<f64>,
    /// Noise-free intensities `t_r(Σ*)·S*`.
    pub clean: Vec<f64>,
    pub sigma_obs: f64,
    /// Point-cloud reference covariance targeted by the geometric loss.
    pub sigma_pc: SymMat3,
}

impl SimScene {
    pub fn ray_count(&self) -> usize {
        self.rays.len()
    }
}

fn unit_normal(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v: Vec3 = [0, 1, 2].map(|_| StandardNormal.sample(rng));
        let n = norm(&v);
        if n > 1e-12 {
            return scale(&v, 1.0 / n);
        }
    }
}

/// Rays with isotropic directions whose lines pass the center at normally
/// distributed perpendicular offsets.
pub fn build_scene(cfg: &SceneConfig, seed: u64) -> Result<SimScene> {
    if cfg.rays == 0 {
        return Err(Error::InvalidArgument("scene needs at least one ray".into()));
    }
    let finite = [cfg.sigma_obs, cfg.target_appearance, cfg.impact_spread, cfg.camera_distance, cfg.reference_scale]
        .iter()
        .chain(&cfg.target_scales)
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("scene config"));
    }
    if cfg.sigma_obs < 0.0 || cfg.target_appearance <= 0.0 || cfg.reference_scale <= 0.0 {
        return Err(Error::InvalidArgument(
            "need sigma_obs >= 0, target_appearance > 0 and reference_scale > 0".into(),
        ));
    }
    if cfg.target_scales.iter().any(|s| *s <= 0.0) {
        return Err(Error::InvalidArgument("target scales must be positive".into()));
    }
    let mut rng = rng_for(seed, 0);
    let mu = [0.0; 3];
    let sigma_star = SymMat3::diag(cfg.target_scales.map(|s| s * s));
    let mut rays = Vec::with_capacity(cfg.rays);
    for _ in 0..cfg.rays {
        let dir = unit_normal(&mut rng);
        let g: Vec3 = [0, 1, 2].map(|_| StandardNormal.sample(&mut rng));
        let perp = sub(&g, &scale(&dir, dot(&g, &dir)));
        let origin = sub(&scale(&perp, cfg.impact_spread), &scale(&dir, cfg.camera_distance));
        rays.push(Ray { origin, dir });
    }
    let clean = rays
        .iter()
        .map(|r| ray_visibility(r, &mu, &sigma_star).map(|t| t * cfg.target_appearance))
        .collect::<Result<Vec<_>>>()?;
    let observations = if cfg.sigma_obs > 0.0 {
        let noise = Normal::new(0.0, cfg.sigma_obs).expect("validated std");
        clean.iter().map(|c| c + noise.sample(&mut rng)).collect()
    } else {
        clean.clone()
    };
    Ok(SimScene {
        mu,
        sigma_star,
        s_star: cfg.target_appearance,
        rays,
        observations,
        clean,
        sigma_obs: cfg.sigma_obs,
        sigma_pc: sigma_star.scale(cfg.reference_scale),
    })
}
