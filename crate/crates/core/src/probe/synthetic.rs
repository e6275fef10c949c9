//! Synthetic stratified scenes where splat parameters are a smooth function
//! of local point geometry plus noise that grows as density falls.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::features::{FeatureExtractor, FEATURE_DIM};
use super::train::{BlockData, Standardizer, TARGET_DIM};
use crate::density::{stratify_pairs, Aabb, SpatialBlock, Stratification, Tercile};
use crate::error::{Error, Result};
use crate::linalg::{Quat, Vec3};
use crate::seed::rng_for;
use crate::splat::{GaussianPrimitive, PointCloud};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticConfig {
    pub blocks_per_tercile: usize,
    /// Cloud points per block for Q1, Q2, Q3.
    pub points_per_block: [usize; 3],
    pub gaussians_per_block: usize,
    /// Noise standard deviation, in units of the signal spread, at the
    /// densest tier. Other tiers scale it by `(ρ / ρ_Q1)^(−1/2)`.
    pub noise_ref: f64,
    /// Replaces the computed noise level of the sparsest tier. A non-finite
    /// value makes its targets pure noise.
    pub sparse_noise_override: Option<f64>,
    /// Log-density rise across one block, giving in-block geometric variation.
    pub density_gradient: f64,
    pub feature_k: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            blocks_per_tercile: 3,
            points_per_block: [3600, 900, 100],
            gaussians_per_block: 120,
            noise_ref: 0.25,
            sparse_noise_override: None,
            density_gradient: 3.0,
            feature_k: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    pub primitives: Vec<GaussianPrimitive>,
    pub blocks: Vec<SpatialBlock>,
    pub truth: Stratification,
    /// Training pairs per block, features taken at each splat's position.
    pub data: Vec<BlockData>,
    /// Noise standard deviation applied per tier (signal units).
    pub noise: [f64; 3],
}

/// Offset along x of the unit cube holding block `b`.
fn block_origin(b: usize) -> Vec3 {
    [2.0 * b as f64, 0.0, 0.0]
}

/// Draws x in `[0,1)` with density proportional to `exp(g·x)`.
fn graded(rng: &mut impl Rng, g: f64) -> f64 {
    let u: f64 = rng.random();
    if g.abs() < 1e-12 {
        u
    } else {
        (1.0 + u * (g.exp() - 1.0)).ln() / g
    }
}

/// Fixed smooth map from standardized features to the 7 targets.
fn signal(z: &[f64]) -> [f64; TARGET_DIM] {
    // Geometric descriptors: mean distance, PCA spread, log density.
    let (d, p, r) = (z[1], z[5], z[14]);
    [
        0.8 * r + 0.3 * d,
        -0.6 * r + 0.4 * p,
        0.5 * d - 0.5 * p + 0.3 * (0.8 * r).tanh(),
        r + 0.2 * (d - p),
        -0.7 * d + 0.4 * (0.7 * r).tanh(),
        0.6 * p + 0.3 * r,
        0.5 * r - 0.5 * d,
    ]
}

pub fn synthetic_stratified_scene(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticScene> {
    if cfg.blocks_per_tercile == 0 || cfg.gaussians_per_block == 0 {
        return Err(Error::InvalidArgument("need at least one block and one splat per block".into()));
    }
    if cfg.points_per_block.iter().any(|&p| p <= cfg.feature_k) {
        return Err(Error::InvalidArgument("every block needs more points than feature_k".into()));
    }
    if !(cfg.noise_ref >= 0.0 && cfg.noise_ref.is_finite()) {
        return Err(Error::InvalidArgument("noise_ref must be finite and >= 0".into()));
    }
    let mut rng = rng_for(seed, 0x53594e);
    let n_blocks = 3 * cfg.blocks_per_tercile;
    let tier_of = |b: usize| b / cfg.blocks_per_tercile;

    let mut positions = Vec::new();
    let mut point_blocks = Vec::new();
    for b in 0..n_blocks {
        let o = block_origin(b);
        for _ in 0..cfg.points_per_block[tier_of(b)] {
            positions.push([o[0] + graded(&mut rng, cfg.density_gradient), o[1] + rng.random::<f64>(), o[2] + rng.random::<f64>()]);
            point_blocks.push(b);
        }
    }
    let cloud = PointCloud::from_positions(positions);

    let mut gpos = Vec::with_capacity(n_blocks * cfg.gaussians_per_block);
    for b in 0..n_blocks {
        let o = block_origin(b);
        for _ in 0..cfg.gaussians_per_block {
            // Keep away from the faces so neighborhoods stay inside the block.
            gpos.push([0, 1, 2].map(|a| o[a] + 0.1 + 0.8 * rng.random::<f64>()));
        }
    }
    let fx = FeatureExtractor::new(&cloud, cfg.feature_k)?;
    let feats: Vec<[f64; FEATURE_DIM]> = gpos.iter().map(|p| fx.extract(p).0).collect();
    let zstats = Standardizer::fit(&feats);

    let densities: [f64; 3] = cfg.points_per_block.map(|p| p as f64);
    let mut noise = densities.map(|d| cfg.noise_ref * (d / densities[0]).powf(-0.5));
    if let Some(o) = cfg.sparse_noise_override {
        noise[2] = o;
    }

    // Signal spread measured per block so noise is relative to what a
    // per-block model can explain.
    let sig: Vec<[f64; TARGET_DIM]> = feats.iter().map(|f| signal(&zstats.apply(f))).collect();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut primitives = Vec::with_capacity(gpos.len());
    let mut data = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let range = b * cfg.gaussians_per_block..(b + 1) * cfg.gaussians_per_block;
        let spread = Standardizer::fit(&sig[range.clone()]).std;
        let level = noise[tier_of(b)];
        for g in range.clone() {
            let t: [f64; TARGET_DIM] = std::array::from_fn(|j| {
                let e: f64 = std_normal.sample(&mut rng);
                if level.is_finite() {
                    sig[g][j] + level * spread[j] * e
                } else {
                    e
                }
            });
            primitives.push(GaussianPrimitive {
                position: gpos[g],
                rotation: Quat::identity(),
                log_scales: [t[0] * 0.3 - 3.0, t[1] * 0.3 - 3.0, t[2] * 0.3 - 3.0],
                opacity_logit: t[3],
                sh_dc: [t[4], t[5], t[6]],
                sh_rest: Vec::new(),
            });
        }
        let tercile = Tercile::ALL[tier_of(b)];
        data.push(BlockData {
            block_id: b,
            tercile,
            features: range.clone().map(|g| feats[g]).collect(),
            targets: primitives[range.clone()].iter().map(super::train::target_of).collect(),
        });
    }

    let blocks: Vec<SpatialBlock> = (0..n_blocks)
        .map(|b| {
            let o = block_origin(b);
            SpatialBlock {
                id: b,
                bounds: Aabb {
                    min: o,
                    max: [o[0] + 1.0, 1.0, 1.0],
                },
                point_indices: (0..point_blocks.len()).filter(|&i| point_blocks[i] == b).collect(),
                gaussian_indices: (b * cfg.gaussians_per_block..(b + 1) * cfg.gaussians_per_block).collect(),
                rho: densities[tier_of(b)],
            }
        })
        .collect();
    let truth = stratify_pairs(&blocks.iter().map(|b| (b.id, b.rho)).collect::<Vec<_>>());
    Ok(SyntheticScene {
        cloud,
        primitives,
        blocks,
        truth,
        data,
        noise,
    })
}
