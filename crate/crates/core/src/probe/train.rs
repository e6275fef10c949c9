//! Per-block probe training and evaluation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::features::{FeatureExtractor, FEATURE_DIM};
use super::mlp::{Adam, Mlp, DIMS};
use crate::density::{SpatialBlock, Stratification, Tercile};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};
use crate::splat::{GaussianPrimitive, PointCloud};

pub const TARGET_DIM: usize = 7;

/// `[log_scales (3), opacity_logit, sh_dc (3)]`.
pub fn target_of(p: &GaussianPrimitive) -> [f64; TARGET_DIM] {
    [
        p.log_scales[0],
        p.log_scales[1],
        p.log_scales[2],
        p.opacity_logit,
        p.sh_dc[0],
        p.sh_dc[1],
        p.sh_dc[2],
    ]
}

/// Training pairs of one block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockData {
    pub block_id: usize,
    pub tercile: Tercile,
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub targets: Vec<[f64; TARGET_DIM]>,
}

/// Pairs every member splat with the features at its own position.
pub fn build_block_data(
    cloud: &PointCloud,
    primitives: &[GaussianPrimitive],
    blocks: &[SpatialBlock],
    strat: &Stratification,
    feature_k: usize,
) -> Result<Vec<BlockData>> {
    let fx = FeatureExtractor::new(cloud, feature_k)?;
    blocks
        .iter()
        .map(|b| {
            let tercile = strat
                .tercile_of(b.id)
                .ok_or_else(|| Error::InvalidArgument(format!("block {} has no tercile", b.id)))?;
            let mut features = Vec::with_capacity(b.gaussian_indices.len());
            let mut targets = Vec::with_capacity(b.gaussian_indices.len());
            for &g in &b.gaussian_indices {
                let p = primitives
                    .get(g)
                    .ok_or_else(|| Error::InvalidArgument(format!("splat index {g} out of range")))?;
                features.push(fx.extract(&p.position).0);
                targets.push(target_of(p));
            }
            Ok(BlockData {
                block_id: b.id,
                tercile,
                features,
                targets,
            })
        })
        .collect()
}

/// Per-dimension mean and standard deviation (1 where the spread is zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<const D: usize>(rows: &[[f64; D]]) -> Self {
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..D).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..D)
            .map(|j| {
                let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| v * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    /// Blocks with fewer pairs are skipped.
    pub min_pairs: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 3e-3,
            batch: 16,
            seed: 0,
            min_pairs: 20,
        }
    }
}

/// Trained network with the standardization it expects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeModel {
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
    pub stats: ModelStats,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelStats {
    pub features: Standardizer,
    pub targets: Standardizer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockResult {
    pub block_id: usize,
    pub tercile: Tercile,
    pub n_train: usize,
    pub n_eval: usize,
    pub init_mse: f64,
    pub final_mse: f64,
    /// `100·(init − final)/init`; 0 when `init_mse` is 0.
    pub improvement_pct: f64,
    /// Mean minibatch loss per epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedBlock {
    pub block_id: usize,
    pub tercile: Tercile,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRun {
    pub results: Vec<BlockResult>,
    pub skipped: Vec<SkippedBlock>,
}

pub fn improvement_pct(init: f64, fin: f64) -> f64 {
    if init > 0.0 {
        100.0 * (init - fin) / init
    } else {
        0.0
    }
}

fn mse(model: &Mlp, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ts)
        .map(|(x, t)| model.predict(x).iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>())
        .sum();
    total / (xs.len() * TARGET_DIM) as f64
}

/// Trains one fresh model on a seeded 80/20 split of the block.
pub fn train_block(data: &BlockData, cfg: &ProbeConfig) -> Result<(BlockResult, ProbeModel)> {
    let n = data.features.len();
    if n != data.targets.len() {
        return Err(Error::InvalidArgument("features and targets differ in length".into()));
    }
    if n < cfg.min_pairs.max(2) {
        return Err(Error::TooFewSamples {
            needed: cfg.min_pairs.max(2),
            got: n,
        });
    }
    if cfg.batch == 0 || !(cfg.lr.is_finite() && cfg.lr >= 0.0) {
        return Err(Error::InvalidArgument("need batch >= 1 and a finite lr >= 0".into()));
    }
    let seed = derive_seed(cfg.seed, data.block_id as u64);
    let mut rng = rng_for(seed, 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_eval = (n / 5).max(1);
    let (eval_idx, train_idx) = order.split_at(n_eval);

    let train_f: Vec<[f64; FEATURE_DIM]> = train_idx.iter().map(|&i| data.features[i]).collect();
    let train_t: Vec<[f64; TARGET_DIM]> = train_idx.iter().map(|&i| data.targets[i]).collect();
    let stats = ModelStats {
        features: Standardizer::fit(&train_f),
        targets: Standardizer::fit(&train_t),
    };
    let prep = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        idx.iter()
            .map(|&i| (stats.features.apply(&data.features[i]), stats.targets.apply(&data.targets[i])))
            .unzip()
    };
    let (xtr, ttr) = prep(train_idx);
    let (xev, tev) = prep(eval_idx);
    if !xtr.iter().chain(&xev).flatten().all(|v| v.is_finite()) || !ttr.iter().chain(&tev).flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("probe features or targets"));
    }

    let mut model = Mlp::init(&DIMS, seed, true);
    let init_mse = mse(&model, &xev, &tev);
    let mut opt = Adam::new(model.params.len(), cfg.lr);
    let mut grad = vec![0.0; model.params.len()];
    let mut idx: Vec<usize> = (0..xtr.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in idx.chunks(cfg.batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / (chunk.len() * TARGET_DIM) as f64;
            for &i in chunk {
                let cache = model.forward(&xtr[i]);
                let d: Vec<f64> = cache.output.iter().zip(&ttr[i]).map(|(y, t)| scale * (y - t)).collect();
                epoch_loss += cache.output.iter().zip(&ttr[i]).map(|(y, t)| (y - t) * (y - t)).sum::<f64>();
                model.backward(&cache, &d, &mut grad);
            }
            opt.step(&mut model.params, &grad);
        }
        loss_trace.push(epoch_loss / (xtr.len() * TARGET_DIM) as f64);
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("probe weights"));
    }
    let final_mse = mse(&model, &xev, &tev);
    let result = BlockResult {
        block_id: data.block_id,
        tercile: data.tercile,
        n_train: xtr.len(),
        n_eval: xev.len(),
        init_mse,
        final_mse,
        improvement_pct: improvement_pct(init_mse, final_mse),
        loss_trace,
    };
    let checkpoint = ProbeModel {
        dims: model.dims.clone(),
        weights: model.params,
        stats,
        seed,
    };
    Ok((result, checkpoint))
}

/// Trains one independent model per block; results are sorted by block id.
pub fn train_probe(blocks: &[BlockData], cfg: &ProbeConfig) -> Result<ProbeRun> {
    train_probe_models(blocks, cfg).map(|(run, _)| run)
}

/// As [`train_probe`], also returning each trained model with its block id.
pub fn train_probe_models(blocks: &[BlockData], cfg: &ProbeConfig) -> Result<(ProbeRun, Vec<(usize, ProbeModel)>)> {
    type Outcome = (usize, Tercile, Result<(BlockResult, ProbeModel)>);
    let outcomes: Vec<Outcome> = blocks
        .par_iter()
        .map(|b| (b.block_id, b.tercile, train_block(b, cfg)))
        .collect();
    let mut results = Vec::new();
    let mut models = Vec::new();
    let mut skipped = Vec::new();
    for (block_id, tercile, out) in outcomes {
        match out {
            Ok((r, m)) => {
                results.push(r);
                models.push((block_id, m));
            }
            Err(e @ Error::TooFewSamples { .. }) => skipped.push(SkippedBlock {
                block_id,
                tercile,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    results.sort_by_key(|r| r.block_id);
    models.sort_by_key(|m| m.0);
    skipped.sort_by_key(|s| s.block_id);
    Ok((ProbeRun { results, skipped }, models))
}
