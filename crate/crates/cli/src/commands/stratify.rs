//! `stratify`: grid blocks over the point cloud, density terciles and
//! splat coverage.

use std::path::Path;

use gsanatomy::density::{
    coverage_divergence, partition_blocks, stratify_terciles, Aabb, Partition, PartitionOptions, Stratification,
    Tercile,
};
use gsanatomy::numeric::Histogram;
use gsanatomy::{GaussianPrimitive, PointCloud, Vec3};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_cloud, load_splats, Context, Outcome};
use crate::error::CliResult;
use crate::output::Artifacts;
use crate::svg;

const DENSITY_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub id: usize,
    pub bounds: Aabb,
    pub n_points: usize,
    pub n_gaussians: usize,
    pub rho: f64,
    pub tercile: Tercile,
}

/// Contents of `stratification.json`, read back by `probe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationFile {
    pub splats_sha256: String,
    pub cloud_sha256: String,
    pub target_blocks: usize,
    pub density_k: usize,
    pub grid: usize,
    pub counts: [usize; 3],
    pub warnings: Vec<String>,
    pub blocks: Vec<BlockEntry>,
}

pub fn positions(prims: &[GaussianPrimitive]) -> Vec<Vec3> {
    prims.iter().map(|p| p.position).collect()
}

pub fn stratify(
    cloud: &PointCloud,
    prims: &[GaussianPrimitive],
    target_blocks: usize,
    opts: &PartitionOptions,
) -> CliResult<(Partition, Stratification)> {
    let partition = partition_blocks(cloud, &positions(prims), target_blocks, opts)?;
    let strat = stratify_terciles(&partition.blocks);
    Ok((partition, strat))
}

pub fn describe(partition: &Partition, strat: &Stratification) -> Vec<BlockEntry> {
    partition
        .blocks
        .iter()
        .map(|b| BlockEntry {
            id: b.id,
            bounds: b.bounds,
            n_points: b.point_indices.len(),
            n_gaussians: b.gaussian_indices.len(),
            rho: b.rho,
            tercile: strat.tercile_of(b.id).expect("every block is stratified"),
        })
        .collect()
}

pub fn run(ctx: &Context, splats: &Path, cloud: &Path, blocks: Option<usize>) -> CliResult<Outcome> {
    let (prims, splat_digest) = load_splats(splats)?;
    let (cloud, cloud_digest) = load_cloud(cloud)?;
    let target_blocks = blocks.unwrap_or(ctx.config.density.blocks);
    let opts = ctx.config.partition_options();
    let (partition, strat) = stratify(&cloud, &prims, target_blocks, &opts)?;
    for w in &partition.warnings {
        eprintln!("warning: {w}");
    }
    let coverage = coverage_divergence(&cloud, &positions(&prims), &partition.blocks, &strat)?;

    let file = StratificationFile {
        splats_sha256: splat_digest.sha256.clone(),
        cloud_sha256: cloud_digest.sha256.clone(),
        target_blocks,
        density_k: opts.density_k,
        grid: partition.grid,
        counts: strat.counts,
        warnings: partition.warnings.clone(),
        blocks: describe(&partition, &strat),
    };

    let log_rho: Vec<f64> = partition.point_density.iter().map(|r| r.log10()).collect();
    let lo = log_rho.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = log_rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hist = Histogram::build(&log_rho, DENSITY_BINS, lo, hi);

    let mut artifacts = Artifacts::default();
    artifacts.add_json("stratification.json", &file)?;
    artifacts.add_json("coverage.json", &coverage)?;
    artifacts.add(
        "density.svg",
        svg::histogram("Point density", "log10 density (points per unit volume)", &hist.edges, &hist.counts, None),
    );
    let summary = json!({
        "n_blocks": file.blocks.len(),
        "grid": file.grid,
        "counts": file.counts,
        "coverage_median": coverage.median,
        "warnings": file.warnings.len(),
    });
    Ok(Outcome {
        artifacts,
        inputs: vec![splat_digest, cloud_digest],
        summary,
    })
}
