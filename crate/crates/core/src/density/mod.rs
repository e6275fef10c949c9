//! Local point density, grid block partitioning, tercile stratification and
//! splat-to-cloud coverage divergence.

pub mod blocks;
pub mod coverage;
pub mod kdtree;

pub use blocks::{
    partition_blocks, stratify_pairs, stratify_terciles, Aabb, Partition, PartitionOptions, SpatialBlock,
    Stratification, Tercile,
};
pub use coverage::{coverage_divergence, nearest_cloud_distances, CoverageReport, TercileSpread};
pub use kdtree::{brute_force_knn, KdTree};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::splat::PointCloud;

/// Radius floor for coincident neighbors.
pub const RADIUS_EPS: f64 = 1e-9;

/// Default neighbor count for density estimates.
pub const DEFAULT_DENSITY_K: usize = 32;

/// Points per unit volume of a ball holding `k` neighbors at radius `r`.
pub fn density_from_radius(k: usize, r: f64) -> f64 {
    let r = r.max(RADIUS_EPS);
    k as f64 / (4.0 / 3.0 * std::f64::consts::PI * r * r * r)
}

/// `ρ_i = k / (4/3·π·r_k³)` with `r_k` the distance to the k-th nearest other point.
pub fn knn_density(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    cloud.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if cloud.len() <= k {
        return Err(Error::CloudTooSmall {
            needed: k,
            got: cloud.len(),
        });
    }
    let tree = KdTree::new(&cloud.positions);
    Ok(knn_density_with(&tree, &cloud.positions, k))
}

pub(crate) fn knn_density_with(tree: &KdTree<'_>, pts: &[Vec3], k: usize) -> Vec<f64> {
    pts.par_iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.knn(p, k, Some(i));
            density_from_radius(k, nn[k - 1].0.sqrt())
        })
        .collect()
}
