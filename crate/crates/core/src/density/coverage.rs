//! How far splats sit from the reconstruction points, split by density tercile.

use rayon::prelude::*;
use serde::Serialize;

use super::{KdTree, SpatialBlock, Stratification, Tercile};
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::numeric::{quantile_sorted, sorted, Histogram};
use crate::splat::PointCloud;

pub const COVERAGE_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TercileSpread {
    pub tercile: Tercile,
    pub n: usize,
    pub median: Option<f64>,
    pub p90: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub n_gaussians: usize,
    pub terciles: Vec<TercileSpread>,
    pub histogram: Histogram,
    pub median: f64,
    pub p90: f64,
}

/// Euclidean distance from each splat center to its nearest cloud point.
pub fn nearest_cloud_distances(cloud: &PointCloud, gaussians: &[Vec3]) -> Result<Vec<f64>> {
    cloud.validate()?;
    let tree = KdTree::new(&cloud.positions);
    Ok(gaussians
        .par_iter()
        .map(|g| tree.nearest(g).expect("non-empty cloud").0.sqrt())
        .collect())
}

pub fn coverage_divergence(
    cloud: &PointCloud,
    gaussians: &[Vec3],
    blocks: &[SpatialBlock],
    strat: &Stratification,
) -> Result<CoverageReport> {
    if gaussians.is_empty() {
        return Err(Error::InvalidArgument("no splats to compare".into()));
    }
    let d = nearest_cloud_distances(cloud, gaussians)?;
    let mut per = [Vec::new(), Vec::new(), Vec::new()];
    for b in blocks {
        if let Some(t) = strat.tercile_of(b.id) {
            per[t.index()].extend(b.gaussian_indices.iter().map(|&i| d[i]));
        }
    }
    let terciles = Tercile::ALL
        .iter()
        .map(|&t| {
            let s = sorted(&per[t.index()]);
            TercileSpread {
                tercile: t,
                n: s.len(),
                median: quantile_sorted(&s, 0.5),
                p90: quantile_sorted(&s, 0.9),
            }
        })
        .collect();
    let all = sorted(&d);
    let max = *all.last().expect("non-empty");
    Ok(CoverageReport {
        n_gaussians: d.len(),
        terciles,
        histogram: Histogram::build(&d, COVERAGE_BINS, 0.0, max),
        median: quantile_sorted(&all, 0.5).expect("non-empty"),
        p90: quantile_sorted(&all, 0.9).expect("non-empty"),
    })
}
