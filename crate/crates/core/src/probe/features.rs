//! Geometric descriptors of a point-cloud neighborhood.

use serde::Serialize;

use crate::density::{density_from_radius, KdTree};
use crate::error::{Error, Result};
use crate::linalg::{eigvals_sym3, SymMat3, Vec3};
use crate::numeric::median;
use crate::splat::PointCloud;

pub const FEATURE_DIM: usize = 16;
pub const DEFAULT_FEATURE_K: usize = 16;

/// Color mean used when the cloud carries no colors.
pub const NO_COLOR_SENTINEL: f64 = 0.5;

/// Layout: `[count within r̄, mean/std/min/max neighbor distance,
/// PCA eigenvalues (desc), color mean (3), color std (3), ln density,
/// no-color flag]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureVec(pub [f64; FEATURE_DIM]);

impl FeatureVec {
    pub fn pca(&self) -> Vec3 {
        [self.0[5], self.0[6], self.0[7]]
    }
}

/// Precomputed index and global radius for repeated queries on one cloud.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<'a> {
    cloud: &'a PointCloud,
    tree: KdTree<'a>,
    k: usize,
    /// Median over cloud points of the distance to the k-th other point.
    pub reference_radius: f64,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(cloud: &'a PointCloud, k: usize) -> Result<Self> {
        cloud.validate()?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if cloud.len() < k + 1 {
            return Err(Error::CloudTooSmall {
                needed: k,
                got: cloud.len(),
            });
        }
        let tree = KdTree::new(&cloud.positions);
        let radii: Vec<f64> = cloud
            .positions
            .iter()
            .enumerate()
            .map(|(i, p)| tree.knn(p, k, Some(i))[k - 1].0.sqrt())
            .collect();
        Ok(Self {
            cloud,
            tree,
            k,
            reference_radius: median(&radii).expect("non-empty"),
        })
    }

    pub fn extract(&self, center: &Vec3) -> FeatureVec {
        let nn = self.tree.knn(center, self.k, None);
        let k = nn.len() as f64;
        let dists: Vec<f64> = nn.iter().map(|(d2, _)| d2.sqrt()).collect();
        let mut f = [0.0; FEATURE_DIM];
        f[0] = dists.iter().filter(|d| **d <= self.reference_radius).count() as f64;
        let mean_d = dists.iter().sum::<f64>() / k;
        f[1] = mean_d;
        f[2] = (dists.iter().map(|d| (d - mean_d).powi(2)).sum::<f64>() / k).sqrt();
        f[3] = dists[0];
        f[4] = dists[dists.len() - 1];

        let pts: Vec<Vec3> = nn.iter().map(|&(_, i)| self.cloud.positions[i]).collect();
        let c = [0, 1, 2].map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / k);
        let mut cov = SymMat3::zero();
        for p in &pts {
            let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
            cov = cov.add(&SymMat3::outer(&d));
        }
        let ev = eigvals_sym3(&cov.scale(1.0 / k)).unwrap_or([0.0; 3]);
        for a in 0..3 {
            f[5 + a] = ev[a].max(0.0);
        }

        match &self.cloud.colors {
            Some(colors) => {
                for ch in 0..3 {
                    let vals: Vec<f64> = nn.iter().map(|&(_, i)| colors[i][ch]).collect();
                    let m = vals.iter().sum::<f64>() / k;
                    f[8 + ch] = m;
                    f[11 + ch] = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / k).sqrt();
                }
            }
            None => {
                f[8..11].fill(NO_COLOR_SENTINEL);
                f[15] = 1.0;
            }
        }
        f[14] = density_from_radius(self.k, f[4]).ln();
        FeatureVec(f)
    }
}

/// Features of the `k` cloud points nearest to `center`.
pub fn extract_features(center: &Vec3, cloud: &PointCloud, k: usize) -> Result<FeatureVec> {
    Ok(FeatureExtractor::new(cloud, k)?.extract(center))
}
