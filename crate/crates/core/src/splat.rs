//! Domain types for converged splats and reconstruction point clouds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Quat, SymMat3, Vec3};

/// Degree-0 real spherical-harmonic basis constant, `1 / (2·√π)`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

/// Number of higher-order SH coefficients stored by degree-3 splats.
pub const SH_REST_LEN: usize = 45;

/// One converged Gaussian splat, as stored in a splat PLY.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrimitive {
    pub position: Vec3,
    /// Unit quaternion (w, x, y, z).
    pub rotation: Quat,
    /// Natural log of the per-axis standard deviation.
    pub log_scales: Vec3,
    pub opacity_logit: f64,
    pub sh_dc: Vec3,
    /// Empty, or exactly [`SH_REST_LEN`] coefficients.
    pub sh_rest: Vec<f64>,
}

impl GaussianPrimitive {
    /// Unit-scale, axis-aligned splat at `position` with opacity 0.5 and zero DC color.
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            rotation: Quat::identity(),
            log_scales: [0.0; 3],
            opacity_logit: 0.0,
            sh_dc: [0.0; 3],
            sh_rest: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.position.iter().all(|v| v.is_finite())
            && self.log_scales.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.sh_dc.iter().all(|v| v.is_finite())
            && [self.rotation.w, self.rotation.x, self.rotation.y, self.rotation.z]
                .iter()
                .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidPrimitive("non-finite field".into()));
        }
        if (self.rotation.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidPrimitive(format!(
                "rotation norm {} is not 1",
                self.rotation.norm()
            )));
        }
        if !self.sh_rest.is_empty() && self.sh_rest.len() != SH_REST_LEN {
            return Err(Error::InvalidPrimitive(format!(
                "sh_rest has {} coefficients",
                self.sh_rest.len()
            )));
        }
        Ok(())
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `Σ = R · diag(exp(2·s)) · Rᵀ`.
pub fn covariance_of(p: &GaussianPrimitive) -> Result<SymMat3> {
    let finite = p.log_scales.iter().all(|v| v.is_finite())
        && [p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z]
            .iter()
            .all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidPrimitive("non-finite rotation or scale".into()));
    }
    let q = p
        .rotation
        .normalized()
        .ok_or_else(|| Error::InvalidPrimitive("zero quaternion".into()))?;
    let var = p.log_scales.map(|s| (2.0 * s).exp());
    Ok(SymMat3::diag(var).congruence(&q.to_matrix()))
}

/// View-independent radiance from the DC SH term, `0.5 + C0·dc`, unclamped.
pub fn radiance_dc(sh_dc: &Vec3) -> Result<Vec3> {
    if !sh_dc.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("sh_dc"));
    }
    Ok(sh_dc.map(|c| 0.5 + SH_C0 * c))
}

/// Reconstruction points, optionally colored (RGB in [0,1]) and identified.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub colors: Option<Vec<Vec3>>,
    pub ids: Option<Vec<u64>>,
}

impl PointCloud {
    pub fn from_positions(positions: Vec<Vec3>) -> Self {
        Self {
            positions,
            colors: None,
            ids: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks the invariants every analysis op relies on.
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidArgument("point cloud is empty".into()));
        }
        if let Some(c) = &self.colors {
            if c.len() != self.positions.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} colors for {} points",
                    c.len(),
                    self.positions.len()
                )));
            }
        }
        if let Some(ids) = &self.ids {
            if ids.len() != self.positions.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} ids for {} points",
                    ids.len(),
                    self.positions.len()
                )));
            }
        }
        if !self.positions.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("point positions"));
        }
        Ok(())
    }

    /// Axis-aligned bounds `(min, max)`; `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1]), lo[2].min(p[2])],
                [hi[0].max(p[0]), hi[1].max(p[1]), hi[2].max(p[2])],
            )
        }))
    }
}
