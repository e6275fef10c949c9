//! Small dense linear algebra: 3-vectors, 3×3 matrices, symmetric 3×3
//! matrices, unit quaternions and a symmetric eigenvalue solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Squared Euclidean distance, evaluated in a fixed order so that every
/// caller (index or brute force) gets bit-identical results.
#[inline]
pub fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&a[0], v), dot(&a[1], v), dot(&a[2], v)]
}

/// Symmetric 3×3 matrix stored by its six unique entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMat3 {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl SymMat3 {
    pub const fn new(xx: f64, xy: f64, xz: f64, yy: f64, yz: f64, zz: f64) -> Self {
        Self {
            xx,
            xy,
            xz,
            yy,
            yz,
            zz,
        }
    }

    pub const fn identity() -> Self {
        Self::diag([1.0, 1.0, 1.0])
    }

    pub const fn diag(d: Vec3) -> Self {
        Self::new(d[0], 0.0, 0.0, d[1], 0.0, d[2])
    }

    pub fn zero() -> Self {
        Self::diag([0.0; 3])
    }

    /// Symmetric part of an arbitrary matrix.
    pub fn from_mat(m: &Mat3) -> Self {
        Self::new(
            m[0][0],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            m[1][1],
            0.5 * (m[1][2] + m[2][1]),
            m[2][2],
        )
    }

    /// `v · vᵀ`
    pub fn outer(v: &Vec3) -> Self {
        Self::new(
            v[0] * v[0],
            v[0] * v[1],
            v[0] * v[2],
            v[1] * v[1],
            v[1] * v[2],
            v[2] * v[2],
        )
    }

    pub fn to_mat(&self) -> Mat3 {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn entries(&self) -> [f64; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn det(&self) -> f64 {
        self.xx * (self.yy * self.zz - self.yz * self.yz)
            - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    /// Squared Frobenius norm over all nine entries.
    pub fn frobenius2(&self) -> f64 {
        self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + 2.0 * (self.xy * self.xy + self.xz * self.xz + self.yz * self.yz)
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius2().sqrt()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(
            self.xx + o.xx,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yy + o.yy,
            self.yz + o.yz,
            self.zz + o.zz,
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(
            self.xx - o.xx,
            self.xy - o.xy,
            self.xz - o.xz,
            self.yy - o.yy,
            self.yz - o.yz,
            self.zz - o.zz,
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(
            self.xx * s,
            self.xy * s,
            self.xz * s,
            self.yy * s,
            self.yz * s,
            self.zz * s,
        )
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        [
            self.xx * v[0] + self.xy * v[1] + self.xz * v[2],
            self.xy * v[0] + self.yy * v[1] + self.yz * v[2],
            self.xz * v[0] + self.yz * v[1] + self.zz * v[2],
        ]
    }

    /// `vᵀ · M · v`
    pub fn quad(&self, v: &Vec3) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    /// `R · M · Rᵀ`
    pub fn congruence(&self, r: &Mat3) -> Self {
        let m = mat_mul(&mat_mul(r, &self.to_mat()), &transpose(r));
        Self::from_mat(&m)
    }

    /// Leading principal minors; all positive iff the matrix is SPD.
    pub fn leading_minors(&self) -> Vec3 {
        [
            self.xx,
            self.xx * self.yy - self.xy * self.xy,
            self.det(),
        ]
    }

    pub fn is_spd(&self) -> bool {
        self.is_finite() && self.leading_minors().iter().all(|&m| m > 0.0)
    }

    /// Lower-triangular Cholesky factor, or an error if the matrix is not SPD.
    pub fn cholesky(&self) -> Result<Mat3> {
        if !self.is_finite() {
            return Err(Error::NonFinite("cholesky input"));
        }
        let l00 = self.xx;
        if l00 <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let l00 = l00.sqrt();
        let l10 = self.xy / l00;
        let l20 = self.xz / l00;
        let d1 = self.yy - l10 * l10;
        if d1 <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let l11 = d1.sqrt();
        let l21 = (self.yz - l20 * l10) / l11;
        let d2 = self.zz - l20 * l20 - l21 * l21;
        if d2 <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let l22 = d2.sqrt();
        Ok([[l00, 0.0, 0.0], [l10, l11, 0.0], [l20, l21, l22]])
    }

    /// Inverse of an SPD matrix.
    pub fn inverse_spd(&self) -> Result<Self> {
        if !self.is_spd() {
            return Err(Error::NotPositiveDefinite);
        }
        let det = self.det();
        let inv = Self::new(
            self.yy * self.zz - self.yz * self.yz,
            self.xz * self.yz - self.xy * self.zz,
            self.xy * self.yz - self.xz * self.yy,
            self.xx * self.zz - self.xz * self.xz,
            self.xy * self.xz - self.xx * self.yz,
            self.xx * self.yy - self.xy * self.xy,
        );
        Ok(inv.scale(1.0 / det))
    }
}

/// Rotation quaternion in (w, x, y, z) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        Some(Self::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    /// Rotation matrix of the (assumed unit) quaternion.
    pub fn to_matrix(&self) -> Mat3 {
        let Self { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

/// Threshold on the normalized cubic discriminant `1 - r²` below which the
/// closed form is abandoned in favour of Jacobi sweeps.
const DEGENERATE_DISCRIMINANT: f64 = 1e-12;

/// Eigenvalues of a symmetric 3×3 matrix, sorted descending.
///
/// Uses the trigonometric closed form for the characteristic cubic; when two
/// eigenvalues (nearly) coincide the result comes from cyclic Jacobi instead.
pub fn eigvals_sym3(m: &SymMat3) -> Result<Vec3> {
    if !m.is_finite() {
        return Err(Error::NonFinite("symmetric matrix"));
    }
    let off = m.xy * m.xy + m.xz * m.xz + m.yz * m.yz;
    if off == 0.0 {
        return Ok(sort_desc([m.xx, m.yy, m.zz]));
    }
    let q = m.trace() / 3.0;
    let (a, d, f) = (m.xx - q, m.yy - q, m.zz - q);
    let p2 = a * a + d * d + f * f + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return Ok([q; 3]);
    }
    let b = SymMat3::new(a / p, m.xy / p, m.xz / p, d / p, m.yz / p, f / p);
    let r = (0.5 * b.det()).clamp(-1.0, 1.0);
    if (1.0 - r * r).abs() < DEGENERATE_DISCRIMINANT {
        return Ok(jacobi_eigen(m).0);
    }
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let e2 = 3.0 * q - e1 - e3;
    Ok(sort_desc([e1, e2, e3]))
}

fn sort_desc(mut v: Vec3) -> Vec3 {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Cyclic Jacobi eigen-decomposition. Returns descending eigenvalues and the
/// matching unit eigenvectors as columns.
pub fn jacobi_eigen(m: &SymMat3) -> (Vec3, Mat3) {
    let mut a = m.to_mat();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= f64::MIN_POSITIVE || off <= 1e-34 * diag {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for row in a.iter_mut() {
                let (akp, akq) = (row[p], row[q]);
                row[p] = c * akp - s * akq;
                row[q] = s * akp + c * akq;
            }
            let (rp, rq) = (a[p], a[q]);
            for k in 0..3 {
                a[p][k] = c * rp[k] - s * rq[k];
                a[q][k] = s * rp[k] + c * rq[k];
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let mut vecs = [[0.0; 3]; 3];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..3 {
            vecs[row][col] = v[row][src];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn char_poly(m: &SymMat3, l: f64) -> f64 {
        m.sub(&SymMat3::identity().scale(l)).det()
    }

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(eigvals_sym3(&SymMat3::identity()).unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(
            eigvals_sym3(&SymMat3::diag([4.0, 1.0, 9.0])).unwrap(),
            [9.0, 4.0, 1.0]
        );
    }

    #[test]
    fn non_finite_rejected() {
        let m = SymMat3::new(f64::NAN, 0.0, 0.0, 1.0, 0.0, 1.0);
        assert!(eigvals_sym3(&m).is_err());
    }

    #[test]
    fn repeated_eigenvalue_uses_fallback() {
        // diag(2,2,5) rotated: a double root sits exactly on the branch cut.
        let r = Quat::new(0.9, 0.1, -0.3, 0.2).normalized().unwrap().to_matrix();
        let m = SymMat3::diag([2.0, 2.0, 5.0]).congruence(&r);
        let e = eigvals_sym3(&m).unwrap();
        assert!((e[0] - 5.0).abs() < 1e-12);
        assert!((e[1] - 2.0).abs() < 1e-12);
        assert!((e[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn roots_of_characteristic_polynomial() {
        let m = SymMat3::new(2.0, -0.3, 0.7, 1.1, 0.25, 3.5);
        let e = eigvals_sym3(&m).unwrap();
        assert!(e[0] >= e[1] && e[1] >= e[2]);
        for l in e {
            assert!(char_poly(&m, l).abs() <= 1e-8 * m.frobenius().max(1.0));
        }
    }

    #[test]
    fn jacobi_vectors_diagonalize() {
        let m = SymMat3::new(2.0, -0.3, 0.7, 1.1, 0.25, 3.5);
        let (vals, vecs) = jacobi_eigen(&m);
        for c in 0..3 {
            let v = [vecs[0][c], vecs[1][c], vecs[2][c]];
            let mv = m.mul_vec(&v);
            for k in 0..3 {
                assert!((mv[k] - vals[c] * v[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_and_inverse() {
        let m = SymMat3::new(4.0, 1.0, 0.5, 3.0, -0.2, 2.0);
        let l = m.cholesky().unwrap();
        let back = SymMat3::from_mat(&mat_mul(&l, &transpose(&l)));
        for (a, b) in back.entries().iter().zip(m.entries()) {
            assert!((a - b).abs() < 1e-14);
        }
        let inv = m.inverse_spd().unwrap();
        let id = mat_mul(&m.to_mat(), &inv.to_mat());
        for (i, row) in id.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14);
            }
        }
        assert!(SymMat3::diag([1.0, -1.0, 1.0]).cholesky().is_err());
    }
}
