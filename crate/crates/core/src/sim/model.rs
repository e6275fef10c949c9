//! Visibility-coupled loss of one Gaussian and its analytic gradients.
//!
//! Σ is parameterized by a lower-triangular Cholesky factor with
//! log-diagonal, `θ = [ln L00, ln L11, ln L22, L10, L20, L21]`.

use serde::Serialize;

use super::scene::{Ray, SimScene};
use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigen, mat_mul, sub, Mat3, SymMat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimState {
    pub theta: [f64; 6],
    /// Appearance.
    pub s: f64,
    /// Appearance weight ω.
    pub omega: f64,
}

impl SimState {
    pub fn from_sigma(sigma: &SymMat3, s: f64, omega: f64) -> Result<Self> {
        let l = sigma.cholesky()?;
        Ok(Self {
            theta: [l[0][0].ln(), l[1][1].ln(), l[2][2].ln(), l[1][0], l[2][0], l[2][1]],
            s,
            omega,
        })
    }

    pub fn chol(&self) -> Mat3 {
        let t = &self.theta;
        [
            [t[0].exp(), 0.0, 0.0],
            [t[3], t[1].exp(), 0.0],
            [t[4], t[5], t[2].exp()],
        ]
    }

    pub fn sigma(&self) -> SymMat3 {
        let l = self.chol();
        SymMat3::from_mat(&mat_mul(&l, &crate::linalg::transpose(&l)))
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite()) && self.s.is_finite() && self.omega.is_finite()
    }
}

/// Visibility and the Mahalanobis-whitened closest-approach vector `u = Σ⁻¹δ`.
fn visibility_terms(ray: &Ray, mu: &Vec3, precision: &SymMat3) -> (f64, Vec3) {
    let a = sub(&ray.origin, mu);
    let pd = precision.mul_vec(&ray.dir);
    let s = -dot(&pd, &a) / dot(&pd, &ray.dir);
    let delta = [a[0] + s * ray.dir[0], a[1] + s * ray.dir[1], a[2] + s * ray.dir[2]];
    let u = precision.mul_vec(&delta);
    let m = dot(&delta, &u).max(0.0);
    ((-0.5 * m).exp(), u)
}

/// `t = exp(−½·δᵀΣ⁻¹δ)` at the Mahalanobis closest approach of the ray line.
pub fn ray_visibility(ray: &Ray, mu: &Vec3, sigma: &SymMat3) -> Result<f64> {
    let p = sigma.inverse_spd()?;
    Ok(visibility_terms(ray, mu, &p).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Losses {
    pub geo: f64,
    pub app: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientSample {
    pub xi_sigma: [f64; 6],
    pub xi_s: f64,
    pub batch: Vec<usize>,
}

/// Per-state quantities reused across rays.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub chol: Mat3,
    pub sigma: SymMat3,
    pub precision: SymMat3,
}

impl Frame {
    pub fn new(state: &SimState) -> Result<Self> {
        if !state.is_finite() {
            return Err(Error::NonFinite("simulator state"));
        }
        let sigma = state.sigma();
        Ok(Self {
            chol: state.chol(),
            precision: sigma.inverse_spd()?,
            sigma,
        })
    }

    /// Gradient of `f` w.r.t. θ given the symmetric gradient `g = ∂f/∂Σ`.
    pub fn theta_grad(&self, g: &SymMat3) -> [f64; 6] {
        let l = &self.chol;
        let dl = mat_mul(&g.to_mat(), l);
        [
            2.0 * dl[0][0] * l[0][0],
            2.0 * dl[1][1] * l[1][1],
            2.0 * dl[2][2] * l[2][2],
            2.0 * dl[1][0],
            2.0 * dl[2][0],
            2.0 * dl[2][1],
        ]
    }
}

/// Contribution of one ray.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayTerms {
    pub t: f64,
    /// Residual `I − t·S`.
    pub e: f64,
    /// `∂t/∂Σ = ½·t·u·uᵀ`.
    pub dt_dsigma: SymMat3,
}

pub(crate) fn ray_terms(frame: &Frame, scene: &SimScene, r: usize, s: f64) -> RayTerms {
    let (t, u) = visibility_terms(&scene.rays[r], &scene.mu, &frame.precision);
    RayTerms {
        t,
        e: scene.observations[r] - t * s,
        dt_dsigma: SymMat3::outer(&u).scale(0.5 * t),
    }
}

/// Gradient of `ω·(I − tS)²` for one ray: `(∂/∂θ, ∂/∂S)`.
pub(crate) fn app_grad(frame: &Frame, terms: &RayTerms, state: &SimState) -> ([f64; 6], f64) {
    let c = -2.0 * state.omega * terms.e;
    let g = frame.theta_grad(&terms.dt_dsigma.scale(c * state.s));
    (g, c * terms.t)
}

/// Extra geometric terms used by the decoupled scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GeoOptions {
    /// Weight on `λ_reg·Σ(ln λᵢ − ln λᵢ^pc)²`; 0 disables it.
    pub reg: f64,
}

/// `(L_geo, ∂L_geo/∂Σ)` including the optional spectrum regularizer.
pub(crate) fn geo_terms(frame: &Frame, sigma_pc: &SymMat3, opts: GeoOptions) -> (f64, SymMat3) {
    let diff = frame.sigma.sub(sigma_pc);
    let mut value = diff.frobenius2();
    let mut grad = diff.scale(2.0);
    if opts.reg > 0.0 {
        let (lam, vecs) = jacobi_eigen(&frame.sigma);
        let (lam_pc, _) = jacobi_eigen(sigma_pc);
        for i in 0..3 {
            let d = lam[i].ln() - lam_pc[i].ln();
            value += opts.reg * d * d;
            let v = [vecs[0][i], vecs[1][i], vecs[2][i]];
            grad = grad.add(&SymMat3::outer(&v).scale(2.0 * opts.reg * d / lam[i]));
        }
    }
    (value, grad)
}

pub fn losses(state: &SimState, scene: &SimScene, batch: &[usize]) -> Result<Losses> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    check_ids(scene, batch)?;
    let frame = Frame::new(state)?;
    let geo = frame.sigma.sub(&scene.sigma_pc).frobenius2();
    let app = batch
        .iter()
        .map(|&r| ray_terms(&frame, scene, r, state.s).e.powi(2))
        .sum::<f64>()
        / batch.len() as f64;
    Ok(Losses {
        geo,
        app,
        total: geo + state.omega * app,
    })
}

/// Losses over every ray of the scene.
pub fn full_losses(state: &SimState, scene: &SimScene) -> Result<Losses> {
    let all: Vec<usize> = (0..scene.ray_count()).collect();
    losses(state, scene, &all)
}

/// Appearance error against the noise-free intensities.
pub fn clean_app_error(state: &SimState, scene: &SimScene) -> Result<f64> {
    let frame = Frame::new(state)?;
    let n = scene.ray_count() as f64;
    Ok((0..scene.ray_count())
        .map(|r| {
            let t = visibility_terms(&scene.rays[r], &scene.mu, &frame.precision).0;
            (scene.clean[r] - t * state.s).powi(2)
        })
        .sum::<f64>()
        / n)
}

fn check_ids(scene: &SimScene, batch: &[usize]) -> Result<()> {
    match batch.iter().find(|&&r| r >= scene.ray_count()) {
        Some(r) => Err(Error::InvalidArgument(format!(
            "ray {r} out of range for {} rays",
            scene.ray_count()
        ))),
        None => Ok(()),
    }
}

/// Exact gradient of `L_total` over `batch` w.r.t. θ and S.
pub fn grad_analytic(state: &SimState, scene: &SimScene, batch: &[usize]) -> Result<GradientSample> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    check_ids(scene, batch)?;
    let frame = Frame::new(state)?;
    let (_, g_geo) = geo_terms(&frame, &scene.sigma_pc, GeoOptions { reg: 0.0 });
    let mut xi_sigma = frame.theta_grad(&g_geo);
    let mut xi_s = 0.0;
    let inv = 1.0 / batch.len() as f64;
    for &r in batch {
        let terms = ray_terms(&frame, scene, r, state.s);
        let (gt, gs) = app_grad(&frame, &terms, state);
        for i in 0..6 {
            xi_sigma[i] += gt[i] * inv;
        }
        xi_s += gs * inv;
    }
    Ok(GradientSample {
        xi_sigma,
        xi_s,
        batch: batch.to_vec(),
    })
}

/// Squared Frobenius norm of the ray-averaged `∂t/∂Σ`.
pub fn visibility_sensitivity(state: &SimState, scene: &SimScene) -> Result<f64> {
    let frame = Frame::new(state)?;
    let n = scene.ray_count() as f64;
    let sum = (0..scene.ray_count()).fold(SymMat3::zero(), |acc, r| {
        acc.add(&ray_terms(&frame, scene, r, state.s).dt_dsigma)
    });
    Ok(sum.scale(1.0 / n).frobenius2())
}

/// Largest relative deviation between [`grad_analytic`] and central finite
/// differences with step `h`, over the six θ entries and S. Deviations are
/// taken relative to `max(|analytic|, |numeric|, 1e-6)`.
pub fn grad_check(state: &SimState, scene: &SimScene, batch: &[usize], h: f64) -> Result<f64> {
    let g = grad_analytic(state, scene, batch)?;
    let total = |st: &SimState| losses(st, scene, batch).map(|l| l.total);
    let mut worst: f64 = 0.0;
    for i in 0..7 {
        let mut plus = *state;
        let mut minus = *state;
        if i < 6 {
            plus.theta[i] += h;
            minus.theta[i] -= h;
        } else {
            plus.s += h;
            minus.s -= h;
        }
        let numeric = (total(&plus)? - total(&minus)?) / (2.0 * h);
        let analytic = if i < 6 { g.xi_sigma[i] } else { g.xi_s };
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::{build_scene, SceneConfig};
    use crate::seed::rng_for;
    use crate::linalg::{norm, scale};
    use proptest::prelude::*;
    use rand::Rng;

    fn direction_point(ray: &Ray, s: f64) -> Vec3 {
        [0, 1, 2].map(|i| ray.origin[i] + s * ray.dir[i])
    }

    fn unit(v: &Vec3) -> Vec3 {
        scale(v, 1.0 / norm(v))
    }

    #[test]
    fn ray_through_center_sees_everything() {
        let ray = Ray {
            origin: [0.0, 0.0, -3.0],
            dir: [0.0, 0.0, 1.0],
        };
        let s = SymMat3::new(0.3, 0.05, 0.0, 0.2, 0.01, 0.1);
        assert_eq!(ray_visibility(&ray, &[0.0; 3], &s).unwrap(), 1.0);
    }

    #[test]
    fn identity_distance_sqrt2() {
        let ray = Ray {
            origin: [1.0, 1.0, -5.0],
            dir: [0.0, 0.0, 1.0],
        };
        let t = ray_visibility(&ray, &[0.0; 3], &SymMat3::identity()).unwrap();
        assert!((t - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn singular_covariance_rejected() {
        let ray = Ray {
            origin: [0.0; 3],
            dir: [1.0, 0.0, 0.0],
        };
        assert_eq!(
            ray_visibility(&ray, &[0.0; 3], &SymMat3::diag([1.0, 0.0, 1.0])),
            Err(Error::NotPositiveDefinite)
        );
    }

    fn random_spd(rng: &mut impl Rng) -> SymMat3 {
        let theta: [f64; 6] = [0, 1, 2, 3, 4, 5].map(|i| {
            if i < 3 {
                rng.random_range(-1.5..0.5)
            } else {
                rng.random_range(-0.5..0.5)
            }
        });
        SimState {
            theta,
            s: 1.0,
            omega: 1.0,
        }
        .sigma()
    }

    #[test]
    fn visibility_matches_line_search() {
        let mut rng = rng_for(17, 0);
        for _ in 0..50 {
            let sigma = random_spd(&mut rng);
            let p = sigma.inverse_spd().unwrap();
            let dir = unit(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0)]);
            let ray = Ray {
                origin: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), -3.0],
                dir,
            };
            // Golden-section search on the convex quadratic along the line.
            let f = |s: f64| p.quad(&direction_point(&ray, s));
            let (mut a, mut b) = (-50.0, 50.0);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if f(c) < f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let oracle = (-0.5 * f(0.5 * (a + b))).exp();
            let t = ray_visibility(&ray, &[0.0; 3], &sigma).unwrap();
            assert!((t - oracle).abs() < 1e-6, "{t} vs {oracle}");
        }
    }

    fn scene(rays: usize, sigma_obs: f64) -> SimScene {
        build_scene(
            &SceneConfig {
                rays,
                sigma_obs,
                ..Default::default()
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn optimum_has_zero_appearance_loss_and_gradient() {
        let sc = scene(16, 0.0);
        let st = SimState::from_sigma(&sc.sigma_star, sc.s_star, 1.0).unwrap();
        let l = losses(&st, &sc, &[0, 3, 3, 7]).unwrap();
        assert_eq!(l.geo, 0.0);
        assert!(l.app < 1e-28);
        let g = grad_analytic(&st, &sc, &[0, 3, 3, 7]).unwrap();
        assert!(g.xi_s.abs() < 1e-14);
        assert!(g.xi_sigma.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn omega_zero_decouples() {
        let sc = scene(16, 0.05);
        let st = SimState::from_sigma(&SymMat3::diag([0.2, 0.15, 0.05]), 0.7, 0.0).unwrap();
        let g = grad_analytic(&st, &sc, &[1, 2]).unwrap();
        assert_eq!(g.xi_s, 0.0);
        let frame = Frame::new(&st).unwrap();
        let (_, gg) = geo_terms(&frame, &sc.sigma_pc, GeoOptions { reg: 0.0 });
        assert_eq!(g.xi_sigma, frame.theta_grad(&gg));
    }

    #[test]
    fn losses_match_definitions() {
        let sc = scene(32, 0.05);
        let sigma = SymMat3::new(0.3, 0.02, -0.01, 0.12, 0.03, 0.05);
        let st = SimState::from_sigma(&sigma, 0.8, 0.7).unwrap();
        let batch = [4, 9, 9, 31];
        let l = losses(&st, &sc, &batch).unwrap();
        let recomputed_sigma = st.sigma();
        let geo: f64 = recomputed_sigma
            .to_mat()
            .iter()
            .flatten()
            .zip(sc.sigma_pc.to_mat().iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let app: f64 = batch
            .iter()
            .map(|&r| {
                let t = ray_visibility(&sc.rays[r], &sc.mu, &recomputed_sigma).unwrap();
                (sc.observations[r] - t * 0.8).powi(2)
            })
            .sum::<f64>()
            / 4.0;
        assert!((l.geo - geo).abs() < 1e-14);
        assert!((l.app - app).abs() < 1e-14);
        assert!((l.total - (geo + 0.7 * app)).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sc = scene(24, 0.05);
        let mut rng = rng_for(23, 0);
        for _ in 0..20 {
            let st = SimState::from_sigma(&random_spd(&mut rng), rng.random_range(0.2..1.5), 1.0).unwrap();
            let batch: Vec<usize> = (0..4).map(|_| rng.random_range(0..24)).collect();
            let err = grad_check(&st, &sc, &batch, 1e-5).unwrap();
            assert!(err <= 1e-5, "{err}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cholesky_state_is_spd(theta in prop::array::uniform6(-3.0f64..3.0)) {
            let st = SimState { theta, s: 1.0, omega: 1.0 };
            prop_assert!(st.sigma().leading_minors().iter().all(|m| *m > 0.0));
        }
    }
}
