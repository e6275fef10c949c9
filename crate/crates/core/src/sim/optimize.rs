//! Coupled (G1) versus density-aware decoupled (G4) minibatch optimization.

use serde::Serialize;

use super::model::{clean_app_error, full_losses, Frame, SimState};
use super::scene::SimScene;
use super::variance::{batch_estimate, Batch, Sampling};
use crate::error::{Error, Result};
use crate::ingest::{to_csv, Cell};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Joint SGD on (θ, S).
    G1,
    /// Σ step with S frozen (appearance coupling down-weighted by
    /// `min(1, R/R₀)`, spectrum regularizer on), then an S step at the new Σ,
    /// both on the same minibatch.
    G4,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::G1 => "G1",
            Scheme::G4 => "G4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeConfig {
    pub scheme: Scheme,
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub sampling: Sampling,
    /// Ray count at which G4 stops down-weighting the coupling.
    pub r0: usize,
    /// Spectrum regularizer weight used by G4.
    pub reg: f64,
    pub s_init: f64,
    pub omega: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::G1,
            steps: 2000,
            lr: 1e-2,
            batch: 4,
            sampling: Sampling::default(),
            r0: 128,
            reg: 0.1,
            s_init: 0.5,
            omega: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub l_total: f64,
    pub l_app: f64,
    pub l_geo: f64,
    /// Appearance error against the noise-free intensities.
    pub l_app_clean: f64,
    pub sigma_norm: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingTrace {
    pub scheme: Scheme,
    pub rows: Vec<TraceRow>,
    pub diverged: bool,
    pub final_state: SimState,
}

impl TrainingTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Variance of step-to-step changes of L_total over the second half.
    pub fn late_diff_variance(&self) -> f64 {
        let tail: Vec<f64> = self.rows[self.rows.len() / 2..].iter().map(|r| r.l_total).collect();
        let diffs: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
        if diffs.len() < 2 {
            return 0.0;
        }
        crate::numeric::population_variance(&diffs)
    }
}

fn row(step: usize, state: &SimState, scene: &SimScene) -> Result<TraceRow> {
    let l = full_losses(state, scene)?;
    Ok(TraceRow {
        step,
        l_total: l.total,
        l_app: l.app,
        l_geo: l.geo,
        l_app_clean: clean_app_error(state, scene)?,
        sigma_norm: state.sigma().frobenius(),
        s: state.s,
    })
}

/// Starts at `(Σ_pc, s_init)` and records full-batch losses after every step.
pub fn optimize(scene: &SimScene, cfg: &OptimizeConfig, seed: u64) -> Result<TrainingTrace> {
    if cfg.steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if cfg.batch == 0 || !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(Error::InvalidArgument("need batch >= 1 and a finite lr >= 0".into()));
    }
    let mut state = SimState::from_sigma(&scene.sigma_pc, cfg.s_init, cfg.omega)?;
    let mut rng = rng_for(seed, 2);
    let rays = scene.ray_count();
    let w_app = (rays as f64 / cfg.r0.max(1) as f64).min(1.0);
    let mut rows = Vec::with_capacity(cfg.steps);
    let mut diverged = false;
    for step in 1..=cfg.steps {
        let batch = Batch::draw(cfg.sampling, rays, cfg.batch, &mut rng);
        let next = match cfg.scheme {
            Scheme::G1 => {
                let est = batch_estimate(&state, &Frame::new(&state)?, scene, &batch, 1.0, 0.0);
                let mut s = state;
                for i in 0..6 {
                    s.theta[i] -= cfg.lr * est.xi_sigma[i];
                }
                s.s -= cfg.lr * est.xi_s;
                s
            }
            Scheme::G4 => {
                let est = batch_estimate(&state, &Frame::new(&state)?, scene, &batch, w_app, cfg.reg);
                let mut s = state;
                for i in 0..6 {
                    s.theta[i] -= cfg.lr * est.xi_sigma[i];
                }
                match Frame::new(&s) {
                    Ok(frame) => {
                        let est = batch_estimate(&s, &frame, scene, &batch, 1.0, 0.0);
                        s.s -= cfg.lr * est.xi_s;
                    }
                    Err(_) => s.s = f64::NAN,
                }
                s
            }
        };
        match row(step, &next, scene) {
            Ok(r) if r.l_total.is_finite() => {
                rows.push(r);
                state = next;
            }
            _ => {
                diverged = true;
                break;
            }
        }
    }
    Ok(TrainingTrace {
        scheme: cfg.scheme,
        rows,
        diverged,
        final_state: state,
    })
}

pub const TRACE_CSV_HEADER: [&str; 5] = ["step", "L_total", "L_app", "L_geo", "L_app_clean"];

/// One row per recorded step, CRLF-terminated.
pub fn trace_csv(trace: &TrainingTrace) -> Result<String> {
    let rows: Vec<Vec<Cell>> = trace
        .rows
        .iter()
        .map(|r| vec![r.step.into(), r.l_total.into(), r.l_app.into(), r.l_geo.into(), r.l_app_clean.into()])
        .collect();
    to_csv(&TRACE_CSV_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::{build_scene, SceneConfig};

    fn scene(rays: usize) -> SimScene {
        build_scene(
            &SceneConfig {
                rays,
                ..Default::default()
            },
            9,
        )
        .unwrap()
    }

    #[test]
    fn zero_lr_is_constant() {
        let sc = scene(16);
        for scheme in [Scheme::G1, Scheme::G4] {
            let cfg = OptimizeConfig {
                scheme,
                steps: 20,
                lr: 0.0,
                ..Default::default()
            };
            let t = optimize(&sc, &cfg, 1).unwrap();
            assert_eq!(t.rows.len(), 20);
            assert!(t.rows.iter().all(|r| r.l_total == t.rows[0].l_total && r.s == 0.5));
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let cfg = OptimizeConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(optimize(&scene(8), &cfg, 0).is_err());
    }

    #[test]
    fn learns_appearance_and_stays_spd() {
        let sc = scene(64);
        for scheme in [Scheme::G1, Scheme::G4] {
            let cfg = OptimizeConfig {
                scheme,
                steps: 400,
                lr: 0.05,
                ..Default::default()
            };
            let t = optimize(&sc, &cfg, 3).unwrap();
            assert!(!t.diverged);
            assert!(t.last().unwrap().l_app < t.rows[0].l_app);
            assert!(t.final_state.sigma().leading_minors().iter().all(|m| *m > 0.0));
            assert_eq!(t, optimize(&sc, &cfg, 3).unwrap());
        }
    }

    #[test]
    fn huge_lr_flags_divergence() {
        let cfg = OptimizeConfig {
            steps: 500,
            lr: 1e6,
            sampling: Sampling::FullBatch,
            ..Default::default()
        };
        let t = optimize(&scene(8), &cfg, 0).unwrap();
        assert!(t.diverged);
        assert!(t.rows.len() < 500);
    }

    #[test]
    fn trace_csv_rows() {
        let cfg = OptimizeConfig {
            steps: 3,
            ..Default::default()
        };
        let t = optimize(&scene(16), &cfg, 1).unwrap();
        let text = trace_csv(&t).unwrap();
        let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
        assert_eq!(lines[0], "step,L_total,L_app,L_geo,L_app_clean");
        assert_eq!(lines.len(), t.rows.len() + 1);
        assert!(lines.last().unwrap().starts_with(&format!("{},", t.rows.last().unwrap().step)));
    }
}
