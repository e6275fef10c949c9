//! Experiment configuration file. Every field has a default; unknown keys
//! are rejected so typos cannot silently fall back to defaults.

use std::path::Path;

use gsanatomy::density::{PartitionOptions, DEFAULT_DENSITY_K};
use gsanatomy::probe::{ProbeConfig, DEFAULT_FEATURE_K};
use gsanatomy::sim::{
    DynamicsConfig, OptimizeConfig, Sampling, ScalingConfig, SceneConfig, Scheme, VarianceOptions,
};
use gsanatomy::stats::StatsOptions;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub stats: StatsSection,
    pub density: DensitySection,
    pub probe: ProbeSection,
    pub scene: SceneSection,
    pub variance: VarianceSection,
    pub optimize: OptimizeSection,
    pub scaling: ScalingSection,
    pub dynamics: DynamicsSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub k_max: usize,
    pub restarts: usize,
}

impl Default for StatsSection {
    fn default() -> Self {
        let d = StatsOptions::default();
        Self {
            k_max: d.k_max,
            restarts: d.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySection {
    /// Neighbors used for the kNN density.
    pub k: usize,
    pub blocks: usize,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self {
            k: DEFAULT_DENSITY_K,
            blocks: 129,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub feature_k: usize,
    pub min_pairs: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let d = ProbeConfig::default();
        Self {
            epochs: d.epochs,
            lr: d.lr,
            batch: d.batch,
            feature_k: DEFAULT_FEATURE_K,
            min_pairs: d.min_pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    #[serde(rename = "R")]
    pub rays: usize,
    pub sigma_obs: f64,
    pub omega: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            rays: SceneConfig::default().rays,
            sigma_obs: SceneConfig::default().sigma_obs,
            omega: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceSection {
    /// Minibatch draws per estimate.
    #[serde(rename = "M")]
    pub draws: usize,
    /// Minibatch size, shared with the optimizer.
    #[serde(rename = "B")]
    pub batch: usize,
}

impl Default for VarianceSection {
    fn default() -> Self {
        let d = VarianceOptions::default();
        Self {
            draws: d.draws,
            batch: d.batch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeChoice {
    G1,
    G4,
    #[serde(rename = "both")]
    Both,
}

impl SchemeChoice {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeChoice::G1 => vec![Scheme::G1],
            SchemeChoice::G4 => vec![Scheme::G4],
            SchemeChoice::Both => vec![Scheme::G1, Scheme::G4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub scheme: SchemeChoice,
    pub steps: usize,
    pub lr: f64,
    pub seeds: usize,
    pub r0: usize,
    pub reg: f64,
    pub s_init: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let d = OptimizeConfig::default();
        Self {
            scheme: SchemeChoice::Both,
            steps: d.steps,
            lr: d.lr,
            seeds: 20,
            r0: d.r0,
            reg: d.reg,
            s_init: d.s_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    #[serde(rename = "R_grid")]
    pub r_grid: Vec<usize>,
    pub sigma_grid: Vec<f64>,
    pub seeds: usize,
}

impl Default for ScalingSection {
    fn default() -> Self {
        let d = ScalingConfig::default();
        Self {
            r_grid: d.r_grid,
            sigma_grid: d.sigma_grid,
            seeds: d.seeds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub steps: usize,
    pub noise_std: f64,
    pub reversion: f64,
    pub attractors: Vec<f64>,
    pub particles: usize,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        let d = DynamicsConfig::default();
        Self {
            steps: d.steps,
            noise_std: d.noise_std,
            reversion: d.reversion,
            attractors: d.attractors,
            particles: d.n_particles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Variance,
    Scaling,
    Optimize,
    Dynamics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub experiments: Vec<Experiment>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            experiments: vec![
                Experiment::Variance,
                Experiment::Scaling,
                Experiment::Optimize,
                Experiment::Dynamics,
            ],
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(v: f64, name: &str) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn at_least(v: usize, min: usize, name: &str) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(format!("{name} must be at least {min}, got {v}")))
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg = match path {
            None => Config::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| bad(format!("{}: {}", p.display(), e.message())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        at_least(self.stats.k_max, 1, "stats.k_max")?;
        at_least(self.stats.restarts, 1, "stats.restarts")?;
        at_least(self.density.k, 1, "density.k")?;
        at_least(self.density.blocks, 3, "density.blocks")?;
        at_least(self.probe.batch, 1, "probe.batch")?;
        at_least(self.probe.feature_k, 1, "probe.feature_k")?;
        if !(self.probe.lr.is_finite() && self.probe.lr >= 0.0) {
            return Err(bad(format!("probe.lr must be finite and >= 0, got {}", self.probe.lr)));
        }
        at_least(self.scene.rays, 1, "scene.R")?;
        if !(self.scene.sigma_obs.is_finite() && self.scene.sigma_obs >= 0.0) {
            return Err(bad("scene.sigma_obs must be finite and >= 0"));
        }
        if !(self.scene.omega.is_finite() && self.scene.omega >= 0.0) {
            return Err(bad("scene.omega must be finite and >= 0"));
        }
        at_least(self.variance.draws, 30, "variance.M")?;
        at_least(self.variance.batch, 1, "variance.B")?;
        at_least(self.optimize.steps, 1, "optimize.steps")?;
        at_least(self.optimize.seeds, 1, "optimize.seeds")?;
        at_least(self.optimize.r0, 1, "optimize.r0")?;
        if !(self.optimize.lr.is_finite() && self.optimize.lr >= 0.0) {
            return Err(bad("optimize.lr must be finite and >= 0"));
        }
        if !(self.optimize.reg.is_finite() && self.optimize.reg >= 0.0) {
            return Err(bad("optimize.reg must be finite and >= 0"));
        }
        positive(self.optimize.s_init, "optimize.s_init")?;
        at_least(self.scaling.seeds, 1, "scaling.seeds")?;
        if self.scaling.r_grid.contains(&0) {
            return Err(bad("scaling.R_grid entries must be at least 1"));
        }
        if self.scaling.sigma_grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(bad("scaling.sigma_grid entries must be finite and >= 0"));
        }
        if self.scaling.r_grid.len() * self.scaling.sigma_grid.len() < 3 {
            return Err(bad("scaling grid needs at least 3 (R, sigma_obs) configurations"));
        }
        at_least(self.dynamics.particles, 2, "dynamics.particles")?;
        if self.dynamics.attractors.is_empty() {
            return Err(bad("dynamics.attractors must not be empty"));
        }
        if !(self.dynamics.noise_std.is_finite() && self.dynamics.noise_std >= 0.0) {
            return Err(bad("dynamics.noise_std must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.dynamics.reversion) {
            return Err(bad("dynamics.reversion must lie in [0, 1]"));
        }
        if self.simulate.experiments.is_empty() {
            return Err(bad("simulate.experiments must name at least one experiment"));
        }
        Ok(())
    }

    pub fn stats_options(&self, seed: u64) -> StatsOptions {
        StatsOptions {
            k_max: self.stats.k_max,
            restarts: self.stats.restarts,
            seed,
        }
    }

    pub fn partition_options(&self) -> PartitionOptions {
        PartitionOptions {
            density_k: self.density.k,
        }
    }

    pub fn probe_config(&self, seed: u64) -> ProbeConfig {
        ProbeConfig {
            epochs: self.probe.epochs,
            lr: self.probe.lr,
            batch: self.probe.batch,
            seed,
            min_pairs: self.probe.min_pairs,
        }
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            rays: self.scene.rays,
            sigma_obs: self.scene.sigma_obs,
            ..SceneConfig::default()
        }
    }

    pub fn variance_options(&self) -> VarianceOptions {
        VarianceOptions {
            draws: self.variance.draws,
            batch: self.variance.batch,
            sampling: Sampling::default(),
        }
    }

    pub fn optimize_config(&self, scheme: Scheme) -> OptimizeConfig {
        OptimizeConfig {
            scheme,
            steps: self.optimize.steps,
            lr: self.optimize.lr,
            batch: self.variance.batch,
            r0: self.optimize.r0,
            reg: self.optimize.reg,
            s_init: self.optimize.s_init,
            omega: self.scene.omega,
            ..OptimizeConfig::default()
        }
    }

    pub fn scaling_config(&self) -> ScalingConfig {
        ScalingConfig {
            r_grid: self.scaling.r_grid.clone(),
            sigma_grid: self.scaling.sigma_grid.clone(),
            seeds: self.scaling.seeds,
            variance: self.variance_options(),
            scene: self.scene_config(),
            omega: self.scene.omega,
            ..ScalingConfig::default()
        }
    }

    pub fn dynamics_config(&self) -> DynamicsConfig {
        DynamicsConfig {
            steps: self.dynamics.steps,
            noise_std: self.dynamics.noise_std,
            reversion: self.dynamics.reversion,
            attractors: self.dynamics.attractors.clone(),
            n_particles: self.dynamics.particles,
            initial: None,
        }
    }
}
