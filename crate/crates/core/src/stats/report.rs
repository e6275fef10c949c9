//! Scale-spectrum and radiance distribution reports.

use serde::Serialize;

use super::gmm::{ashman_d, select_k_bic, verdict, BicSelection, Verdict};
use crate::error::{Error, Result};
use crate::linalg::eigvals_sym3;
use crate::numeric::{quantile_sorted, sorted, Histogram};
use crate::splat::{covariance_of, radiance_dc, GaussianPrimitive};

pub const MIN_PRIMITIVES: usize = 100;
pub const HISTOGRAM_BINS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsOptions {
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            k_max: 4,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicEntry {
    pub k: usize,
    pub bic: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    ScaleSpectrum,
    Radiance,
    Samples,
}

/// Mixture summary of one pooled sample plus its histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub kind: ReportKind,
    /// Number of primitives pooled.
    pub n: usize,
    pub n_samples: usize,
    pub selected_k: usize,
    /// Components of the selected model, by ascending mean.
    pub components: Vec<Component>,
    /// Separation of the best two-component fit.
    pub ashman_d: Option<f64>,
    pub mode_locations: Vec<f64>,
    pub verdict: Verdict,
    pub bic: Vec<BicEntry>,
    pub histogram: Histogram,
    pub note: String,
}

fn build(kind: ReportKind, n: usize, samples: &[f64], opts: &StatsOptions, note: &str) -> Result<DistributionReport> {
    let sel: BicSelection = select_k_bic(samples, opts.k_max, opts.restarts, opts.seed)?;
    let best = sel.best();
    let d = sel.fit_for(2).and_then(ashman_d);
    let s = sorted(samples);
    let lo = quantile_sorted(&s, 0.001).expect("non-empty");
    let hi = quantile_sorted(&s, 0.999).expect("non-empty");
    Ok(DistributionReport {
        kind,
        n,
        n_samples: samples.len(),
        selected_k: sel.best_k,
        components: (0..best.k)
            .map(|j| Component {
                weight: best.weights[j],
                mean: best.means[j],
                variance: best.variances[j],
            })
            .collect(),
        ashman_d: d,
        mode_locations: best.means.clone(),
        verdict: verdict(sel.best_k, d),
        bic: sel
            .fits
            .iter()
            .map(|f| BicEntry {
                k: f.k,
                bic: f.bic,
                note: f.note.clone(),
            })
            .collect(),
        histogram: Histogram::build(samples, HISTOGRAM_BINS, lo, hi),
        note: note.to_string(),
    })
}

/// Report over an arbitrary pooled sample, e.g. simulated log-scales.
pub fn sample_report(samples: &[f64], opts: &StatsOptions, note: &str) -> Result<DistributionReport> {
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    build(ReportKind::Samples, samples.len(), samples, opts, note)
}

fn require(primitives: &[GaussianPrimitive]) -> Result<()> {
    if primitives.len() < MIN_PRIMITIVES {
        return Err(Error::TooFewSamples {
            needed: MIN_PRIMITIVES,
            got: primitives.len(),
        });
    }
    Ok(())
}

/// Pooled natural-log covariance eigenvalues, three per primitive.
pub fn log_eigenvalues(primitives: &[GaussianPrimitive]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * primitives.len());
    for p in primitives {
        let ev = eigvals_sym3(&covariance_of(p)?)?;
        for l in ev {
            if l <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            out.push(l.ln());
        }
    }
    Ok(out)
}

pub fn scale_spectrum_report(primitives: &[GaussianPrimitive], opts: &StatsOptions) -> Result<DistributionReport> {
    require(primitives)?;
    let samples = log_eigenvalues(primitives)?;
    let first = &samples[..3];
    if samples.chunks_exact(3).all(|c| c == first) {
        return Err(Error::DegenerateData("all primitives share one covariance spectrum".into()));
    }
    build(
        ReportKind::ScaleSpectrum,
        primitives.len(),
        &samples,
        opts,
        "log covariance eigenvalues pooled over primitives; selected_k >= 2 is read as mixture-structured",
    )
}

/// Per-primitive mean over RGB of the DC radiance.
pub fn mean_radiance(primitives: &[GaussianPrimitive]) -> Result<Vec<f64>> {
    primitives
        .iter()
        .map(|p| radiance_dc(&p.sh_dc).map(|r| (r[0] + r[1] + r[2]) / 3.0))
        .collect()
}

pub fn radiance_report(primitives: &[GaussianPrimitive], opts: &StatsOptions) -> Result<DistributionReport> {
    require(primitives)?;
    let samples = mean_radiance(primitives)?;
    build(
        ReportKind::Radiance,
        primitives.len(),
        &samples,
        opts,
        "radiance from the DC spherical-harmonic term only (0.5 + C0*dc, unclamped), averaged over channels",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Quat;
    use crate::seed::rng_for;
    use crate::splat::SH_C0;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn with_radiance(values: &[f64]) -> Vec<GaussianPrimitive> {
        values
            .iter()
            .map(|r| {
                let mut p = GaussianPrimitive::at([0.0; 3]);
                p.sh_dc = [(r - 0.5) / SH_C0; 3];
                p
            })
            .collect()
    }

    #[test]
    fn bimodal_radiance() {
        let mut rng = rng_for(5, 0);
        let lo = Normal::new(0.1, 0.02).unwrap();
        let hi = Normal::new(0.9, 0.02).unwrap();
        let v: Vec<f64> = (0..600)
            .map(|i| if i % 2 == 0 { lo.sample(&mut rng) } else { hi.sample(&mut rng) })
            .collect();
        let r = radiance_report(&with_radiance(&v), &StatsOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Bimodal);
        assert!(r.ashman_d.unwrap() > 10.0);
        assert_eq!(r.histogram.counts.len(), HISTOGRAM_BINS);
    }

    #[test]
    fn unimodal_radiance() {
        let mut rng = rng_for(6, 0);
        let d = Normal::new(0.5, 0.1).unwrap();
        let v: Vec<f64> = (0..600).map(|_| d.sample(&mut rng)).collect();
        let r = radiance_report(&with_radiance(&v), &StatsOptions::default()).unwrap();
        assert_eq!(r.selected_k, 1);
        assert_eq!(r.verdict, Verdict::Unimodal);
    }

    #[test]
    fn spectrum_two_components() {
        let mut rng = rng_for(7, 0);
        let a = Normal::new(-4.0, 0.2).unwrap();
        let b = Normal::new(-1.0, 0.2).unwrap();
        let prims: Vec<GaussianPrimitive> = (0..300)
            .map(|_| {
                let mut p = GaussianPrimitive::at([0.0; 3]);
                p.rotation = Quat::new(rng.random(), rng.random(), rng.random(), rng.random::<f64>() + 0.1)
                    .normalized()
                    .unwrap();
                p.log_scales = [0, 1, 2].map(|_| {
                    if rng.random::<bool>() {
                        a.sample(&mut rng)
                    } else {
                        b.sample(&mut rng)
                    }
                });
                p
            })
            .collect();
        let r = scale_spectrum_report(&prims, &StatsOptions::default()).unwrap();
        assert_eq!(r.selected_k, 2);
        assert_eq!(r.histogram.total(), 900);
        assert_eq!(r.kind, ReportKind::ScaleSpectrum);
    }

    #[test]
    fn identical_primitives_degenerate() {
        let mut p = GaussianPrimitive::at([0.0; 3]);
        p.log_scales = [0.1, -0.3, 0.7];
        let prims = vec![p; 150];
        assert!(matches!(
            scale_spectrum_report(&prims, &StatsOptions::default()),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            radiance_report(&prims[..10], &StatsOptions::default()),
            Err(Error::TooFewSamples { needed: 100, got: 10 })
        ));
    }
}
