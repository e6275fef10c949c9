//! One-dimensional Gaussian mixtures fitted by EM, and BIC order selection.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{population_variance, sorted};
use crate::seed::{derive_seed, rng_for};

pub const MAX_ITERATIONS: usize = 500;
pub const LL_TOLERANCE: f64 = 1e-8;
/// Variance floor as a fraction of the sample variance.
pub const VARIANCE_FLOOR_FRACTION: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmmFit {
    pub k: usize,
    /// Components ordered by ascending mean.
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub ll_trace: Vec<f64>,
}

impl GmmFit {
    pub fn bic(&self, n: usize) -> f64 {
        -2.0 * self.log_likelihood + (3 * self.k - 1) as f64 * (n as f64).ln()
    }
}

fn floor_for(xs: &[f64]) -> f64 {
    let v = population_variance(xs);
    VARIANCE_FLOOR_FRACTION * if v > 0.0 { v } else { 1.0 }
}

/// Fits a `k`-component mixture. Initialization is k-means++ seeded from
/// `seed` and drawn from the sorted samples, so the input order never
/// affects the result.
pub fn fit_gmm_1d(samples: &[f64], k: usize, seed: u64) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if samples.len() < 2 * k {
        return Err(Error::TooFewSamples {
            needed: 2 * k,
            got: samples.len(),
        });
    }
    if !samples.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    let xs = sorted(samples);
    if k >= 2 && xs[0] == xs[xs.len() - 1] {
        return Err(Error::DegenerateData(format!(
            "all {} samples equal {}; cannot fit {k} components",
            xs.len(),
            xs[0]
        )));
    }
    let floor = floor_for(&xs);
    let n = xs.len();

    let (mut w, mut mu, mut var) = init_kmeanspp(&xs, k, seed, floor);
    let mut resp = vec![0.0; n * k];
    let mut ll = e_step(&xs, &w, &mu, &var, &mut resp);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        m_step(&xs, &resp, floor, &mut w, &mut mu, &mut var);
        let next = e_step(&xs, &w, &mu, &var, &mut resp);
        debug_assert!(
            next >= ll - 1e-9 * ll.abs().max(1.0),
            "EM log-likelihood decreased: {ll} -> {next}"
        );
        trace.push(next);
        let gain = next - ll;
        ll = next;
        if gain < LL_TOLERANCE {
            converged = true;
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]).then(a.cmp(&b)));
    Ok(GmmFit {
        k,
        weights: order.iter().map(|&j| w[j]).collect(),
        means: order.iter().map(|&j| mu[j]).collect(),
        variances: order.iter().map(|&j| var[j]).collect(),
        log_likelihood: ll,
        iterations,
        converged,
        ll_trace: trace,
    })
}

fn init_kmeanspp(xs: &[f64], k: usize, seed: u64, floor: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(seed, k as u64);
    let n = xs.len();
    let mut centers = vec![xs[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = xs.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = xs[pick];
        centers.push(c);
        for (d, x) in d2.iter_mut().zip(xs) {
            *d = d.min((x - c).powi(2));
        }
    }
    centers.sort_by(f64::total_cmp);

    let global = population_variance(xs).max(floor);
    let mut members = vec![Vec::new(); k];
    for &x in xs {
        let j = (0..k)
            .min_by(|&a, &b| (x - centers[a]).abs().total_cmp(&(x - centers[b]).abs()))
            .unwrap();
        members[j].push(x);
    }
    let mut w = Vec::with_capacity(k);
    let mut var = Vec::with_capacity(k);
    for m in &members {
        w.push((m.len().max(1)) as f64);
        var.push(if m.len() >= 2 {
            population_variance(m).max(floor)
        } else {
            global
        });
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (w, centers, var)
}

/// Fills responsibilities and returns the log-likelihood.
fn e_step(xs: &[f64], w: &[f64], mu: &[f64], var: &[f64], resp: &mut [f64]) -> f64 {
    let k = w.len();
    let consts: Vec<f64> = (0..k).map(|j| w[j].ln() - 0.5 * (LN_2PI + var[j].ln())).collect();
    let mut ll = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let row = &mut resp[i * k..(i + 1) * k];
        let mut max = f64::NEG_INFINITY;
        for j in 0..k {
            row[j] = consts[j] - 0.5 * (x - mu[j]) * (x - mu[j]) / var[j];
            max = max.max(row[j]);
        }
        let mut s = 0.0;
        for r in row.iter_mut() {
            *r = (*r - max).exp();
            s += *r;
        }
        for r in row.iter_mut() {
            *r /= s;
        }
        ll += max + s.ln();
    }
    ll
}

fn m_step(xs: &[f64], resp: &[f64], floor: f64, w: &mut [f64], mu: &mut [f64], var: &mut [f64]) {
    let k = w.len();
    let n = xs.len() as f64;
    for j in 0..k {
        let mut nk = 0.0;
        let mut sx = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let r = resp[i * k + j];
            nk += r;
            sx += r * x;
        }
        w[j] = nk / n;
        if nk <= f64::MIN_POSITIVE {
            continue;
        }
        let m = sx / nk;
        let mut sv = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            sv += resp[i * k + j] * (x - m) * (x - m);
        }
        mu[j] = m;
        var[j] = (sv / nk).max(floor);
    }
}

/// One candidate order in a BIC sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub k: usize,
    pub fit: Option<GmmFit>,
    pub bic: Option<f64>,
    /// Why this order was skipped, if it was.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicSelection {
    pub best_k: usize,
    pub fits: Vec<OrderFit>,
}

impl BicSelection {
    pub fn fit_for(&self, k: usize) -> Option<&GmmFit> {
        self.fits.iter().find(|f| f.k == k).and_then(|f| f.fit.as_ref())
    }

    pub fn best(&self) -> &GmmFit {
        self.fit_for(self.best_k).expect("best order has a fit")
    }
}

/// Fits every `k ≤ k_max` (best of `restarts` seeded runs by likelihood) and
/// picks the lowest BIC, ties going to the smaller `k`.
pub fn select_k_bic(samples: &[f64], k_max: usize, restarts: usize, seed: u64) -> Result<BicSelection> {
    if k_max == 0 || restarts == 0 {
        return Err(Error::InvalidArgument("k_max and restarts must be at least 1".into()));
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let jobs: Vec<(usize, usize)> = (1..=k_max)
        .filter(|k| n >= 2 * k)
        .flat_map(|k| (0..restarts).map(move |r| (k, r)))
        .collect();
    let runs: Vec<((usize, usize), GmmFit)> = jobs
        .par_iter()
        .map(|&(k, r)| {
            fit_gmm_1d(samples, k, derive_seed(seed, (k * 10_000 + r) as u64)).map(|f| ((k, r), f))
        })
        .collect::<Result<_>>()?;

    let mut fits = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if n < 2 * k {
            fits.push(OrderFit {
                k,
                fit: None,
                bic: None,
                note: Some(format!("skipped: {n} samples, {k} components need {}", 2 * k)),
            });
            continue;
        }
        // Runs are in (k, restart) order; the first maximum wins ties.
        let best = runs
            .iter()
            .filter(|((kk, _), _)| *kk == k)
            .fold(None::<&GmmFit>, |acc, (_, f)| match acc {
                Some(a) if a.log_likelihood >= f.log_likelihood => Some(a),
                _ => Some(f),
            })
            .expect("restarts ≥ 1")
            .clone();
        fits.push(OrderFit {
            k,
            bic: Some(best.bic(n)),
            fit: Some(best),
            note: None,
        });
    }
    let best_k = fits
        .iter()
        .filter_map(|f| f.bic.map(|b| (f.k, b)))
        .fold(None::<(usize, f64)>, |acc, (k, b)| match acc {
            Some((_, ab)) if ab <= b => acc,
            _ => Some((k, b)),
        })
        .expect("k = 1 always feasible")
        .0;
    Ok(BicSelection { best_k, fits })
}

/// `D = √2·|μ1−μ2| / √(σ1²+σ2²)` for a two-component fit.
pub fn ashman_d(fit: &GmmFit) -> Option<f64> {
    if fit.k != 2 {
        return None;
    }
    Some(std::f64::consts::SQRT_2 * (fit.means[0] - fit.means[1]).abs() / (fit.variances[0] + fit.variances[1]).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Unimodal,
    Bimodal,
    Multimodal,
}

/// Bimodal only when two components are selected and well separated.
pub fn verdict(selected_k: usize, ashman: Option<f64>) -> Verdict {
    match selected_k {
        2 if ashman.is_some_and(|d| d > 2.0) => Verdict::Bimodal,
        0..=2 => Verdict::Unimodal,
        _ => Verdict::Multimodal,
    }
}
