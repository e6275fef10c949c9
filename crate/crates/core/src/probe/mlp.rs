//! Fully connected tanh network with hand-written backpropagation.

use rand::Rng;
use serde::Serialize;

use crate::seed::rng_for;

/// Layer widths: 16 inputs, two hidden layers of 64, 7 outputs.
pub const DIMS: [usize; 4] = [16, 64, 64, 7];

/// Parameters stored flat, per layer `W` (row-major, out × in) then `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Layer inputs; `acts[0]` is the sample, `acts[l]` the output of hidden layer `l`.
    acts: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    fn offsets(dims: &[usize]) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(dims.len() - 1);
        let mut at = 0;
        for l in 0..dims.len() - 1 {
            let w = at;
            at += dims[l] * dims[l + 1];
            out.push((w, at));
            at += dims[l + 1];
        }
        out
    }

    pub fn param_count(dims: &[usize]) -> usize {
        (0..dims.len() - 1).map(|l| dims[l] * dims[l + 1] + dims[l + 1]).sum()
    }

    /// Glorot-uniform hidden layers and, when `zero_output`, a zero output
    /// layer so the fresh model predicts the target mean exactly.
    pub fn init(dims: &[usize], seed: u64, zero_output: bool) -> Self {
        let mut rng = rng_for(seed, 0x4d4c50);
        let mut params = vec![0.0; Self::param_count(dims)];
        let offs = Self::offsets(dims);
        let layers = dims.len() - 1;
        for (l, &(w, b)) in offs.iter().enumerate() {
            if zero_output && l == layers - 1 {
                continue;
            }
            let a = (6.0 / (dims[l] + dims[l + 1]) as f64).sqrt();
            for p in &mut params[w..b] {
                *p = rng.random_range(-a..a);
            }
        }
        Self {
            dims: dims.to_vec(),
            params,
        }
    }

    /// Every parameter, biases included, drawn uniformly in `±scale`.
    pub fn random(dims: &[usize], seed: u64, scale: f64) -> Self {
        let mut rng = rng_for(seed, 0x52414e44);
        let n = Self::param_count(dims);
        let params = if scale > 0.0 {
            (0..n).map(|_| rng.random_range(-scale..scale)).collect()
        } else {
            vec![0.0; n]
        };
        Self {
            dims: dims.to_vec(),
            params,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Cache {
        let offs = Self::offsets(&self.dims);
        let layers = offs.len();
        let mut acts = Vec::with_capacity(layers);
        let mut cur = x.to_vec();
        for (l, &(w, b)) in offs.iter().enumerate() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let weights = &self.params[w..b];
            let bias = &self.params[b..b + n_out];
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut s = bias[o];
                for i in 0..n_in {
                    s += row[i] * cur[i];
                }
                next[o] = if l + 1 < layers { s.tanh() } else { s };
            }
            acts.push(cur);
            cur = next;
        }
        Cache { acts, output: cur }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).output
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output`.
    pub fn backward(&self, cache: &Cache, d_out: &[f64], grad: &mut [f64]) {
        let offs = Self::offsets(&self.dims);
        let layers = offs.len();
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (w, b) = offs[l];
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let input = &cache.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                grad[b + o] += d;
                if d != 0.0 {
                    let row = &mut grad[w + o * n_in..w + (o + 1) * n_in];
                    for i in 0..n_in {
                        row[i] += d * input[i];
                    }
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[w..b];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &weights[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    prev[i] += row[i] * d;
                }
            }
            // Input to layer l is tanh output of layer l-1.
            for i in 0..n_in {
                prev[i] *= 1.0 - input[i] * input[i];
            }
            delta = prev;
        }
    }
}

/// Mean squared error over output dimensions for one sample.
pub fn sample_loss(model: &Mlp, x: &[f64], t: &[f64]) -> f64 {
    let y = model.predict(x);
    y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t.len() as f64
}

/// Gradient of [`sample_loss`].
pub fn sample_grad(model: &Mlp, x: &[f64], t: &[f64]) -> Vec<f64> {
    let cache = model.forward(x);
    let scale = 2.0 / t.len() as f64;
    let d: Vec<f64> = cache.output.iter().zip(t).map(|(y, t)| scale * (y - t)).collect();
    let mut g = vec![0.0; model.params.len()];
    model.backward(&cache, &d, &mut g);
    g
}

/// Largest relative deviation of backprop from central differences
/// (`h = 1e-5`) over every parameter, relative to
/// `max(|analytic|, |numeric|, 1e-4)`.
pub fn mlp_grad_check(model: &Mlp, x: &[f64], t: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let analytic = sample_grad(model, x, t);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let orig = probe.params[i];
        probe.params[i] = orig + H;
        let up = sample_loss(&probe, x, t);
        probe.params[i] = orig - H;
        let down = sample_loss(&probe, x, t);
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        let denom = a.abs().max(numeric.abs()).max(1e-4);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
