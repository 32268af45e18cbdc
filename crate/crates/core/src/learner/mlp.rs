//! Dense feedforward network with tanh hidden layers and a linear output
//! layer, stored as plain `Vec<f64>` rows, plus an adaptive-moment
//! optimizer over a flattened parameter vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Layer weights are row-major `[out][in]`; biases one per output unit.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    /// weights[l][i * sizes[l] + j] maps input j to output i of layer l.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Forward-pass intermediates needed for backprop: post-activation vectors
/// per layer, `acts[0]` being the input.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Scaled uniform init (1/sqrt(fan_in)); `out_scale` shrinks the final
    /// layer so fresh policies start near zero output.
    pub fn new(sizes: &[usize], rng: &mut impl Rng, out_scale: f64) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let fan_in = sizes[l];
            let mut s = 1.0 / (fan_in as f64).sqrt();
            if l == sizes.len() - 2 {
                s *= out_scale;
            }
            let w = (0..sizes[l + 1] * fan_in).map(|_| rng.gen_range(-s..s)).collect();
            weights.push(w);
            biases.push(vec![0.0; sizes[l + 1]]);
        }
        Self { sizes: sizes.to_vec(), weights, biases }
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn shapes_match(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.len() == b.len())
            && self.biases.iter().zip(&other.biases).all(|(a, b)| a.len() == b.len())
    }

    /// Internal consistency of the stored shapes against `sizes`.
    pub fn validate(&self) -> Result<(), String> {
        if self.sizes.len() < 2 {
            return Err("fewer than two layer sizes".into());
        }
        if self.weights.len() != self.n_layers() || self.biases.len() != self.n_layers() {
            return Err("layer count does not match sizes".into());
        }
        for l in 0..self.n_layers() {
            if self.weights[l].len() != self.sizes[l] * self.sizes[l + 1] {
                return Err(format!("weight matrix {l} has wrong element count"));
            }
            if self.biases[l].len() != self.sizes[l + 1] {
                return Err(format!("bias vector {l} has wrong length"));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|w| w.is_finite())
            && self.biases.iter().flatten().all(|b| b.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).acts.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64]) -> MlpCache {
        assert_eq!(x.len(), self.sizes[0], "input dimension mismatch");
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            let prev = &acts[l];
            let mut out = Vec::with_capacity(n_out);
            for i in 0..n_out {
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                let mut z = self.biases[l][i];
                for j in 0..n_in {
                    z += row[j] * prev[j];
                }
                // tanh on hidden layers, linear output head
                out.push(if l + 1 < self.n_layers() { z.tanh() } else { z });
            }
            acts.push(out);
        }
        MlpCache { acts }
    }

    /// Backprop `d_out` (gradient of the loss w.r.t. the linear output)
    /// through the cached pass, accumulating parameter gradients into
    /// `grad` (same layout as the network). Returns dL/d(input).
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: &mut Mlp) -> Vec<f64> {
        debug_assert!(self.shapes_match(grad));
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            let prev = &cache.acts[l];
            // Hidden layers carry the tanh derivative; output is linear.
            if l + 1 < self.n_layers() {
                let a = &cache.acts[l + 1];
                for i in 0..n_out {
                    delta[i] *= 1.0 - a[i] * a[i];
                }
            }
            let mut d_prev = vec![0.0; n_in];
            for i in 0..n_out {
                grad.biases[l][i] += delta[i];
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                let grow = &mut grad.weights[l][i * n_in..(i + 1) * n_in];
                for j in 0..n_in {
                    grow[j] += delta[i] * prev[j];
                    d_prev[j] += row[j] * delta[i];
                }
            }
            delta = d_prev;
        }
        delta
    }

    pub fn zeroed_like(&self) -> Mlp {
        Mlp {
            sizes: self.sizes.clone(),
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in 0..self.n_layers() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
    }

    /// Reads `param_count()` values starting at `offset`; returns the next
    /// offset.
    pub fn unflatten_from(&mut self, flat: &[f64], mut offset: usize) -> usize {
        for l in 0..self.n_layers() {
            let wn = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[offset..offset + wn]);
            offset += wn;
            let bn = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[offset..offset + bn]);
            offset += bn;
        }
        offset
    }
}

/// Adaptive-moment gradient descent over a flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// In-place descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        if self.lr == 0.0 {
            // Bitwise no-op contract for zero learning rate.
            return;
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
