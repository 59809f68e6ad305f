//! Fully connected ReLU network with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("input has {got} features, network expects {expected}")]
    InputSize { expected: usize, got: usize },
    #[error("layer {layer}: {reason}")]
    BadLayer { layer: usize, reason: String },
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
}

/// Input, hidden and output widths of the command classifier.
pub const COMMAND_NET: [usize; 4] = [4, 64, 64, 15];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    #[serde(rename = "in")]
    pub n_in: usize,
    #[serde(rename = "out")]
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, weights: vec![0.0; n_in * n_out], bias: vec![0.0; n_out] }
    }

    /// Uniform in `±1/sqrt(n_in)` for weights and biases.
    pub fn random<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weights = (0..n_in * n_out).map(|_| draw()).collect();
        let bias = (0..n_out).map(|_| draw()).collect();
        Self { n_in, n_out, weights, bias }
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }

    fn check(&self, layer: usize) -> Result<(), MlpError> {
        let bad = |reason: String| Err(MlpError::BadLayer { layer, reason });
        if self.n_in == 0 || self.n_out == 0 {
            return bad("zero width".into());
        }
        if self.weights.len() != self.n_in * self.n_out {
            return bad(format!("{} weights for shape {}x{}", self.weights.len(), self.n_out, self.n_in));
        }
        if self.bias.len() != self.n_out {
            return bad(format!("{} biases for {} outputs", self.bias.len(), self.n_out));
        }
        if !self.weights.iter().chain(&self.bias).all(|v| v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer `l` (post-ReLU for `l > 0`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation outputs of each layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self, MlpError> {
        let mlp = Self { layers };
        mlp.validate()?;
        Ok(mlp)
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self { layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() }
    }

    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        Self { layers: sizes.windows(2).map(|w| Dense::random(w[0], w[1], rng)).collect() }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if self.layers.is_empty() {
            return Err(MlpError::BadLayer { layer: 0, reason: "network has no layers".into() });
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.check(i)?;
            if i > 0 && self.layers[i - 1].n_out != l.n_in {
                return Err(MlpError::BadLayer {
                    layer: i,
                    reason: format!("expects {} inputs, previous layer gives {}", l.n_in, self.layers[i - 1].n_out),
                });
            }
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward_cached(&self, x: &[f64], cache: &mut ForwardCache) -> Result<(), MlpError> {
        if x.len() != self.n_inputs() {
            return Err(MlpError::InputSize { expected: self.n_inputs(), got: x.len() });
        }
        let n = self.layers.len();
        cache.inputs.resize_with(n, Vec::new);
        cache.pre.resize_with(n, Vec::new);
        cache.inputs[0].clear();
        cache.inputs[0].extend_from_slice(x);
        for l in 0..n {
            let mut out = std::mem::take(&mut cache.pre[l]);
            self.layers[l].apply(&cache.inputs[l], &mut out);
            if l + 1 < n {
                let next = &mut cache.inputs[l + 1];
                next.clear();
                next.extend(out.iter().map(|v| v.max(0.0)));
            }
            cache.pre[l] = out;
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        let mut cache = ForwardCache::default();
        self.forward_cached(x, &mut cache)?;
        Ok(cache.logits().to_vec())
    }

    /// Logits and the winning class; ties go to the lowest index.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, usize), MlpError> {
        let logits = self.logits(x)?;
        let class = argmax(&logits);
        Ok((logits, class))
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize, MlpError> {
        Ok(self.forward(x)?.1)
    }

    /// Cross-entropy of one sample; accumulates its gradient into `grad`.
    pub fn backprop(&self, x: &[f64], label: usize, grad: &mut Mlp, cache: &mut ForwardCache) -> Result<f64, MlpError> {
        if label >= self.n_outputs() {
            return Err(MlpError::Label { label, classes: self.n_outputs() });
        }
        self.forward_cached(x, cache)?;
        let (loss, mut delta) = softmax_cross_entropy(cache.logits(), label);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grad.layers[l];
            let input = &cache.inputs[l];
            for o in 0..layer.n_out {
                g.bias[o] += delta[o];
                let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (w, v) in row.iter_mut().zip(input) {
                    *w += delta[o] * v;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.n_in];
                for o in 0..layer.n_out {
                    let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * delta[o];
                    }
                }
                for (p, z) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(loss)
    }

    /// `self += scale * other`, parameter by parameter.
    pub fn axpy(&mut self, scale: f64, other: &Mlp) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }

    pub fn fill(&mut self, value: f64) {
        for l in &mut self.layers {
            l.weights.fill(value);
            l.bias.fill(value);
        }
    }

    /// Flat view of every parameter, layer by layer, weights then bias.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Loss `-log softmax(z)[label]` and its gradient with respect to `z`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln() + m;
    let loss = log_sum - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (loss, grad)
}
