//! Strictly positive forecast-uncertainty head.
//!
//! Maps a lookback window to one standard deviation per horizon step. The
//! default architecture is a fully connected network with rectified-linear
//! hidden layers and a softplus output; the alternative wraps an independent
//! state-space forecaster whose readout feeds the same softplus, for
//! comparing how a state-space architecture models uncertainty.
//!
//! Both variants share the output contract: length equals the horizon and
//! every entry is strictly positive for any finite input and parameters.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::RngExt;
use rand_pcg::Pcg64;

use crate::error::CoreError;
use crate::math::{sigmoid, softplus, softplus_inv, window_stats};
use crate::ssm::{SsmGrads, SsmParams};

/// Fully connected network: rectified-linear hidden layers, softplus output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// Layer widths, input first: (P, H, ..., T).
    pub dims: Vec<usize>,
    /// Per layer, row-major `dims[l+1] x dims[l]`.
    pub weights: Vec<Vec<f64>>,
    /// Per layer, length `dims[l+1]`.
    pub biases: Vec<Vec<f64>>,
    /// Standardize the lookback by its own stats; the output is multiplied
    /// by the lookback std.
    pub normalize: bool,
}

/// Parameters of the uncertainty head, one variant per architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceParams {
    Dense(DenseParams),
    SsmBacked(SsmParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradients matching the active [`VarianceParams`] variant.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceGrads {
    Dense(DenseGrads),
    SsmBacked(SsmGrads),
}

impl DenseParams {
    /// Glorot-uniform weights; zero biases except the final layer, whose
    /// biases start at `softplus_inv(1)` so the initial output is near 1.
    pub fn init(dims: &[usize], rng: &mut Pcg64) -> DenseParams {
        assert!(dims.len() >= 2, "need at least an input and an output layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect());
            let b0 = if l == dims.len() - 2 { softplus_inv(1.0) } else { 0.0 };
            biases.push(vec![b0; fan_out]);
        }
        DenseParams { dims: dims.to_vec(), weights, biases, normalize: true }
    }

    /// Default layout: input P, two hidden layers of width `hidden`, output T.
    pub fn with_default_shape(p: usize, hidden: usize, horizon: usize, rng: &mut Pcg64) -> Self {
        DenseParams::init(&[p, hidden, hidden, horizon], rng)
    }

    fn forward_layers(&self, input: &[f64]) -> Vec<Vec<f64>> {
        // returns pre-activations per layer
        let mut pres = Vec::with_capacity(self.weights.len());
        let mut cur = input.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let mut pre = b.clone();
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                pre[j] += row.iter().zip(&cur).map(|(wi, xi)| wi * xi).sum::<f64>();
            }
            if l + 1 < self.weights.len() {
                cur = pre.iter().map(|&v| v.max(0.0)).collect();
            }
            pres.push(pre);
        }
        pres
    }
}

impl VarianceParams {
    /// Horizon length of the head's output.
    pub fn horizon(&self) -> usize {
        match self {
            VarianceParams::Dense(p) => *p.dims.last().unwrap(),
            VarianceParams::SsmBacked(p) => p.horizon,
        }
    }

    /// Expected lookback length, when the architecture fixes one.
    pub fn input_len(&self) -> Option<usize> {
        match self {
            VarianceParams::Dense(p) => Some(p.dims[0]),
            VarianceParams::SsmBacked(_) => None,
        }
    }

    /// State-space variant with the readout biases lifted to
    /// `softplus_inv(1)` so the initial output is near 1, matching the dense
    /// initialization.
    pub fn init_ssm_backed(latent_dim: usize, horizon: usize, rng: &mut Pcg64) -> VarianceParams {
        let mut ssm = SsmParams::init(latent_dim, horizon, rng);
        ssm.readout_b = vec![softplus_inv(1.0); horizon];
        VarianceParams::SsmBacked(ssm)
    }

    /// Strictly positive uncertainty per horizon step.
    pub fn forward_sigma(&self, lookback: &[f64]) -> Result<Vec<f64>, CoreError> {
        if lookback.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { context: "forward_sigma" });
        }
        match self {
            VarianceParams::Dense(p) => {
                if lookback.len() != p.dims[0] {
                    return Err(CoreError::ShapeMismatch {
                        context: "forward_sigma lookback",
                        expected: p.dims[0],
                        got: lookback.len(),
                    });
                }
                let (mean, scale) =
                    if p.normalize { window_stats(lookback) } else { (0.0, 1.0) };
                let input: Vec<f64> = lookback.iter().map(|&x| (x - mean) / scale).collect();
                let pres = p.forward_layers(&input);
                Ok(pres.last().unwrap().iter().map(|&v| scale * softplus(v)).collect())
            }
            VarianceParams::SsmBacked(p) => {
                let trace = p.forward_trace(lookback)?;
                Ok(trace.pre.iter().map(|&v| trace.scale * softplus(v)).collect())
            }
        }
    }

    /// Gradients of `upstream . forward_sigma(lookback)` for the active variant.
    pub fn backward_sigma(
        &self,
        lookback: &[f64],
        upstream: &[f64],
    ) -> Result<VarianceGrads, CoreError> {
        match self {
            VarianceParams::Dense(p) => {
                if lookback.len() != p.dims[0] {
                    return Err(CoreError::ShapeMismatch {
                        context: "backward_sigma lookback",
                        expected: p.dims[0],
                        got: lookback.len(),
                    });
                }
                if lookback.iter().any(|v| !v.is_finite()) {
                    return Err(CoreError::NonFinite { context: "backward_sigma" });
                }
                let (mean, scale) =
                    if p.normalize { window_stats(lookback) } else { (0.0, 1.0) };
                let input: Vec<f64> = lookback.iter().map(|&x| (x - mean) / scale).collect();
                let pres = p.forward_layers(&input);
                let n_layers = p.weights.len();

                // sigma = scale * softplus(pre_last)
                let mut delta: Vec<f64> = pres[n_layers - 1]
                    .iter()
                    .zip(upstream)
                    .map(|(&pre, &g)| g * scale * sigmoid(pre))
                    .collect();

                let mut grad_w = vec![Vec::new(); n_layers];
                let mut grad_b = vec![Vec::new(); n_layers];
                for l in (0..n_layers).rev() {
                    let fan_in = p.dims[l];
                    let prev_act: Vec<f64> = if l == 0 {
                        input.clone()
                    } else {
                        pres[l - 1].iter().map(|&v| v.max(0.0)).collect()
                    };
                    let w = &p.weights[l];
                    grad_b[l] = delta.clone();
                    let mut gw = vec![0.0; w.len()];
                    for j in 0..p.dims[l + 1] {
                        for i in 0..fan_in {
                            gw[j * fan_in + i] = delta[j] * prev_act[i];
                        }
                    }
                    grad_w[l] = gw;
                    if l > 0 {
                        let mut next = vec![0.0; fan_in];
                        for j in 0..p.dims[l + 1] {
                            let row = &w[j * fan_in..(j + 1) * fan_in];
                            for i in 0..fan_in {
                                next[i] += delta[j] * row[i];
                            }
                        }
                        // rectifier gate of the previous layer
                        for (v, &pre) in next.iter_mut().zip(&pres[l - 1]) {
                            if pre <= 0.0 {
                                *v = 0.0;
                            }
                        }
                        delta = next;
                    }
                }
                Ok(VarianceGrads::Dense(DenseGrads { weights: grad_w, biases: grad_b }))
            }
            VarianceParams::SsmBacked(p) => {
                if lookback.iter().any(|v| !v.is_finite()) {
                    return Err(CoreError::NonFinite { context: "backward_sigma" });
                }
                let trace = p.forward_trace(lookback)?;
                let g_pre: Vec<f64> = trace
                    .pre
                    .iter()
                    .zip(upstream)
                    .map(|(&pre, &g)| g * trace.scale * sigmoid(pre))
                    .collect();
                Ok(VarianceGrads::SsmBacked(p.backward_from_pre(&trace, &g_pre)))
            }
        }
    }

    pub fn param_len(&self) -> usize {
        match self {
            VarianceParams::Dense(p) => {
                p.weights.iter().map(|w| w.len()).sum::<usize>()
                    + p.biases.iter().map(|b| b.len()).sum::<usize>()
            }
            VarianceParams::SsmBacked(p) => p.param_len(),
        }
    }

    /// Flat order: for each layer, weights then biases (dense variant), or
    /// the state-space order (ssm variant).
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            VarianceParams::Dense(p) => {
                for (w, b) in p.weights.iter().zip(&p.biases) {
                    out.extend_from_slice(w);
                    out.extend_from_slice(b);
                }
            }
            VarianceParams::SsmBacked(p) => p.write_flat(out),
        }
    }

    pub fn read_flat(&mut self, src: &[f64]) {
        assert_eq!(src.len(), self.param_len(), "flat parameter length mismatch");
        match self {
            VarianceParams::Dense(p) => {
                let mut at = 0;
                for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
                    let (wl, bl) = (w.len(), b.len());
                    w.copy_from_slice(&src[at..at + wl]);
                    at += wl;
                    b.copy_from_slice(&src[at..at + bl]);
                    at += bl;
                }
            }
            VarianceParams::SsmBacked(p) => p.read_flat(src),
        }
    }
}

impl VarianceGrads {
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            VarianceGrads::Dense(g) => {
                for (w, b) in g.weights.iter().zip(&g.biases) {
                    out.extend_from_slice(w);
                    out.extend_from_slice(b);
                }
            }
            VarianceGrads::SsmBacked(g) => g.write_flat(out),
        }
    }

    pub fn accumulate(&mut self, other: &VarianceGrads) {
        match (self, other) {
            (VarianceGrads::Dense(a), VarianceGrads::Dense(b)) => {
                for (wa, wb) in a.weights.iter_mut().zip(&b.weights) {
                    for (x, y) in wa.iter_mut().zip(wb) {
                        *x += y;
                    }
                }
                for (ba, bb) in a.biases.iter_mut().zip(&b.biases) {
                    for (x, y) in ba.iter_mut().zip(bb) {
                        *x += y;
                    }
                }
            }
            (VarianceGrads::SsmBacked(a), VarianceGrads::SsmBacked(b)) => a.accumulate(b),
            _ => panic!("variance gradient variants do not match"),
        }
    }

    pub fn zeros_like(params: &VarianceParams) -> VarianceGrads {
        match params {
            VarianceParams::Dense(p) => VarianceGrads::Dense(DenseGrads {
                weights: p.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
                biases: p.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            }),
            VarianceParams::SsmBacked(p) => VarianceGrads::SsmBacked(SsmGrads::zeros_like(p)),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            VarianceGrads::Dense(g) => {
                for v in g.weights.iter_mut().flatten().chain(g.biases.iter_mut().flatten()) {
                    *v *= factor;
                }
            }
            VarianceGrads::SsmBacked(g) => g.scale(factor),
        }
    }
}
