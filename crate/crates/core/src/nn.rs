//! Small dense networks with batched reverse-mode gradients and Adam.
//!
//! Weights are stored `in × out`, so a batch `X` (rows are samples) maps to
//! `X W + b`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use thiserror::Error;

use crate::{Error, Result};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("network needs at least an input and an output width")]
    TooFewLayers,
    #[error("layer widths must be positive")]
    ZeroWidth,
    #[error("expected input width {expected}, got {got}")]
    InputWidth { expected: usize, got: usize },
    #[error("expected output width {expected}, got {got}")]
    OutputWidth { expected: usize, got: usize },
    #[error("gradient shapes do not match the network")]
    ShapeMismatch,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Relu => 1,
            Activation::Linear => 0,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

/// Per-layer `(weight, bias)` gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        let mut i = i;
        for (w, b) in &self.layers {
            if i < w.len() {
                return w[[i / w.ncols(), i % w.ncols()]];
            }
            i -= w.len();
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("gradient index out of range")
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("non-empty cache")
    }
}

fn activate(z: &mut Array2<f64>, a: Activation) {
    if a == Activation::Relu {
        z.mapv_inplace(|v| v.max(0.0));
    }
}

impl DenseNet {
    fn check_widths(widths: &[usize]) -> Result<(), NetError> {
        if widths.len() < 2 {
            return Err(NetError::TooFewLayers);
        }
        if widths.contains(&0) {
            return Err(NetError::ZeroWidth);
        }
        Ok(())
    }

    /// ReLU hidden layers, linear output, biases zero. Hidden weights are
    /// uniform in `±sqrt(6 / fan_in)`; the linear output layer, which has no
    /// ReLU halving to compensate, uses `±sqrt(3 / fan_in)`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self, NetError> {
        Self::check_widths(widths)?;
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fi, fo) = (widths[i], widths[i + 1]);
                let gain = if i + 1 == n { 3.0 } else { 6.0 };
                let bound = (gain / fi as f64).sqrt();
                let weight = Array2::from_shape_fn((fi, fo), |_| rng.random_range(-bound..bound));
                Dense {
                    weight,
                    bias: Array1::zeros(fo),
                    activation: if i + 1 == n {
                        Activation::Linear
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Ok(DenseNet { layers })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self, NetError> {
        Self::check_widths(widths)?;
        let n = widths.len() - 1;
        Ok(DenseNet {
            layers: (0..n)
                .map(|i| Dense {
                    weight: Array2::zeros((widths[i], widths[i + 1])),
                    bias: Array1::zeros(widths[i + 1]),
                    activation: if i + 1 == n {
                        Activation::Linear
                    } else {
                        Activation::Relu
                    },
                })
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::TooFewLayers);
        }
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(NetError::ShapeMismatch);
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.outputs()) {
            return Err(NetError::ShapeMismatch);
        }
        Ok(DenseNet { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].inputs()];
        w.extend(self.layers.iter().map(Dense::outputs));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn param_slot(&mut self, i: usize) -> &mut f64 {
        let mut i = i;
        for l in &mut self.layers {
            let wl = l.weight.len();
            if i < wl {
                let c = l.weight.ncols();
                return &mut l.weight[[i / c, i % c]];
            }
            i -= wl;
            if i < l.bias.len() {
                return &mut l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn param(&self, i: usize) -> f64 {
        let mut i = i;
        for l in &self.layers {
            if i < l.weight.len() {
                let c = l.weight.ncols();
                return l.weight[[i / c, i % c]];
            }
            i -= l.weight.len();
            if i < l.bias.len() {
                return l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        *self.param_slot(i) = v;
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::InputWidth {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_batch(view).into_raw_vec_and_offset().0)
    }

    /// Forward pass over rows of `x`. Panics on width mismatch.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.input_dim(), "input width");
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.weight);
            z += &l.bias;
            activate(&mut z, l.activation);
            h = z;
        }
        h
    }

    /// Continues a forward pass from the pre-activation `z` of `layer`.
    pub fn forward_from_preactivation(&self, layer: usize, mut z: Array2<f64>) -> Array2<f64> {
        activate(&mut z, self.layers[layer].activation);
        for l in &self.layers[layer + 1..] {
            let mut n = z.dot(&l.weight);
            n += &l.bias;
            activate(&mut n, l.activation);
            z = n;
        }
        z
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> ForwardCache {
        assert_eq!(x.ncols(), self.input_dim(), "input width");
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for l in &self.layers {
            let mut z = acts.last().expect("input pushed").dot(&l.weight);
            z += &l.bias;
            activate(&mut z, l.activation);
            acts.push(z);
        }
        ForwardCache { acts }
    }

    /// Parameter gradients and input gradient for upstream gradient `dy`
    /// on the output of `cache`.
    pub fn backward(&self, cache: &ForwardCache, dy: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>), NetError> {
        let out = cache.output();
        if dy.dim() != out.dim() || cache.acts.len() != self.layers.len() + 1 {
            return Err(NetError::ShapeMismatch);
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = dy.to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            if l.activation == Activation::Relu {
                Zip::from(&mut d).and(&cache.acts[i + 1]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            let input = &cache.acts[i];
            let gw = input.t().dot(&d);
            let gb = d.sum_axis(Axis(0));
            let dx = d.dot(&l.weight.t());
            grads.push((gw, gb));
            d = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, d))
    }

    /// `self ← (1 - rate) self + rate other`.
    pub fn polyak_from(&mut self, other: &DenseNet, rate: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            Zip::from(&mut a.weight)
                .and(&b.weight)
                .for_each(|x, &y| *x = (1.0 - rate) * *x + rate * y);
            Zip::from(&mut a.bias)
                .and(&b.bias)
                .for_each(|x, &y| *x = (1.0 - rate) * *x + rate * y);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"DNET");
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for w in self.widths() {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        for l in &self.layers {
            out.push(l.activation.code());
        }
        for l in &self.layers {
            for v in l.weight.iter().chain(l.bias.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = bytes;
        let net = Self::read_from(&mut r)?;
        if !r.is_empty() {
            return Err(NetError::Checkpoint("trailing bytes".into()));
        }
        Ok(net)
    }

    /// Reads one network from the front of `r`, advancing it.
    pub fn read_from(r: &mut &[u8]) -> Result<Self, NetError> {
        let bad = |m: &str| NetError::Checkpoint(m.to_string());
        let mut take = |n: usize| -> Result<Vec<u8>, NetError> {
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf).map_err(|_| bad("truncated"))?;
            Ok(buf)
        };
        if take(4)? != b"DNET" {
            return Err(bad("missing magic"));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes"));
        if version != 1 {
            return Err(NetError::Checkpoint(format!("unsupported version {version}")));
        }
        take(2)?;
        let count = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        if count == 0 || count > 64 {
            return Err(bad("implausible layer count"));
        }
        let mut widths = Vec::with_capacity(count + 1);
        for _ in 0..=count {
            widths.push(u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize);
        }
        if widths.contains(&0) {
            return Err(bad("zero width"));
        }
        let codes = take(count)?;
        let mut layers = Vec::with_capacity(count);
        for i in 0..count {
            let (fi, fo) = (widths[i], widths[i + 1]);
            let activation = Activation::from_code(codes[i]).ok_or_else(|| bad("unknown activation"))?;
            let raw = take(8 * (fi * fo + fo))?;
            let vals: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let weight = Array2::from_shape_vec((fi, fo), vals[..fi * fo].to_vec()).expect("sized");
            let bias = Array1::from(vals[fi * fo..].to_vec());
            layers.push(Dense {
                weight,
                bias,
                activation,
            });
        }
        Ok(DenseNet { layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, g: &Gradients) -> Result<(), NetError> {
        if g.layers.len() != net.layers.len()
            || g.layers.iter().zip(&net.layers).any(|((gw, gb), l)| gw.dim() != l.weight.dim() || gb.len() != l.bias.len())
        {
            return Err(NetError::ShapeMismatch);
        }
        self.steps += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.steps as i32);
        let c2 = 1.0 - b2.powi(self.steps as i32);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= lr * mh / (vh.sqrt() + eps);
        };
        for (i, l) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &g.layers[i];
            let (mw, mb) = &mut self.m.layers[i];
            let (vw, vb) = &mut self.v.layers[i];
            Zip::from(&mut l.weight)
                .and(mw)
                .and(vw)
                .and(gw)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut l.bias)
                .and(mb)
                .and(vb)
                .and(gb)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}
