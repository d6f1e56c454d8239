//! One-hidden-layer ReLU/softmax classifier with analytic backprop.
//!
//! Parameters live in one flat buffer laid out as `w1 | b1 | w2 | b2`, with
//! both weight matrices row-major (`w1` is `hidden x input`, `w2` is
//! `classes x hidden`). Aggregators work on the flat view; the defense reads
//! the output layer one neuron at a time through [`ModelParams::output_neuron`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped here before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::config("input and hidden widths must be positive"));
        }
        if classes < 2 {
            return Err(Error::config("a classifier needs at least two classes"));
        }
        Ok(Dims { input, hidden, classes })
    }

    pub fn param_count(&self) -> usize {
        self.b2_offset() + self.classes
    }

    fn b1_offset(&self) -> usize {
        self.hidden * self.input
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.classes * self.hidden
    }

    /// Length of one output neuron's parameter block (weights plus bias).
    pub fn neuron_len(&self) -> usize {
        self.hidden + 1
    }
}

/// Weights and biases of the classifier, or any quantity with the same shape
/// (gradients, velocities, update differences).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    dims: Dims,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        ModelParams { data: vec![0.0; dims.param_count()], dims }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.param_count() {
            return Err(Error::Shape {
                what: "parameter vector",
                expected: dims.param_count(),
                found: data.len(),
            });
        }
        Ok(ModelParams { dims, data })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let l1 = (6.0 / (dims.input + dims.hidden) as f64).sqrt();
        let l2 = (6.0 / (dims.hidden + dims.classes) as f64).sqrt();
        p.w1_mut().iter_mut().for_each(|w| *w = rng.gen_range(-l1..=l1));
        p.w2_mut().iter_mut().for_each(|w| *w = rng.gen_range(-l2..=l2));
        p
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[..self.dims.b1_offset()]
    }

    pub fn b1(&self) -> &[f64] {
        &self.data[self.dims.b1_offset()..self.dims.w2_offset()]
    }

    pub fn w2(&self) -> &[f64] {
        &self.data[self.dims.w2_offset()..self.dims.b2_offset()]
    }

    pub fn b2(&self) -> &[f64] {
        &self.data[self.dims.b2_offset()..]
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        let end = self.dims.b1_offset();
        &mut self.data[..end]
    }

    pub fn w2_mut(&mut self) -> &mut [f64] {
        let (start, end) = (self.dims.w2_offset(), self.dims.b2_offset());
        &mut self.data[start..end]
    }

    /// Weight row and bias of output neuron `class`.
    pub fn output_neuron(&self, class: usize) -> (&[f64], f64) {
        let h = self.dims.hidden;
        let row = &self.w2()[class * h..(class + 1) * h];
        (row, self.b2()[class])
    }

    /// The output-layer block (`w2 | b2`) as one contiguous slice.
    pub fn output_layer(&self) -> &[f64] {
        &self.data[self.dims.w2_offset()..]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &ModelParams, what: &'static str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape {
                what,
                expected: self.dims.param_count(),
                found: other.dims.param_count(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub hidden_pre: Vec<f64>,
    pub hidden_act: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardTrace {
    /// Index of the largest probability, lowest index on ties.
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lr: f64,
    pub momentum: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Numerically stable softmax (max-logit subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&o| (o - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

pub fn forward(params: &ModelParams, x: &[f64]) -> Result<ForwardTrace> {
    let d = params.dims;
    if x.len() != d.input {
        return Err(Error::Shape { what: "input vector", expected: d.input, found: x.len() });
    }
    let w1 = params.w1();
    let hidden_pre: Vec<f64> = params
        .b1()
        .iter()
        .enumerate()
        .map(|(j, &b)| b + dot(&w1[j * d.input..(j + 1) * d.input], x))
        .collect();
    let hidden_act: Vec<f64> = hidden_pre.iter().map(|&z| z.max(0.0)).collect();
    let w2 = params.w2();
    let logits: Vec<f64> = params
        .b2()
        .iter()
        .enumerate()
        .map(|(i, &b)| b + dot(&w2[i * d.hidden..(i + 1) * d.hidden], &hidden_act))
        .collect();
    let probs = softmax(&logits);
    Ok(ForwardTrace { hidden_pre, hidden_act, logits, probs })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Position of the single 1 in a one-hot vector.
pub fn one_hot_index(y: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if v != 0.0 {
            return Err(Error::contract("label is not a one-hot vector"));
        }
    }
    hot.ok_or_else(|| Error::contract("label is not a one-hot vector"))
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; classes];
    y[class] = 1.0;
    y
}

pub fn cross_entropy(probs: &[f64], y: &[f64]) -> Result<f64> {
    if probs.len() != y.len() {
        return Err(Error::Shape { what: "label vector", expected: probs.len(), found: y.len() });
    }
    let true_class = one_hot_index(y)?;
    Ok(label_loss(probs, true_class))
}

pub(crate) fn label_loss(probs: &[f64], class: usize) -> f64 {
    -probs[class].max(LOG_CLAMP).ln()
}

/// Gradient of the cross-entropy loss w.r.t. every parameter for one example.
///
/// The output error is `delta = probs - y`; the output layer receives
/// `outer(delta, hidden_act)` and `delta`, and the hidden error is
/// `w2^T delta` masked to units with a strictly positive pre-activation.
pub fn backward(params: &ModelParams, x: &[f64], trace: &ForwardTrace, y: &[f64]) -> Result<ModelParams> {
    let d = params.dims;
    if x.len() != d.input {
        return Err(Error::Shape { what: "input vector", expected: d.input, found: x.len() });
    }
    if y.len() != d.classes || trace.probs.len() != d.classes || trace.hidden_act.len() != d.hidden {
        return Err(Error::Shape { what: "trace or label", expected: d.classes, found: y.len() });
    }
    let class = one_hot_index(y)?;
    let mut grad = ModelParams::zeros(d);
    accumulate_backward(params, x, trace, class, 1.0, &mut grad);
    Ok(grad)
}

/// Output-layer error `probs - y` for a true class index.
pub fn output_delta(probs: &[f64], class: usize) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == class { p - 1.0 } else { p })
        .collect()
}

/// Adds `scale * gradient(example)` into `grad`.
pub(crate) fn accumulate_backward(
    params: &ModelParams,
    x: &[f64],
    trace: &ForwardTrace,
    class: usize,
    scale: f64,
    grad: &mut ModelParams,
) {
    let d = params.dims;
    let delta = output_delta(&trace.probs, class);
    let (w1_end, b1_end, w2_end) = (d.b1_offset(), d.w2_offset(), d.b2_offset());
    let w2 = params.w2();

    let mut hidden_delta = vec![0.0; d.hidden];
    {
        let g = grad.as_mut_slice();
        for (i, &di) in delta.iter().enumerate() {
            let sd = scale * di;
            g[w2_end + i] += sd;
            let row = &mut g[b1_end + i * d.hidden..b1_end + (i + 1) * d.hidden];
            for (r, &a) in row.iter_mut().zip(&trace.hidden_act) {
                *r += sd * a;
            }
            for (hd, &w) in hidden_delta.iter_mut().zip(&w2[i * d.hidden..(i + 1) * d.hidden]) {
                *hd += w * di;
            }
        }
        for (j, hd) in hidden_delta.iter().enumerate() {
            if trace.hidden_pre[j] <= 0.0 {
                continue;
            }
            let sd = scale * hd;
            g[w1_end + j] += sd;
            let row = &mut g[j * d.input..(j + 1) * d.input];
            for (r, &xi) in row.iter_mut().zip(x) {
                *r += sd * xi;
            }
        }
    }
}

/// Mean gradient and mean loss over a set of labelled examples.
pub fn mean_gradient<'a, I>(params: &ModelParams, examples: I) -> Result<(ModelParams, f64)>
where
    I: IntoIterator<Item = (&'a [f64], usize)>,
{
    let mut grad = ModelParams::zeros(params.dims);
    let mut loss = 0.0;
    let mut n = 0usize;
    let mut batch = Vec::new();
    for (x, label) in examples {
        if label >= params.dims.classes {
            return Err(Error::contract(format!("label {label} out of range")));
        }
        batch.push((x, label));
    }
    let scale = 1.0 / batch.len().max(1) as f64;
    for (x, label) in batch {
        let trace = forward(params, x)?;
        loss += label_loss(&trace.probs, label);
        accumulate_backward(params, x, &trace, label, scale, &mut grad);
        n += 1;
    }
    Ok((grad, if n == 0 { 0.0 } else { loss / n as f64 }))
}

/// Momentum SGD: `v <- mu * v + g`, then `theta <- theta - lr * v`.
pub fn sgd_step(
    params: &mut ModelParams,
    velocity: &mut ModelParams,
    grad: &ModelParams,
    hp: &Hyperparams,
) -> Result<()> {
    params.check_same_shape(velocity, "velocity")?;
    params.check_same_shape(grad, "gradient")?;
    for ((theta, v), &g) in params.data.iter_mut().zip(velocity.data.iter_mut()).zip(&grad.data) {
        *v = hp.momentum * *v + g;
        *theta -= hp.lr * *v;
    }
    Ok(())
}
