//! Layers with hand-written reverse-mode gradients.
//!
//! Every layer reads its weights from a slice of one flat parameter vector
//! (`offset .. offset + param_count()`) and accumulates gradients into a
//! buffer with the same layout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`, computed from
/// the logit for stability. Returns the loss and its derivative w.r.t. the
/// logit.
pub fn bce_with_logit(logit: f64, target: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - target)
}

fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in out {
        *w = rng.random_range(-limit..limit);
    }
}

/// Fully connected layer `activation(W x + b)`, `W` stored `units x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub units: usize,
    pub activation: Activation,
    pub offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct DenseCache {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, units: usize, activation: Activation, offset: usize) -> Self {
        Dense { inputs, units, activation, offset }
    }

    pub fn param_count(&self) -> usize {
        self.units * self.inputs + self.units
    }

    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        let p = &mut params[self.offset..self.offset + self.param_count()];
        let (w, b) = p.split_at_mut(self.units * self.inputs);
        glorot(rng, self.inputs, self.units, w);
        b.fill(0.0);
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> DenseCache {
        debug_assert_eq!(x.len(), self.inputs);
        let p = &params[self.offset..self.offset + self.param_count()];
        let (w, b) = p.split_at(self.units * self.inputs);
        let pre: Vec<f64> = (0..self.units)
            .map(|u| {
                let row = &w[u * self.inputs..(u + 1) * self.inputs];
                b[u] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let out = pre.iter().map(|&v| self.activation.apply(v)).collect();
        DenseCache { pre, out }
    }

    /// Returns the gradient w.r.t. `x`.
    pub fn backward(&self, params: &[f64], x: &[f64], cache: &DenseCache, dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let n = self.units * self.inputs;
        let w = &params[self.offset..self.offset + n];
        let g = &mut grad[self.offset..self.offset + self.param_count()];
        let mut dx = vec![0.0; self.inputs];
        for u in 0..self.units {
            let dpre = dout[u] * self.activation.derivative(cache.pre[u], cache.out[u]);
            if dpre == 0.0 {
                continue;
            }
            g[n + u] += dpre;
            let row = &w[u * self.inputs..(u + 1) * self.inputs];
            let grow = &mut g[u * self.inputs..(u + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += dpre * x[i];
                dx[i] += dpre * row[i];
            }
        }
        dx
    }
}

/// Valid 1-D convolution over time, ReLU, then global max over time.
/// Kernels are stored `filters x width x channels`, followed by `filters`
/// biases. Inputs shorter than the kernel are zero-padded at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1dMaxPool {
    pub channels: usize,
    pub filters: usize,
    pub width: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ConvCache {
    pub padded: Vec<f64>,
    pub positions: usize,
    /// `positions x filters` pre-activations.
    pub pre: Vec<f64>,
    /// Winning position per filter (lowest index on ties).
    pub argmax: Vec<usize>,
    pub out: Vec<f64>,
}

impl Conv1dMaxPool {
    pub fn new(channels: usize, filters: usize, width: usize, offset: usize) -> Self {
        Conv1dMaxPool { channels, filters, width, offset }
    }

    pub fn param_count(&self) -> usize {
        self.filters * self.width * self.channels + self.filters
    }

    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        let p = &mut params[self.offset..self.offset + self.param_count()];
        let (k, b) = p.split_at_mut(self.filters * self.width * self.channels);
        glorot(rng, self.width * self.channels, self.filters, k);
        b.fill(0.0);
    }

    /// `x` holds `steps x channels` values, row-major.
    pub fn forward(&self, params: &[f64], x: &[f64], steps: usize) -> ConvCache {
        let (c, w, f) = (self.channels, self.width, self.filters);
        let len = steps.max(w);
        let mut padded = vec![0.0; len * c];
        padded[..steps * c].copy_from_slice(&x[..steps * c]);
        let positions = len - w + 1;
        let p = &params[self.offset..self.offset + self.param_count()];
        let (k, b) = p.split_at(f * w * c);
        let mut pre = vec![0.0; positions * f];
        for pos in 0..positions {
            let window = &padded[pos * c..(pos + w) * c];
            for fi in 0..f {
                let kern = &k[fi * w * c..(fi + 1) * w * c];
                pre[pos * f + fi] = b[fi] + kern.iter().zip(window).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let mut argmax = vec![0usize; f];
        let mut out = vec![0.0; f];
        for fi in 0..f {
            let mut best = f64::NEG_INFINITY;
            for pos in 0..positions {
                let v = pre[pos * f + fi].max(0.0);
                if v > best {
                    best = v;
                    argmax[fi] = pos;
                }
            }
            out[fi] = best;
        }
        ConvCache { padded, positions, pre, argmax, out }
    }

    /// Gradient flows only through each filter's winning position.
    pub fn backward(&self, params: &[f64], steps: usize, cache: &ConvCache, dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (c, w, f) = (self.channels, self.width, self.filters);
        let p = &params[self.offset..self.offset + self.param_count()];
        let k = &p[..f * w * c];
        let g = &mut grad[self.offset..self.offset + self.param_count()];
        let mut dpadded = vec![0.0; cache.padded.len()];
        for fi in 0..f {
            let pos = cache.argmax[fi];
            if cache.pre[pos * f + fi] <= 0.0 || dout[fi] == 0.0 {
                continue;
            }
            let d = dout[fi];
            g[f * w * c + fi] += d;
            let window = &cache.padded[pos * c..(pos + w) * c];
            let kern = &k[fi * w * c..(fi + 1) * w * c];
            let gk = &mut g[fi * w * c..(fi + 1) * w * c];
            let dwin = &mut dpadded[pos * c..(pos + w) * c];
            for j in 0..w * c {
                gk[j] += d * window[j];
                dwin[j] += d * kern[j];
            }
        }
        dpadded.truncate(steps * c);
        dpadded
    }
}

/// Single-layer LSTM returning the final hidden state. Weights are stored as
/// input weights `4H x C`, recurrent weights `4H x H` and bias `4H`, with the
/// gate blocks ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    pub steps: usize,
    /// Per step: gate activations `[i, f, g, o]`, each `hidden` long.
    pub gates: Vec<Vec<f64>>,
    /// Cell states `c_0 .. c_T` (index 0 is the zero initial state).
    pub cells: Vec<Vec<f64>>,
    /// Hidden states `h_0 .. h_T`.
    pub hiddens: Vec<Vec<f64>>,
}

impl LstmCache {
    pub fn output(&self) -> &[f64] {
        self.hiddens.last().expect("initial state present")
    }
}

impl Lstm {
    pub fn new(inputs: usize, hidden: usize, offset: usize) -> Self {
        Lstm { inputs, hidden, offset }
    }

    pub fn param_count(&self) -> usize {
        4 * self.hidden * (self.inputs + self.hidden + 1)
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (h4, c, h) = (4 * self.hidden, self.inputs, self.hidden);
        let p = &p[self.offset..self.offset + self.param_count()];
        let (wx, rest) = p.split_at(h4 * c);
        let (wh, b) = rest.split_at(h4 * h);
        (wx, wh, b)
    }

    /// Glorot weights; forget-gate bias starts at 1.
    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        let (h4, c, h) = (4 * self.hidden, self.inputs, self.hidden);
        let p = &mut params[self.offset..self.offset + self.param_count()];
        let (wx, rest) = p.split_at_mut(h4 * c);
        let (wh, b) = rest.split_at_mut(h4 * h);
        glorot(rng, c, h4, wx);
        glorot(rng, h, h4, wh);
        b.fill(0.0);
        b[h..2 * h].fill(1.0);
    }

    pub fn forward(&self, params: &[f64], x: &[f64], steps: usize) -> LstmCache {
        let (c, h) = (self.inputs, self.hidden);
        let (wx, wh, b) = self.split(params);
        let mut cache = LstmCache {
            steps,
            gates: Vec::with_capacity(steps),
            cells: vec![vec![0.0; h]],
            hiddens: vec![vec![0.0; h]],
        };
        let mut a = vec![0.0; 4 * h];
        for t in 0..steps {
            let xt = &x[t * c..(t + 1) * c];
            let hp = &cache.hiddens[t];
            for r in 0..4 * h {
                let wxr = &wx[r * c..(r + 1) * c];
                let whr = &wh[r * h..(r + 1) * h];
                a[r] = b[r]
                    + wxr.iter().zip(xt).map(|(w, v)| w * v).sum::<f64>()
                    + whr.iter().zip(hp).map(|(w, v)| w * v).sum::<f64>();
            }
            let mut gates = vec![0.0; 4 * h];
            for j in 0..h {
                gates[j] = sigmoid(a[j]);
                gates[h + j] = sigmoid(a[h + j]);
                gates[2 * h + j] = a[2 * h + j].tanh();
                gates[3 * h + j] = sigmoid(a[3 * h + j]);
            }
            let cp = &cache.cells[t];
            let cell: Vec<f64> = (0..h).map(|j| gates[h + j] * cp[j] + gates[j] * gates[2 * h + j]).collect();
            let hidden: Vec<f64> = (0..h).map(|j| gates[3 * h + j] * cell[j].tanh()).collect();
            cache.gates.push(gates);
            cache.cells.push(cell);
            cache.hiddens.push(hidden);
        }
        cache
    }

    /// Backpropagation through time from a gradient on the final hidden state.
    pub fn backward(&self, params: &[f64], x: &[f64], cache: &LstmCache, dh_last: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (c, h) = (self.inputs, self.hidden);
        let h4 = 4 * h;
        let (wx, wh, _) = self.split(params);
        let g = &mut grad[self.offset..self.offset + self.param_count()];
        let (gwx, rest) = g.split_at_mut(h4 * c);
        let (gwh, gb) = rest.split_at_mut(h4 * h);
        let mut dx = vec![0.0; cache.steps * c];
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; h];
        let mut da = vec![0.0; h4];
        for t in (0..cache.steps).rev() {
            let gates = &cache.gates[t];
            let cell = &cache.cells[t + 1];
            let cprev = &cache.cells[t];
            let hprev = &cache.hiddens[t];
            for j in 0..h {
                let (i, f, gg, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = cell[j].tanh();
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * o * (1.0 - tc * tc);
                da[j] = dc[j] * gg * i * (1.0 - i);
                da[h + j] = dc[j] * cprev[j] * f * (1.0 - f);
                da[2 * h + j] = dc[j] * i * (1.0 - gg * gg);
                da[3 * h + j] = d_o * o * (1.0 - o);
                dc[j] *= f;
            }
            let xt = &x[t * c..(t + 1) * c];
            let dxt = &mut dx[t * c..(t + 1) * c];
            let mut dh_prev = vec![0.0; h];
            for r in 0..h4 {
                let d = da[r];
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                let wxr = &wx[r * c..(r + 1) * c];
                let gwxr = &mut gwx[r * c..(r + 1) * c];
                for k in 0..c {
                    gwxr[k] += d * xt[k];
                    dxt[k] += d * wxr[k];
                }
                let whr = &wh[r * h..(r + 1) * h];
                let gwhr = &mut gwh[r * h..(r + 1) * h];
                for k in 0..h {
                    gwhr[k] += d * hprev[k];
                    dh_prev[k] += d * whr[k];
                }
            }
            dh = dh_prev;
        }
        dx
    }
}

/// Embedding table applied to one/multi-hot rows: each output row is the
/// weighted sum of the table rows selected by the input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vocab: usize,
    pub dim: usize,
    pub offset: usize,
}

impl Embedding {
    pub fn new(vocab: usize, dim: usize, offset: usize) -> Self {
        Embedding { vocab, dim, offset }
    }

    pub fn param_count(&self) -> usize {
        self.vocab * self.dim
    }

    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        glorot(rng, self.vocab, self.dim, &mut params[self.offset..self.offset + self.param_count()]);
    }

    /// `x` is `rows x vocab`; returns `rows x dim`.
    pub fn forward(&self, params: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
        let table = &params[self.offset..self.offset + self.param_count()];
        let mut out = vec![0.0; rows * self.dim];
        for r in 0..rows {
            let xr = &x[r * self.vocab..(r + 1) * self.vocab];
            let orow = &mut out[r * self.dim..(r + 1) * self.dim];
            for (v, &weight) in xr.iter().enumerate() {
                if weight == 0.0 {
                    continue;
                }
                let e = &table[v * self.dim..(v + 1) * self.dim];
                for d in 0..self.dim {
                    orow[d] += weight * e[d];
                }
            }
        }
        out
    }

    pub fn backward(&self, params: &[f64], x: &[f64], rows: usize, dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let table = &params[self.offset..self.offset + self.param_count()];
        let g = &mut grad[self.offset..self.offset + self.param_count()];
        let mut dx = vec![0.0; rows * self.vocab];
        for r in 0..rows {
            let drow = &dout[r * self.dim..(r + 1) * self.dim];
            for v in 0..self.vocab {
                let e = &table[v * self.dim..(v + 1) * self.dim];
                dx[r * self.vocab + v] = e.iter().zip(drow).map(|(a, b)| a * b).sum();
                let weight = x[r * self.vocab + v];
                if weight != 0.0 {
                    let gv = &mut g[v * self.dim..(v + 1) * self.dim];
                    for d in 0..self.dim {
                        gv[d] += weight * drow[d];
                    }
                }
            }
        }
        dx
    }
}

/// Inverted dropout mask: kept units are scaled by `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// `activation(W x + b)` on explicit tensors: `x` is `[n]`, `W` is `[m, n]`,
/// `b` is `[m]`.
pub fn forward_dense(input: &Tensor, weights: &Tensor, bias: &Tensor, activation: Activation) -> Result<Tensor> {
    let n = input.len();
    if weights.shape().len() != 2 || weights.shape()[1] != n || bias.len() != weights.shape()[0] {
        bail!(
            Shape,
            "dense: input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        );
    }
    let m = bias.len();
    let layer = Dense::new(n, m, activation, 0);
    let mut params = weights.data().to_vec();
    params.extend_from_slice(bias.data());
    Ok(Tensor::vector(layer.forward(&params, input.data()).out))
}

/// Convolution + ReLU + global max pool on explicit tensors: `input` is
/// `[T, C]`, `kernels` is `[F, w, C]`, `bias` is `[F]`.
pub fn forward_conv1d_maxpool(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let ks = kernels.shape();
    if ks.len() != 3 || input.shape().len() != 2 || ks[2] != input.cols() || bias.len() != ks[0] {
        bail!(
            Shape,
            "conv1d: input {:?}, kernels {:?}, bias {:?}",
            input.shape(),
            ks,
            bias.shape()
        );
    }
    let layer = Conv1dMaxPool::new(ks[2], ks[0], ks[1], 0);
    let mut params = kernels.data().to_vec();
    params.extend_from_slice(bias.data());
    Ok(Tensor::vector(layer.forward(&params, input.data(), input.rows()).out))
}

/// Explicit LSTM weights: `w_x` is `[4H, C]`, `w_h` is `[4H, H]`, `b` is `[4H]`.
#[derive(Debug, Clone)]
pub struct LstmWeights {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

/// Final hidden state of an LSTM over `input` (`[T, C]`). An empty sequence
/// yields the zero state and `true` in the second slot.
pub fn forward_lstm(input: &Tensor, weights: &LstmWeights) -> Result<(Tensor, bool)> {
    let h4 = weights.b.len();
    if h4 % 4 != 0 || h4 == 0 {
        bail!(Shape, "lstm bias length {} is not a positive multiple of 4", h4);
    }
    let h = h4 / 4;
    let c = input.cols();
    if weights.w_x.shape() != [h4, c] || weights.w_h.shape() != [h4, h] {
        bail!(
            Shape,
            "lstm: input {:?}, w_x {:?}, w_h {:?}",
            input.shape(),
            weights.w_x.shape(),
            weights.w_h.shape()
        );
    }
    if input.rows() == 0 || input.is_empty() {
        return Ok((Tensor::zeros(&[h]), true));
    }
    let layer = Lstm::new(c, h, 0);
    let mut params = weights.w_x.data().to_vec();
    params.extend_from_slice(weights.w_h.data());
    params.extend_from_slice(weights.b.data());
    let cache = layer.forward(&params, input.data(), input.rows());
    Ok((Tensor::vector(cache.output().to_vec()), false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_hand_values() {
        let x = Tensor::vector(vec![1.0, 1.0]);
        let w = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::vector(vec![0.0, 1.0]);
        assert_eq!(forward_dense(&x, &w, &b, Activation::Identity).unwrap().data(), &[3.0, 8.0]);

        let zero = Tensor::zeros(&[3, 2]);
        let out = forward_dense(&x, &zero, &Tensor::zeros(&[3]), Activation::Relu).unwrap();
        assert_eq!(out.data(), &[0.0; 3]);

        let x = Tensor::vector(vec![-1.5, 2.0, 0.25]);
        let eye = Tensor::matrix(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let out = forward_dense(&x, &eye, &Tensor::zeros(&[3]), Activation::Identity).unwrap();
        assert_eq!(out, x);

        assert!(forward_dense(&x, &w, &b, Activation::Identity).is_err());
    }

    #[test]
    fn conv_hand_values() {
        let input = Tensor::matrix(3, 1, vec![1.0, 5.0, 3.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let out = forward_conv1d_maxpool(&input, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.data(), &[5.0]);

        let input = Tensor::matrix(3, 1, vec![3.0, 1.0, 4.0]).unwrap();
        let k = Tensor::new(vec![1, 2, 1], vec![1.0, -1.0]).unwrap();
        let out = forward_conv1d_maxpool(&input, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.data(), &[2.0]);

        let zeros = Tensor::zeros(&[5, 2]);
        let k = Tensor::new(vec![3, 2, 2], (0..12).map(|i| i as f64).collect()).unwrap();
        let out = forward_conv1d_maxpool(&zeros, &k, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(out.data(), &[0.0; 3]);

        let bad = Tensor::new(vec![1, 2, 3], vec![0.0; 6]).unwrap();
        assert!(forward_conv1d_maxpool(&input, &bad, &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn conv_pads_short_inputs() {
        let input = Tensor::matrix(1, 1, vec![2.0]).unwrap();
        let k = Tensor::new(vec![1, 3, 1], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(forward_conv1d_maxpool(&input, &k, &Tensor::zeros(&[1])).unwrap().data(), &[2.0]);
    }

    #[test]
    fn maxpool_ties_route_to_lowest_index() {
        let layer = Conv1dMaxPool::new(1, 1, 1, 0);
        let params = vec![1.0, 0.0];
        let x = [2.0, 7.0, 7.0, 1.0];
        let cache = layer.forward(&params, &x, 4);
        assert_eq!(cache.argmax, vec![1]);
        let mut grad = vec![0.0; 2];
        let dx = layer.backward(&params, 4, &cache, &[1.0], &mut grad);
        assert_eq!(dx, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(grad, vec![7.0, 1.0]);
    }

    fn lstm_weights(h: usize, c: usize, fill: f64) -> LstmWeights {
        LstmWeights {
            w_x: Tensor::new(vec![4 * h, c], vec![fill; 4 * h * c]).unwrap(),
            w_h: Tensor::new(vec![4 * h, h], vec![fill; 4 * h * h]).unwrap(),
            b: Tensor::vector(vec![fill; 4 * h]),
        }
    }

    #[test]
    fn lstm_zero_weights_give_zero_state() {
        let x = Tensor::matrix(4, 2, vec![1.0, -2.0, 3.0, 0.5, 2.0, 2.0, -1.0, 0.0]).unwrap();
        let (h, empty) = forward_lstm(&x, &lstm_weights(3, 2, 0.0)).unwrap();
        assert!(!empty);
        assert_eq!(h.data(), &[0.0; 3]);
        let zeros = Tensor::zeros(&[4, 2]);
        let w = lstm_weights(3, 2, 0.0);
        assert_eq!(forward_lstm(&zeros, &w).unwrap().0.data(), &[0.0; 3]);
        let (h, empty) = forward_lstm(&Tensor::zeros(&[0, 2]), &w).unwrap();
        assert!(empty);
        assert_eq!(h.data(), &[0.0; 3]);
    }

    #[test]
    fn lstm_single_step_scalar() {
        // H = 1, C = 1, x = 1: input weights [0.5, -0.3, 0.8, 0.2], biases [0.1, 0.2, -0.1, 0.05]
        let w = LstmWeights {
            w_x: Tensor::matrix(4, 1, vec![0.5, -0.3, 0.8, 0.2]).unwrap(),
            w_h: Tensor::matrix(4, 1, vec![0.7, 0.7, 0.7, 0.7]).unwrap(),
            b: Tensor::vector(vec![0.1, 0.2, -0.1, 0.05]),
        };
        let x = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(0.6);
        let g = (0.7f64).tanh();
        let o = s(0.25);
        let c = i * g; // forget gate multiplies c_0 = 0
        let expected = o * c.tanh();
        let (h, _) = forward_lstm(&x, &w).unwrap();
        assert!((h.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn bce_matches_direct_formula() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (5.0, 0.0), (-30.0, 1.0)] {
            let p: f64 = sigmoid(z);
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            let (loss, dz) = bce_with_logit(z, y);
            assert!((loss - direct).abs() < 1e-9 * direct.max(1.0));
            assert!((dz - (p - y)).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_mask_scales() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = dropout_mask(10_000, 0.3, &mut rng);
        assert!(m.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-12));
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
        assert_eq!(dropout_mask(4, 0.0, &mut rng), vec![1.0; 4]);
    }
}
