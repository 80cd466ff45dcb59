//! Tape-based reverse-mode differentiation over dense `f64` arrays, and Adam.
//!
//! Arrays are row-major with the channel axis last, so an image stack has
//! shape `[height, width, channels]`. A [`Graph`] records nodes in creation
//! order; [`Graph::backward`] sweeps them in reverse.

use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Backward rule of a user-defined node: maps the upstream gradient to one
/// gradient contribution per input, in input order.
pub type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Vec<f64>>>;

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Affine(Var, f64),
    ChannelLinear(Var, Var, Var),
    DepthwiseScale(Var, Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    SoftRound(Var),
    SoftmaxChannels(Var),
    GaussianMf(Var, Var, Var),
    Tv(Var),
    BceMasked(Var, Vec<f64>, Vec<bool>),
    Concat(Vec<Var>),
    Select(Var, usize),
    Sum(Var),
    Mean(Var),
    Custom(Vec<Var>, BackwardFn),
}

struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// Slope of [`soft_round`](Graph::soft_round).
pub const SOFT_ROUND_GAIN: f64 = 10.0;
/// Probability clamp of [`bce_masked`](Graph::bce_masked).
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn graph_err(msg: impl Into<String>) -> Error {
    Error::Graph(msg.into())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn channels(shape: &[usize]) -> usize {
    *shape.last().unwrap_or(&1)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let n = value.len();
        self.nodes.push(Node {
            shape,
            value,
            grad: vec![0.0; n],
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, shape: &[usize], value: Vec<f64>, requires_grad: bool) -> Result<Var> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || n != value.len() {
            return Err(graph_err(format!("shape {shape:?} does not hold {} values", value.len())));
        }
        Ok(self.push(shape.to_vec(), value, requires_grad, Op::Leaf))
    }

    /// Trainable leaf.
    pub fn param(&mut self, shape: &[usize], value: Vec<f64>) -> Result<Var> {
        self.leaf(shape, value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, shape: &[usize], value: Vec<f64>) -> Result<Var> {
        self.leaf(shape, value, false)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].grad
    }

    /// Clears every gradient, leaves included.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(graph_err(format!("{op}: shapes {:?} and {:?} differ", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(a, b, name)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let rg = self.needs(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), value, rg, op))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x).iter().map(|&v| f(v)).collect();
        let rg = self.needs(&[x]);
        self.push(self.shape(x).to_vec(), value, rg, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "hadamard", |x, y| x * y, Op::Hadamard(a, b))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.unary(x, |v| scale * v + shift, Op::Affine(x, scale))
    }

    pub fn scalar_mul(&mut self, x: Var, k: f64) -> Var {
        self.affine(x, k, 0.0)
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    /// Per-pixel `y = W x + b`, with `W` of shape `[out, in]` and `b` of `[out]`.
    pub fn channel_linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let cin = channels(&xs);
        let ws = self.shape(w);
        if ws.len() != 2 || ws[1] != cin {
            return Err(graph_err(format!("channel_linear: weight {ws:?} incompatible with input {xs:?}")));
        }
        let cout = ws[0];
        if self.shape(b) != [cout] {
            return Err(graph_err(format!("channel_linear: bias {:?} must be [{cout}]", self.shape(b))));
        }
        let pixels = self.value(x).len() / cin;
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let mut out = vec![0.0; pixels * cout];
        for p in 0..pixels {
            let xi = &xv[p * cin..(p + 1) * cin];
            for o in 0..cout {
                let row = &wv[o * cin..(o + 1) * cin];
                out[p * cout + o] = bv[o] + row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let mut shape = xs;
        *shape.last_mut().expect("non-empty") = cout;
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(shape, out, rg, Op::ChannelLinear(x, w, b)))
    }

    /// Per-channel `y = w_c x + b_c`.
    pub fn depthwise_scale(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let c = channels(self.shape(x));
        if self.shape(w) != [c] || self.shape(b) != [c] {
            return Err(graph_err(format!(
                "depthwise_scale: weight {:?} and bias {:?} must be [{c}]",
                self.shape(w),
                self.shape(b)
            )));
        }
        let (wv, bv) = (self.value(w), self.value(b));
        let value = self.value(x).iter().enumerate().map(|(i, &v)| wv[i % c] * v + bv[i % c]).collect();
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(self.shape(x).to_vec(), value, rg, Op::DepthwiseScale(x, w, b)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { slope * v }, Op::LeakyRelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    /// `sigmoid(10 (x - 0.5))`.
    pub fn soft_round(&mut self, x: Var) -> Var {
        self.unary(x, |v| sigmoid(SOFT_ROUND_GAIN * (v - 0.5)), Op::SoftRound(x))
    }

    pub fn softmax_channels(&mut self, x: Var) -> Var {
        let c = channels(self.shape(x));
        let mut value = self.value(x).to_vec();
        for px in value.chunks_mut(c) {
            let m = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in px.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            px.iter_mut().for_each(|v| *v /= s);
        }
        let rg = self.needs(&[x]);
        self.push(self.shape(x).to_vec(), value, rg, Op::SoftmaxChannels(x))
    }

    /// `exp(-(x - m)^2 / (2 s^2))` with scalar `m`, `s` of shape `[1]`.
    pub fn gaussian_mf(&mut self, x: Var, m: Var, s: Var) -> Result<Var> {
        if self.shape(m) != [1] || self.shape(s) != [1] {
            return Err(graph_err("gaussian_mf: centre and width must have shape [1]"));
        }
        let (mv, sv) = (self.value(m)[0], self.value(s)[0]);
        if sv == 0.0 {
            return Err(graph_err("gaussian_mf: width must be nonzero"));
        }
        let value = self.value(x).iter().map(|&v| (-(v - mv).powi(2) / (2.0 * sv * sv)).exp()).collect();
        let rg = self.needs(&[x, m, s]);
        Ok(self.push(self.shape(x).to_vec(), value, rg, Op::GaussianMf(x, m, s)))
    }

    fn tv_dims(&self, x: Var) -> Result<(usize, usize, usize)> {
        let s = self.shape(x);
        match s.len() {
            2 => Ok((s[0], s[1], 1)),
            3 => Ok((s[0], s[1], s[2])),
            _ => Err(graph_err(format!("tv_penalty needs a [h, w] or [h, w, c] array, got {s:?}"))),
        }
    }

    /// Mean over pixels of `|right - here| + |below - here|`, summed over channels.
    pub fn tv_penalty(&mut self, x: Var) -> Result<Var> {
        let (h, w, c) = self.tv_dims(x)?;
        let v = self.value(x);
        let mut total = 0.0;
        for r in 0..h {
            for col in 0..w {
                for k in 0..c {
                    let here = v[(r * w + col) * c + k];
                    if col + 1 < w {
                        total += (v[(r * w + col + 1) * c + k] - here).abs();
                    }
                    if r + 1 < h {
                        total += (v[((r + 1) * w + col) * c + k] - here).abs();
                    }
                }
            }
        }
        let rg = self.needs(&[x]);
        Ok(self.push(vec![1], vec![total / (h * w) as f64], rg, Op::Tv(x)))
    }

    /// Binary cross-entropy averaged over positions where `mask` is set.
    pub fn bce_masked(&mut self, p: Var, target: &[f64], mask: &[bool]) -> Result<Var> {
        let n = self.value(p).len();
        if target.len() != n || mask.len() != n {
            return Err(graph_err(format!(
                "bce_masked: prediction has {n} values, target {}, mask {}",
                target.len(),
                mask.len()
            )));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(graph_err("bce_masked: empty mask"));
        }
        let mut total = 0.0;
        for ((&pv, &t), &m) in self.value(p).iter().zip(target).zip(mask) {
            if m {
                let pc = pv.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                total -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
            }
        }
        let rg = self.needs(&[p]);
        Ok(self.push(vec![1], vec![total / count as f64], rg, Op::BceMasked(p, target.to_vec(), mask.to_vec())))
    }

    /// Concatenates along the channel axis; leading dimensions must agree.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| graph_err("concat_channels: no inputs"))?;
        let lead = self.shape(*first)[..self.shape(*first).len() - 1].to_vec();
        let mut total_c = 0;
        for &p in parts {
            let s = self.shape(p);
            if s[..s.len() - 1] != lead[..] {
                return Err(graph_err(format!("concat_channels: shape {s:?} does not match leading {lead:?}")));
            }
            total_c += channels(s);
        }
        let pixels: usize = lead.iter().product();
        let mut value = Vec::with_capacity(pixels * total_c);
        for px in 0..pixels {
            for &p in parts {
                let c = channels(self.shape(p));
                value.extend_from_slice(&self.value(p)[px * c..(px + 1) * c]);
            }
        }
        let mut shape = lead;
        shape.push(total_c);
        let rg = self.needs(parts);
        Ok(self.push(shape, value, rg, Op::Concat(parts.to_vec())))
    }

    /// Channel `k` as a single-channel array.
    pub fn select_channel(&mut self, x: Var, k: usize) -> Result<Var> {
        let c = channels(self.shape(x));
        if k >= c {
            return Err(graph_err(format!("select_channel: channel {k} of {c}")));
        }
        let value = self.value(x).iter().skip(k).step_by(c).copied().collect();
        let mut shape = self.shape(x).to_vec();
        *shape.last_mut().expect("non-empty") = 1;
        let rg = self.needs(&[x]);
        Ok(self.push(shape, value, rg, Op::Select(x, k)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        let rg = self.needs(&[x]);
        self.push(vec![1], vec![s], rg, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.needs(&[x]);
        self.push(vec![1], vec![s], rg, Op::Mean(x))
    }

    /// Node with externally computed value and backward rule.
    pub fn custom(&mut self, inputs: &[Var], shape: &[usize], value: Vec<f64>, backward: BackwardFn) -> Result<Var> {
        if shape.iter().product::<usize>() != value.len() {
            return Err(graph_err(format!("custom: shape {shape:?} does not hold {} values", value.len())));
        }
        let rg = self.needs(inputs);
        Ok(self.push(shape.to_vec(), value, rg, Op::Custom(inputs.to_vec(), backward)))
    }

    fn accumulate(&mut self, v: Var, contrib: impl IntoIterator<Item = (usize, f64)>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        for (i, g) in contrib {
            node.grad[i] += g;
        }
    }

    fn accumulate_all(&mut self, v: Var, contrib: &[f64]) {
        self.accumulate(v, contrib.iter().copied().enumerate());
    }

    /// Reverse sweep from a scalar `loss`. Intermediate gradients are reset
    /// first; gradients of leaves accumulate across calls.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        for n in &mut self.nodes {
            if !matches!(n.op, Op::Leaf) {
                n.grad.iter_mut().for_each(|g| *g = 0.0);
            }
        }
        self.nodes[loss.0].grad[0] += 1.0;
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad || matches!(self.nodes[idx].op, Op::Leaf) {
                continue;
            }
            let g = std::mem::take(&mut self.nodes[idx].grad);
            let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
            self.propagate(idx, &op, &g);
            self.nodes[idx].op = op;
            self.nodes[idx].grad = g;
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, op: &Op, g: &[f64]) {
        let y = std::mem::take(&mut self.nodes[idx].value);
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate_all(*a, g);
                self.accumulate_all(*b, g);
            }
            Op::Sub(a, b) => {
                self.accumulate_all(*a, g);
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                self.accumulate_all(*b, &neg);
            }
            Op::Hadamard(a, b) => {
                let ga: Vec<f64> = g.iter().zip(self.value(*b)).map(|(g, v)| g * v).collect();
                let gb: Vec<f64> = g.iter().zip(self.value(*a)).map(|(g, v)| g * v).collect();
                self.accumulate_all(*a, &ga);
                self.accumulate_all(*b, &gb);
            }
            Op::Affine(x, k) => {
                let gx: Vec<f64> = g.iter().map(|v| v * k).collect();
                self.accumulate_all(*x, &gx);
            }
            Op::ChannelLinear(x, w, b) => {
                let cin = channels(self.shape(*x));
                let cout = self.shape(*w)[0];
                let pixels = g.len() / cout;
                let (xv, wv) = (self.value(*x), self.value(*w));
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                let mut gb = vec![0.0; cout];
                for p in 0..pixels {
                    for o in 0..cout {
                        let go = g[p * cout + o];
                        if go == 0.0 {
                            continue;
                        }
                        gb[o] += go;
                        for i in 0..cin {
                            gx[p * cin + i] += go * wv[o * cin + i];
                            gw[o * cin + i] += go * xv[p * cin + i];
                        }
                    }
                }
                self.accumulate_all(*x, &gx);
                self.accumulate_all(*w, &gw);
                self.accumulate_all(*b, &gb);
            }
            Op::DepthwiseScale(x, w, b) => {
                let c = channels(self.shape(*x));
                let (xv, wv) = (self.value(*x), self.value(*w));
                let gx: Vec<f64> = g.iter().enumerate().map(|(i, g)| g * wv[i % c]).collect();
                let mut gw = vec![0.0; c];
                let mut gb = vec![0.0; c];
                for (i, (&gi, &xi)) in g.iter().zip(xv).enumerate() {
                    gw[i % c] += gi * xi;
                    gb[i % c] += gi;
                }
                self.accumulate_all(*x, &gx);
                self.accumulate_all(*w, &gw);
                self.accumulate_all(*b, &gb);
            }
            Op::Relu(x) => {
                let gx: Vec<f64> = g.iter().zip(self.value(*x)).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate_all(*x, &gx);
            }
            Op::LeakyRelu(x, slope) => {
                let gx: Vec<f64> = g
                    .iter()
                    .zip(self.value(*x))
                    .map(|(g, &v)| if v > 0.0 { *g } else { g * slope })
                    .collect();
                self.accumulate_all(*x, &gx);
            }
            Op::Sigmoid(x) => {
                let gx: Vec<f64> = g.iter().zip(&y).map(|(g, s)| g * s * (1.0 - s)).collect();
                self.accumulate_all(*x, &gx);
            }
            Op::SoftRound(x) => {
                let gx: Vec<f64> = g.iter().zip(&y).map(|(g, s)| g * SOFT_ROUND_GAIN * s * (1.0 - s)).collect();
                self.accumulate_all(*x, &gx);
            }
            Op::SoftmaxChannels(x) => {
                let c = channels(self.shape(*x));
                let mut gx = vec![0.0; g.len()];
                for ((gp, yp), out) in g.chunks(c).zip(y.chunks(c)).zip(gx.chunks_mut(c)) {
                    let dot: f64 = gp.iter().zip(yp).map(|(a, b)| a * b).sum();
                    for k in 0..c {
                        out[k] = yp[k] * (gp[k] - dot);
                    }
                }
                self.accumulate_all(*x, &gx);
            }
            Op::GaussianMf(x, m, s) => {
                let (mv, sv) = (self.value(*m)[0], self.value(*s)[0]);
                let s2 = sv * sv;
                let mut gx = Vec::with_capacity(g.len());
                let (mut gm, mut gs) = (0.0, 0.0);
                for ((&gi, &yi), &xi) in g.iter().zip(&y).zip(self.value(*x)) {
                    let d = xi - mv;
                    gx.push(-gi * yi * d / s2);
                    gm += gi * yi * d / s2;
                    gs += gi * yi * d * d / (s2 * sv);
                }
                self.accumulate_all(*x, &gx);
                self.accumulate(*m, [(0, gm)]);
                self.accumulate(*s, [(0, gs)]);
            }
            Op::Tv(x) => {
                let (h, w, c) = self.tv_dims(*x).expect("checked at construction");
                let v = self.value(*x);
                let scale = g[0] / (h * w) as f64;
                let mut gx = vec![0.0; v.len()];
                let mut edge = |a: usize, b: usize| {
                    let s = (v[b] - v[a]).signum() * if v[b] == v[a] { 0.0 } else { 1.0 };
                    gx[b] += scale * s;
                    gx[a] -= scale * s;
                };
                for r in 0..h {
                    for col in 0..w {
                        for k in 0..c {
                            let here = (r * w + col) * c + k;
                            if col + 1 < w {
                                edge(here, (r * w + col + 1) * c + k);
                            }
                            if r + 1 < h {
                                edge(here, ((r + 1) * w + col) * c + k);
                            }
                        }
                    }
                }
                self.accumulate_all(*x, &gx);
            }
            Op::BceMasked(p, target, mask) => {
                let count = mask.iter().filter(|&&m| m).count() as f64;
                let gp: Vec<f64> = self
                    .value(*p)
                    .iter()
                    .zip(target)
                    .zip(mask)
                    .map(|((&pv, &t), &m)| {
                        if !m || pv <= BCE_CLAMP || pv >= 1.0 - BCE_CLAMP {
                            return 0.0;
                        }
                        -g[0] * (t / pv - (1.0 - t) / (1.0 - pv)) / count
                    })
                    .collect();
                self.accumulate_all(*p, &gp);
            }
            Op::Concat(parts) => {
                let total_c = channels(&self.nodes[idx].shape);
                let pixels = g.len() / total_c;
                let mut offset = 0;
                for &p in parts {
                    let c = channels(self.shape(p));
                    let mut gp = Vec::with_capacity(pixels * c);
                    for px in 0..pixels {
                        gp.extend_from_slice(&g[px * total_c + offset..px * total_c + offset + c]);
                    }
                    self.accumulate_all(p, &gp);
                    offset += c;
                }
            }
            Op::Select(x, k) => {
                let c = channels(self.shape(*x));
                self.accumulate(*x, g.iter().enumerate().map(|(p, &gv)| (p * c + k, gv)));
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                self.accumulate(*x, (0..n).map(|i| (i, g[0])));
            }
            Op::Mean(x) => {
                let n = self.value(*x).len();
                self.accumulate(*x, (0..n).map(|i| (i, g[0] / n as f64)));
            }
            Op::Custom(inputs, backward) => {
                let grads = backward(g);
                for (v, gv) in inputs.iter().zip(grads) {
                    self.accumulate_all(*v, &gv);
                }
            }
        }
        self.nodes[idx].value = y;
    }
}

/// Bias-corrected Adam moments for a list of parameter arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

pub const DEFAULT_LEARNING_RATE: f64 = 3.5e-3;

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self::with_lr(sizes, DEFAULT_LEARNING_RATE)
    }

    pub fn with_lr(sizes: &[usize], lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One Adam update of every parameter array in place.
pub fn adam_step(params: &mut [Vec<f64>], grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(crate::error::shape_err(
            format!("{} parameter arrays", state.first_moment.len()),
            format!("{} params, {} grads", params.len(), grads.len()),
        ));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[k].len() {
            return Err(crate::error::shape_err(
                format!("{} values in array {k}", state.first_moment[k].len()),
                format!("{} params, {} grads", p.len(), g.len()),
            ));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.first_moment[k], &mut state.second_moment[k]);
        for i in 0..p.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            p[i] -= state.lr * mh / (vh.sqrt() + state.eps);
        }
    }
    Ok(())
}
