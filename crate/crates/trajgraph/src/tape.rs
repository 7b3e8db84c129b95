//! Dense f64 tensors and a tape-based reverse-mode differentiation engine.
//!
//! A [`Tape`] records every operation applied to its tensors in topological
//! order. [`Tape::backward`] replays the record once in reverse, pushing
//! adjoints from a scalar loss to every node that fed it. Repeated backward
//! calls accumulate into the stored gradients until [`Tape::zero_grads`].
//!
//! The engine is deliberately small: it supports exactly the operations the
//! trajectory model needs, all in 64-bit floats, all single-threaded per
//! tape. Distinct tapes are independent and may live on distinct threads.

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// A plain dense tensor living outside any tape: model parameters, inputs,
/// and anything else that persists across training steps.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
    pub requires_grad: bool,
    /// Accumulated gradient, present iff `requires_grad`.
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::Contract(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor {
            data,
            shape,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            data: vec![0.0; n],
            shape,
            requires_grad: false,
            grad: None,
        }
    }

    /// A trainable tensor with an allocated, zeroed gradient block.
    pub fn param(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let mut t = Tensor::new(data, shape)?;
        t.requires_grad = true;
        t.grad = Some(vec![0.0; t.data.len()]);
        Ok(t)
    }

    /// A trainable tensor initialized uniformly in `[-bound, bound)`.
    pub fn rand_param(shape: Vec<usize>, bound: f64, stream: &SeedStream) -> Self {
        let n: usize = shape.iter().product();
        let mut data = vec![0.0; n];
        stream.fill_uniform(&mut data, bound);
        Tensor {
            data,
            shape,
            requires_grad: true,
            grad: Some(vec![0.0; n]),
        }
    }

    pub fn scalar_param(v: f64) -> Self {
        Tensor {
            data: vec![v],
            shape: vec![1],
            requires_grad: true,
            grad: Some(vec![0.0]),
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn accumulate_grad(&mut self, incoming: &[f64]) {
        if let Some(g) = self.grad.as_mut() {
            for (dst, src) in g.iter_mut().zip(incoming) {
                *dst += src;
            }
        }
    }
}

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Div(TensorId, TensorId),
    AddScalar(TensorId),
    Scale(TensorId, f64),
    Exp(TensorId),
    Ln(TensorId),
    Sqrt(TensorId),
    Tanh(TensorId),
    Matmul(TensorId, TensorId),
    SoftmaxLastDim(TensorId),
    Prelu { x: TensorId, slope: TensorId },
    ConvOverTime { x: TensorId, kernels: TensorId, bias: TensorId },
    SumAll(TensorId),
    Gather { src: TensorId, index: Vec<usize> },
    Stack(Vec<TensorId>),
    Reshape(TensorId),
}

#[derive(Debug)]
struct Node {
    data: Vec<f64>,
    shape: Vec<usize>,
    op: Op,
    grad: Vec<f64>,
}

/// Wengert list: append-only record of operations plus their results.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn numel(&self, id: TensorId) -> usize {
        self.nodes[id.0].data.len()
    }

    /// Gradient accumulated by `backward` calls since the last reset.
    pub fn grad(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].grad
    }

    pub fn zero_grads(&mut self) {
        for node in self.nodes.iter_mut() {
            node.grad.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn push(&mut self, data: Vec<f64>, shape: Vec<usize>, op: Op) -> TensorId {
        let grad = vec![0.0; data.len()];
        self.nodes.push(Node {
            data,
            shape,
            op,
            grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    /// Records an input node from raw values.
    pub fn constant(&mut self, data: Vec<f64>, shape: Vec<usize>) -> Result<TensorId> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::Contract(format!(
                "leaf data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(self.push(data, shape, Op::Leaf))
    }

    /// Records an input node holding a tensor's current values.
    pub fn leaf(&mut self, t: &Tensor) -> TensorId {
        self.push(t.data.clone(), t.shape.clone(), Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.push(vec![v], vec![1], Op::Leaf)
    }

    fn binary_elementwise(
        &mut self,
        name: &'static str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<TensorId> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::shape(name, &self.nodes[a.0].shape, &self.nodes[b.0].shape));
        }
        let data: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| f(*x, *y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        Ok(self.push(data, shape, op))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        if self.nodes[b.0].data.iter().any(|v| *v == 0.0) {
            return Err(Error::Domain("division by zero element".into()));
        }
        self.binary_elementwise("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn add_scalar(&mut self, a: TensorId, c: f64) -> TensorId {
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x + c).collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(data, shape, Op::AddScalar(a))
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x * c).collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(data, shape, Op::Scale(a, c))
    }

    pub fn neg(&mut self, a: TensorId) -> TensorId {
        self.scale(a, -1.0)
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x.exp()).collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(data, shape, Op::Exp(a))
    }

    pub fn ln(&mut self, a: TensorId) -> Result<TensorId> {
        if self.nodes[a.0].data.iter().any(|v| *v <= 0.0) {
            return Err(Error::Domain("ln of non-positive element".into()));
        }
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x.ln()).collect();
        let shape = self.nodes[a.0].shape.clone();
        Ok(self.push(data, shape, Op::Ln(a)))
    }

    pub fn sqrt(&mut self, a: TensorId) -> Result<TensorId> {
        if self.nodes[a.0].data.iter().any(|v| *v < 0.0) {
            return Err(Error::Domain("sqrt of negative element".into()));
        }
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x.sqrt()).collect();
        let shape = self.nodes[a.0].shape.clone();
        Ok(self.push(data, shape, Op::Sqrt(a)))
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x.tanh()).collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(data, shape, Op::Tanh(a))
    }

    /// Standard 2-D matrix product (m×k)·(k×n) → (m×n).
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (da, db) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let av = da[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let row = &db[p * n..(p + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (o, bv) in dst.iter_mut().zip(row) {
                    *o += av * bv;
                }
            }
        }
        Ok(self.push(out, vec![m, n], Op::Matmul(a, b)))
    }

    /// Row-stochastic softmax over the last dimension, stabilized by
    /// max-subtraction.
    pub fn softmax_lastdim(&mut self, a: TensorId) -> Result<TensorId> {
        if self.nodes[a.0].data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("softmax over non-finite input".into()));
        }
        let shape = self.nodes[a.0].shape.clone();
        let n = *shape.last().ok_or_else(|| {
            Error::Contract("softmax requires at least one dimension".into())
        })?;
        if n == 0 {
            return Err(Error::Contract("softmax over empty last dimension".into()));
        }
        let src = &self.nodes[a.0].data;
        let mut out = vec![0.0; src.len()];
        for (row_in, row_out) in src.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            let max = row_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, x) in row_out.iter_mut().zip(row_in) {
                *o = (x - max).exp();
                sum += *o;
            }
            for o in row_out.iter_mut() {
                *o /= sum;
            }
        }
        Ok(self.push(out, shape, Op::SoftmaxLastDim(a)))
    }

    /// Parametric ReLU with one learnable scalar slope: x if x > 0, else
    /// slope·x. The slope receives gradient from the non-positive region.
    pub fn prelu(&mut self, x: TensorId, slope: TensorId) -> Result<TensorId> {
        if self.nodes[slope.0].data.len() != 1 {
            return Err(Error::Contract(format!(
                "prelu slope must be scalar, got shape {:?}",
                self.nodes[slope.0].shape
            )));
        }
        let a = self.nodes[slope.0].data[0];
        let data: Vec<f64> = self.nodes[x.0]
            .data
            .iter()
            .map(|v| if *v > 0.0 { *v } else { a * v })
            .collect();
        let shape = self.nodes[x.0].shape.clone();
        Ok(self.push(data, shape, Op::Prelu { x, slope }))
    }

    /// 1-D convolution along the middle axis of a (Cin×L×N) block with
    /// kernels (Cout×Cin×k) and per-output-channel bias, zero-padded so the
    /// output keeps length L. The N axis is untouched: each of the N columns
    /// is convolved independently.
    pub fn conv_over_time(
        &mut self,
        x: TensorId,
        kernels: TensorId,
        bias: TensorId,
    ) -> Result<TensorId> {
        let sx = self.nodes[x.0].shape.clone();
        let sk = self.nodes[kernels.0].shape.clone();
        let sb = self.nodes[bias.0].shape.clone();
        if sx.len() != 3 || sk.len() != 3 {
            return Err(Error::shape("conv_over_time", &sx, &sk));
        }
        let (cin, l, n) = (sx[0], sx[1], sx[2]);
        let (cout, kcin, kw) = (sk[0], sk[1], sk[2]);
        if kcin != cin {
            return Err(Error::shape("conv_over_time", &sx, &sk));
        }
        if sb != [cout] {
            return Err(Error::shape("conv_over_time bias", &sb, &sk));
        }
        if kw % 2 == 0 {
            return Err(Error::Config(format!(
                "convolution kernel width must be odd, got {kw}"
            )));
        }
        let pad = (kw - 1) / 2;
        let xd = &self.nodes[x.0].data;
        let kd = &self.nodes[kernels.0].data;
        let bd = &self.nodes[bias.0].data;
        let mut out = vec![0.0; cout * l * n];
        for co in 0..cout {
            for pos in 0..l {
                let dst = &mut out[(co * l + pos) * n..(co * l + pos + 1) * n];
                dst.iter_mut().for_each(|v| *v = bd[co]);
                for ci in 0..cin {
                    for t in 0..kw {
                        let src_pos = pos + t;
                        if src_pos < pad || src_pos - pad >= l {
                            continue;
                        }
                        let w = kd[(co * cin + ci) * kw + t];
                        let src = &xd[(ci * l + src_pos - pad) * n..(ci * l + src_pos - pad + 1) * n];
                        for (o, v) in dst.iter_mut().zip(src) {
                            *o += w * v;
                        }
                    }
                }
            }
        }
        Ok(self.push(out, vec![cout, l, n], Op::ConvOverTime { x, kernels, bias }))
    }

    /// Reduces every element to a single scalar sum.
    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let s: f64 = self.nodes[a.0].data.iter().sum();
        self.push(vec![s], vec![1], Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: TensorId) -> TensorId {
        let n = self.nodes[a.0].data.len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Arbitrary re-indexing: `out[i] = src[index[i]]`. One source element
    /// may feed many outputs (broadcast) and backward scatter-adds
    /// accordingly.
    pub fn gather(
        &mut self,
        src: TensorId,
        index: Vec<usize>,
        out_shape: Vec<usize>,
    ) -> Result<TensorId> {
        if index.len() != out_shape.iter().product::<usize>() {
            return Err(Error::Contract(format!(
                "gather index length {} does not match target shape {:?}",
                index.len(),
                out_shape
            )));
        }
        let src_len = self.nodes[src.0].data.len();
        if let Some(bad) = index.iter().find(|i| **i >= src_len) {
            return Err(Error::Index(format!(
                "gather index {bad} out of range for source of {src_len} elements"
            )));
        }
        let sd = &self.nodes[src.0].data;
        let data: Vec<f64> = index.iter().map(|i| sd[*i]).collect();
        Ok(self.push(data, out_shape, Op::Gather { src, index }))
    }

    /// Stacks same-shape parts along a new leading axis.
    pub fn stack(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("stack of zero tensors".into()))?;
        let part_shape = self.nodes[first.0].shape.clone();
        let mut data = Vec::with_capacity(parts.len() * self.nodes[first.0].data.len());
        for p in parts {
            if self.nodes[p.0].shape != part_shape {
                return Err(Error::shape("stack", &part_shape, &self.nodes[p.0].shape));
            }
            data.extend_from_slice(&self.nodes[p.0].data);
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&part_shape);
        Ok(self.push(data, shape, Op::Stack(parts.to_vec())))
    }

    pub fn reshape(&mut self, a: TensorId, shape: Vec<usize>) -> Result<TensorId> {
        if shape.iter().product::<usize>() != self.nodes[a.0].data.len() {
            return Err(Error::shape("reshape", &self.nodes[a.0].shape, &shape));
        }
        let data = self.nodes[a.0].data.clone();
        Ok(self.push(data, shape, Op::Reshape(a)))
    }

    /// Reverse sweep from a scalar node. Adjoints are computed in per-call
    /// scratch space and only then added into the persistent gradients, so
    /// repeated calls accumulate additively instead of double-counting.
    pub fn backward(&mut self, target: TensorId) -> Result<()> {
        if self.nodes[target.0].data.len() != 1 {
            return Err(Error::Contract(format!(
                "backward target must be scalar, got shape {:?}",
                self.nodes[target.0].shape
            )));
        }
        let upto = target.0;
        let mut adj: Vec<Vec<f64>> = self.nodes[..=upto]
            .iter()
            .map(|n| vec![0.0; n.data.len()])
            .collect();
        let mut live = vec![false; upto + 1];
        adj[upto][0] = 1.0;
        live[upto] = true;

        for i in (0..=upto).rev() {
            if !live[i] {
                continue;
            }
            // Take this node's adjoint out so inputs (always lower indices)
            // can be written without aliasing.
            let g = std::mem::take(&mut adj[i]);
            self.propagate(i, &g, &mut adj, &mut live);
            adj[i] = g;
        }

        for (node, a) in self.nodes[..=upto].iter_mut().zip(&adj) {
            for (dst, src) in node.grad.iter_mut().zip(a) {
                *dst += src;
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Vec<f64>], live: &mut [bool]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                axpy(&mut adj[a.0], g, 1.0);
                axpy(&mut adj[b.0], g, 1.0);
                live[a.0] = true;
                live[b.0] = true;
            }
            Op::Sub(a, b) => {
                axpy(&mut adj[a.0], g, 1.0);
                axpy(&mut adj[b.0], g, -1.0);
                live[a.0] = true;
                live[b.0] = true;
            }
            Op::Mul(a, b) => {
                let (da, db) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
                for k in 0..g.len() {
                    adj[a.0][k] += g[k] * db[k];
                }
                for k in 0..g.len() {
                    adj[b.0][k] += g[k] * da[k];
                }
                live[a.0] = true;
                live[b.0] = true;
            }
            Op::Div(a, b) => {
                let db = &self.nodes[b.0].data;
                let out = &node.data;
                for k in 0..g.len() {
                    adj[a.0][k] += g[k] / db[k];
                }
                for k in 0..g.len() {
                    adj[b.0][k] -= g[k] * out[k] / db[k];
                }
                live[a.0] = true;
                live[b.0] = true;
            }
            Op::AddScalar(a) => {
                axpy(&mut adj[a.0], g, 1.0);
                live[a.0] = true;
            }
            Op::Scale(a, c) => {
                axpy(&mut adj[a.0], g, *c);
                live[a.0] = true;
            }
            Op::Exp(a) => {
                for k in 0..g.len() {
                    adj[a.0][k] += g[k] * node.data[k];
                }
                live[a.0] = true;
            }
            Op::Ln(a) => {
                let da = &self.nodes[a.0].data;
                for k in 0..g.len() {
                    adj[a.0][k] += g[k] / da[k];
                }
                live[a.0] = true;
            }
            Op::Sqrt(a) => {
                for k in 0..g.len() {
                    adj[a.0][k] += g[k] * 0.5 / node.data[k];
                }
                live[a.0] = true;
            }
            Op::Tanh(a) => {
                for k in 0..g.len() {
                    adj[a.0][k] += g[k] * (1.0 - node.data[k] * node.data[k]);
                }
                live[a.0] = true;
            }
            Op::Matmul(a, b) => {
                let sa = &self.nodes[a.0].shape;
                let (m, k, n) = (sa[0], sa[1], self.nodes[b.0].shape[1]);
                let da = &self.nodes[a.0].data;
                let db = &self.nodes[b.0].data;
                // dA = g · Bᵀ
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += g[i * n + j] * db[p * n + j];
                        }
                        adj[a.0][i * k + p] += acc;
                    }
                }
                // dB = Aᵀ · g
                for p in 0..k {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += da[i * k + p] * g[i * n + j];
                        }
                        adj[b.0][p * n + j] += acc;
                    }
                }
                live[a.0] = true;
                live[b.0] = true;
            }
            Op::SoftmaxLastDim(a) => {
                let n = *node.shape.last().unwrap();
                let y = &node.data;
                for (row, (yr, gr)) in y.chunks_exact(n).zip(g.chunks_exact(n)).enumerate() {
                    let dot: f64 = yr.iter().zip(gr).map(|(yv, gv)| yv * gv).sum();
                    let dst = &mut adj[a.0][row * n..(row + 1) * n];
                    for (d, (yv, gv)) in dst.iter_mut().zip(yr.iter().zip(gr)) {
                        *d += yv * (gv - dot);
                    }
                }
                live[a.0] = true;
            }
            Op::Prelu { x, slope } => {
                let xs = &self.nodes[x.0].data;
                let a = self.nodes[slope.0].data[0];
                let mut dslope = 0.0;
                for k in 0..g.len() {
                    if xs[k] > 0.0 {
                        adj[x.0][k] += g[k];
                    } else {
                        adj[x.0][k] += g[k] * a;
                        dslope += g[k] * xs[k];
                    }
                }
                adj[slope.0][0] += dslope;
                live[x.0] = true;
                live[slope.0] = true;
            }
            Op::ConvOverTime { x, kernels, bias } => {
                let sx = &self.nodes[x.0].shape;
                let sk = &self.nodes[kernels.0].shape;
                let (cin, l, n) = (sx[0], sx[1], sx[2]);
                let (cout, kw) = (sk[0], sk[2]);
                let pad = (kw - 1) / 2;
                let xd = &self.nodes[x.0].data;
                let kd = &self.nodes[kernels.0].data;
                for co in 0..cout {
                    for pos in 0..l {
                        let grow = &g[(co * l + pos) * n..(co * l + pos + 1) * n];
                        let gsum: f64 = grow.iter().sum();
                        adj[bias.0][co] += gsum;
                        for ci in 0..cin {
                            for t in 0..kw {
                                let src_pos = pos + t;
                                if src_pos < pad || src_pos - pad >= l {
                                    continue;
                                }
                                let xoff = (ci * l + src_pos - pad) * n;
                                let w = kd[(co * cin + ci) * kw + t];
                                let mut kacc = 0.0;
                                for j in 0..n {
                                    adj[x.0][xoff + j] += grow[j] * w;
                                    kacc += grow[j] * xd[xoff + j];
                                }
                                adj[kernels.0][(co * cin + ci) * kw + t] += kacc;
                            }
                        }
                    }
                }
                live[x.0] = true;
                live[kernels.0] = true;
                live[bias.0] = true;
            }
            Op::SumAll(a) => {
                let gv = g[0];
                adj[a.0].iter_mut().for_each(|v| *v += gv);
                live[a.0] = true;
            }
            Op::Gather { src, index } => {
                for (k, si) in index.iter().enumerate() {
                    adj[src.0][*si] += g[k];
                }
                live[src.0] = true;
            }
            Op::Stack(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.0].data.len();
                    axpy(&mut adj[p.0], &g[off..off + len], 1.0);
                    live[p.0] = true;
                    off += len;
                }
            }
            Op::Reshape(a) => {
                axpy(&mut adj[a.0], g, 1.0);
                live[a.0] = true;
            }
        }
    }
}

fn axpy(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Compares the reverse-mode gradient of a scalar-valued tape program
/// against central finite differences, coordinate by coordinate, and returns
/// the worst relative discrepancy |a−n| / max(1, |a|, |n|).
pub fn grad_check<F>(data: &[f64], shape: &[usize], eps: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&mut Tape, TensorId) -> Result<TensorId>,
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::Contract(format!(
            "finite-difference step {eps} outside [1e-7, 1e-4]"
        )));
    }
    let mut tape = Tape::new();
    let x = tape.constant(data.to_vec(), shape.to_vec())?;
    let y = f(&mut tape, x)?;
    if tape.numel(y) != 1 {
        return Err(Error::Contract(format!(
            "grad_check function must be scalar-valued, got shape {:?}",
            tape.shape(y)
        )));
    }
    tape.backward(y)?;
    let analytic = tape.grad(x).to_vec();

    let mut worst: f64 = 0.0;
    for i in 0..data.len() {
        let mut probe = |v: f64| -> Result<f64> {
            let mut d = data.to_vec();
            d[i] = v;
            let mut t = Tape::new();
            let xi = t.constant(d, shape.to_vec())?;
            let yi = f(&mut t, xi)?;
            Ok(t.value(yi)[0])
        };
        let fp = probe(data[i] + eps)?;
        let fm = probe(data[i] - eps)?;
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}
