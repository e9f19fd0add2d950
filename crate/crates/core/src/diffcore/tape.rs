use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Hand-written vector-Jacobian product for a fused operation.
pub trait CustomBackward {
    /// Returns one entry per input; `None` means no gradient flows to it.
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad_out: &[f64],
    ) -> Vec<Option<Vec<f64>>>;
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    LeakyRelu(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather {
        src: Var,
        idx: Vec<usize>,
    },
    MaxOverGroup {
        src: Var,
        argmax: Vec<usize>,
    },
    Reshape(Var),
    Affine {
        src: Var,
        mul: f64,
    },
    Sum(Var),
    Custom {
        inputs: Vec<Var>,
        f: Box<dyn CustomBackward>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Linear record of executed operations.
///
/// Nodes are appended in execution order, so every op's inputs precede it
/// and [`Tape::backward`] only has to walk the vector in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records `t` as is, keeping its `requires_grad` flag.
    pub fn leaf(&mut self, mut t: Tensor) -> Var {
        t.grad = None;
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(true))
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(false))
    }

    pub fn tensor(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf; `None` for recorded operations and
    /// for leaves before the first backward pass.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.value.zero_grad();
        }
    }

    fn push(&mut self, mut value: Tensor, op: Op, inputs: &[Var]) -> Var {
        value.requires_grad = inputs.iter().any(|v| self.requires_grad(*v));
        value.grad = None;
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape(format!("matmul {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a),
            (k, 1),
            self.value(b),
            (n, 1),
            &mut out,
        );
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::MatMul(a, b), &[a, b]))
    }

    /// Adds a bias vector to every row (last axis).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let c = self.tensor(x).cols();
        if self.tensor(bias).numel() != c {
            return Err(Error::shape(format!(
                "bias of {} entries for {c} columns",
                self.tensor(bias).numel()
            )));
        }
        let mut t = self.tensor(x).clone();
        let b = self.value(bias).to_vec();
        for row in t.data_mut().chunks_mut(c) {
            for (v, bv) in row.iter_mut().zip(&b) {
                *v += bv;
            }
        }
        Ok(self.push(t, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.tensor(a).same_shape(self.tensor(b)) {
            return Err(Error::shape(format!(
                "add {:?} + {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let mut t = self.tensor(a).clone();
        for (v, w) in t.data_mut().iter_mut().zip(self.value(b)) {
            *v += w;
        }
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0)
    }

    /// `max(x, 0) + slope * min(x, 0)`; the derivative at exactly 0 is `slope`.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let mut t = self.tensor(x).clone();
        for v in t.data_mut() {
            if *v <= 0.0 {
                *v *= slope;
            }
        }
        self.push(t, Op::LeakyRelu(x, slope), &[x])
    }

    /// Concatenates along the last axis; all other axes must agree.
    pub fn concat_columns(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs
            .first()
            .ok_or_else(|| Error::shape("concat of zero tensors"))?;
        let lead = self.shape(first)[..self.shape(first).len().saturating_sub(1)].to_vec();
        let rows = self.tensor(first).rows();
        let mut total = 0;
        for &x in xs {
            let s = self.shape(x);
            if s.len() != lead.len() + 1 || s[..lead.len()] != lead[..] {
                return Err(Error::shape(format!(
                    "concat_columns row mismatch: {:?} vs {:?}",
                    self.shape(first),
                    s
                )));
            }
            total += self.tensor(x).cols();
        }
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &x in xs {
                out.extend_from_slice(self.tensor(x).row(r));
            }
        }
        let mut shape = lead;
        shape.push(total);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::ConcatCols(xs.to_vec()), xs))
    }

    /// Stacks 2D tensors vertically.
    pub fn concat_rows(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs
            .first()
            .ok_or_else(|| Error::shape("concat of zero tensors"))?;
        let c = self.tensor(first).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &x in xs {
            let t = self.tensor(x);
            if t.shape().len() != 2 || t.cols() != c {
                return Err(Error::shape(format!(
                    "concat_rows {:?} vs {:?}",
                    self.shape(first),
                    t.shape()
                )));
            }
            rows += t.rows();
            out.extend_from_slice(t.data());
        }
        let t = Tensor::new(vec![rows, c], out)?;
        Ok(self.push(t, Op::ConcatRows(xs.to_vec()), xs))
    }

    /// Gathers rows of a 2D tensor. `idx` is a flat row list and the output
    /// takes `lead_shape + [cols]`, e.g. `[n, k]` for an n×k neighbor index.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize], lead_shape: &[usize]) -> Result<Var> {
        let src = self.tensor(x);
        if src.shape().len() != 2 {
            return Err(Error::shape(format!("gather from {:?}", src.shape())));
        }
        if lead_shape.iter().product::<usize>() != idx.len() {
            return Err(Error::shape(format!(
                "gather shape {lead_shape:?} for {} indices",
                idx.len()
            )));
        }
        let (n, c) = (src.rows(), src.cols());
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            out.extend_from_slice(src.row(i));
        }
        let mut shape = lead_shape.to_vec();
        shape.push(c);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(
            t,
            Op::Gather {
                src: x,
                idx: idx.to_vec(),
            },
            &[x],
        ))
    }

    /// Max over axis 1 of an `[n, k, c]` tensor. Gradient goes to the first
    /// maximal member of each group.
    pub fn max_over_group(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || s[1] == 0 {
            return Err(Error::shape(format!("max_over_group on {s:?}")));
        }
        let (n, k, c) = (s[0], s[1], s[2]);
        let data = self.value(x);
        let mut out = Vec::with_capacity(n * c);
        let mut argmax = Vec::with_capacity(n * c);
        for i in 0..n {
            let base = i * k * c;
            let start = out.len();
            out.extend_from_slice(&data[base..base + c]);
            argmax.extend(base..base + c);
            for j in 1..k {
                let at = base + j * c;
                let row = &data[at..at + c];
                for (ch, &v) in row.iter().enumerate() {
                    if v > out[start + ch] {
                        out[start + ch] = v;
                        argmax[start + ch] = at + ch;
                    }
                }
            }
        }
        let t = Tensor::new(vec![n, c], out)?;
        Ok(self.push(t, Op::MaxOverGroup { src: x, argmax }, &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.tensor(x).reshaped(shape.to_vec())?;
        Ok(self.push(t, Op::Reshape(x), &[x]))
    }

    /// `x * mul + offset`, with `offset` broadcast over rows. Only `x`
    /// is differentiated.
    pub fn affine(&mut self, x: Var, mul: f64, offset: &[f64]) -> Result<Var> {
        let c = self.tensor(x).cols();
        if offset.len() != c {
            return Err(Error::shape(format!(
                "affine offset of {} for {c} columns",
                offset.len()
            )));
        }
        let mut t = self.tensor(x).clone();
        for row in t.data_mut().chunks_mut(c) {
            for (v, o) in row.iter_mut().zip(offset) {
                *v = *v * mul + o;
            }
        }
        Ok(self.push(t, Op::Affine { src: x, mul }, &[x]))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let c = self.tensor(x).cols();
        self.affine(x, s, &vec![0.0; c])
            .expect("offset width matches by construction")
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    /// Records an externally computed `output` whose gradient is supplied by `f`.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, f: Box<dyn CustomBackward>) -> Var {
        self.push(
            output,
            Op::Custom {
                inputs: inputs.to_vec(),
                f,
            },
            inputs,
        )
    }

    /// Accumulates `d(loss)/d(t)` into the `grad` buffer of every leaf that
    /// requires a gradient. Leaves not reachable from `loss` get zeros.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.tensor(loss).is_scalar() {
            return Err(Error::NotScalar(self.shape(loss).to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.requires_grad(loss) {
            adj[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
        }
        for (node, a) in self.nodes.iter_mut().zip(adj) {
            if !node.value.requires_grad || !matches!(node.op, Op::Leaf) {
                continue;
            }
            let numel = node.value.numel();
            match (&mut node.value.grad, a) {
                (Some(grad), Some(a)) => add_into(grad, &a),
                (slot @ None, Some(a)) => *slot = Some(a),
                (slot @ None, None) => *slot = Some(vec![0.0; numel]),
                (Some(_), None) => {}
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let wants = |v: Var| nodes[v.0].value.requires_grad;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if wants(*a) {
                    let ga = slot(adj, nodes, *a);
                    gemm(m, n, k, g, (n, 1), tb.data(), (1, n), ga);
                }
                if wants(*b) {
                    let gb = slot(adj, nodes, *b);
                    gemm(k, m, n, ta.data(), (1, k), g, (n, 1), gb);
                }
            }
            Op::AddBias(x, b) => {
                if wants(*x) {
                    add_into(slot(adj, nodes, *x), g);
                }
                if wants(*b) {
                    let gb = slot(adj, nodes, *b);
                    let c = gb.len();
                    for row in g.chunks(c) {
                        add_into(gb, row);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if wants(*v) {
                        add_into(slot(adj, nodes, *v), g);
                    }
                }
            }
            Op::LeakyRelu(x, slope) => {
                if wants(*x) {
                    let xv = nodes[x.0].value.data();
                    let gx = slot(adj, nodes, *x);
                    for ((d, &xi), &gi) in gx.iter_mut().zip(xv).zip(g) {
                        *d += if xi > 0.0 { gi } else { slope * gi };
                    }
                }
            }
            Op::ConcatCols(xs) => {
                let total = nodes[i].value.cols();
                let mut off = 0;
                for x in xs {
                    let c = nodes[x.0].value.cols();
                    if wants(*x) {
                        let gx = slot(adj, nodes, *x);
                        for (dst, src) in gx.chunks_mut(c).zip(g.chunks(total)) {
                            add_into(dst, &src[off..off + c]);
                        }
                    }
                    off += c;
                }
            }
            Op::ConcatRows(xs) => {
                let mut off = 0;
                for x in xs {
                    let len = nodes[x.0].value.numel();
                    if wants(*x) {
                        add_into(slot(adj, nodes, *x), &g[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::Gather { src, idx } => {
                if wants(*src) {
                    let c = nodes[src.0].value.cols();
                    let gs = slot(adj, nodes, *src);
                    for (r, &j) in idx.iter().enumerate() {
                        add_into(&mut gs[j * c..(j + 1) * c], &g[r * c..(r + 1) * c]);
                    }
                }
            }
            Op::MaxOverGroup { src, argmax } => {
                if wants(*src) {
                    let gs = slot(adj, nodes, *src);
                    for (&at, &gi) in argmax.iter().zip(g) {
                        gs[at] += gi;
                    }
                }
            }
            Op::Reshape(x) => {
                if wants(*x) {
                    add_into(slot(adj, nodes, *x), g);
                }
            }
            Op::Affine { src, mul } => {
                if wants(*src) {
                    let gs = slot(adj, nodes, *src);
                    for (d, gi) in gs.iter_mut().zip(g) {
                        *d += mul * gi;
                    }
                }
            }
            Op::Sum(x) => {
                if wants(*x) {
                    let g0 = g[0];
                    for d in slot(adj, nodes, *x).iter_mut() {
                        *d += g0;
                    }
                }
            }
            Op::Custom { inputs, f } => {
                let ins: Vec<&Tensor> = inputs.iter().map(|v| &nodes[v.0].value).collect();
                let grads = f.backward(&ins, &nodes[i].value, g);
                for (v, gv) in inputs.iter().zip(grads) {
                    if let (true, Some(gv)) = (wants(*v), gv) {
                        add_into(slot(adj, nodes, *v), &gv);
                    }
                }
            }
        }
    }
}

fn slot<'a>(adj: &'a mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> &'a mut Vec<f64> {
    adj[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.numel()])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `c += a · b` for an `m×k` by `k×n` product with explicit (row, col) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    // SAFETY: bounds asserted above; `c` is row-major m×n and does not alias.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
