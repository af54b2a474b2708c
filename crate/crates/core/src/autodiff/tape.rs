//! Reverse-mode tape over batches of jets.
//!
//! Each node holds a [`Tensor`]: a `rows × cols` block of jets stored
//! component-major (all values, then all `∂t`, then all `∂x`, ...). Columns
//! are collocation points, rows are neurons or unknowns. Recording whole
//! layers as single nodes keeps the node count at a few dozen per loss
//! evaluation while the adjoint of every jet component is still propagated
//! exactly, so the parameter gradient of a loss built from input partials is
//! exact to rounding.

use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, Ordering};

use super::jet::{leibniz_terms, MultiIndex, PartialSet, UnaryFn};
use super::kernels::{matmul, outer_accumulate, Coeffs, Init};
use super::AdError;

static EPOCH: AtomicU64 = AtomicU64::new(1);

fn next_epoch() -> u64 {
    EPOCH.fetch_add(1, Ordering::Relaxed)
}

/// A dense block of jets.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    set: PartialSet,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize, set: PartialSet) -> Self {
        Self {
            rows,
            cols,
            set,
            data: vec![0.0; rows * cols * set.len()],
        }
    }

    /// Value-only tensor from row-major values.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "value count does not match shape");
        Self {
            rows,
            cols,
            set: PartialSet::VALUE_ONLY,
            data: values,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_values(1, 1, vec![v])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set(&self) -> PartialSet {
        self.set
    }

    /// Component for the given slot, if stored.
    pub fn slot(&self, slot: usize) -> Option<&[f64]> {
        let n = self.len();
        self.set.position(slot).map(|k| &self.data[k * n..(k + 1) * n])
    }

    pub fn slot_mut(&mut self, slot: usize) -> Option<&mut [f64]> {
        let n = self.len();
        self.set
            .position(slot)
            .map(move |k| &mut self.data[k * n..(k + 1) * n])
    }

    pub fn partial(&self, idx: MultiIndex) -> Option<&[f64]> {
        self.slot(idx.slot())
    }

    pub fn values(&self) -> &[f64] {
        &self.data[..self.len()]
    }

    fn comp(&self, k: usize) -> &[f64] {
        let n = self.len();
        &self.data[k * n..(k + 1) * n]
    }

    fn comp_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.len();
        &mut self.data[k * n..(k + 1) * n]
    }

    fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Handle to a node on a [`Tape`]. Invalidated by [`Tape::clear`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    index: usize,
    epoch: u64,
}

impl Var {
    pub fn index(&self) -> usize {
        self.index
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param { offset: usize },
    Affine { input: usize, w: usize, b: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Shift(usize),
    Unary(usize, UnaryFn),
    Row(usize, usize),
    Slot(usize, usize),
    MeanSquare(usize),
    Sum(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param { .. } => "param",
            Op::Affine { .. } => "affine",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::Shift(..) => "shift",
            Op::Unary(_, f) => f.name(),
            Op::Row(..) => "row",
            Op::Slot(..) => "partial",
            Op::MeanSquare(..) => "mean_square",
            Op::Sum(..) => "sum",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
    /// Derivatives of a unary function at its input, kept for the reverse
    /// sweep.
    aux: Vec<f64>,
}

/// Recycled tensor storage. Reusing buffers across evaluations avoids
/// mapping and faulting in fresh pages for every large tensor.
#[derive(Default)]
struct Pool(RefCell<Vec<Vec<f64>>>);

impl Pool {
    const MAX_BUFFERS: usize = 512;

    fn zeros(&self, len: usize) -> Vec<f64> {
        let mut free = self.0.borrow_mut();
        let best = free
            .iter()
            .enumerate()
            .filter(|(_, b)| b.capacity() >= len)
            .min_by_key(|(_, b)| b.capacity())
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let mut b = free.swap_remove(i);
                b.clear();
                b.resize(len, 0.0);
                b
            }
            None => vec![0.0; len],
        }
    }

    fn give(&self, b: Vec<f64>) {
        let mut free = self.0.borrow_mut();
        if b.capacity() > 0 && free.len() < Self::MAX_BUFFERS {
            free.push(b);
        }
    }

    fn tensor(&self, rows: usize, cols: usize, set: PartialSet) -> Tensor {
        Tensor {
            rows,
            cols,
            set,
            data: self.zeros(rows * cols * set.len()),
        }
    }
}

/// Append-only record of tensor operations with a bound parameter vector.
pub struct Tape {
    epoch: u64,
    params: Vec<f64>,
    nodes: Vec<Node>,
    pool: Pool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl Tape {
    pub fn new(params: Vec<f64>) -> Self {
        Self {
            epoch: next_epoch(),
            params,
            nodes: Vec::new(),
            pool: Pool::default(),
        }
    }

    /// Drops every node and invalidates outstanding handles.
    pub fn clear(&mut self) {
        for node in self.nodes.drain(..) {
            self.pool.give(node.value.data);
            self.pool.give(node.aux);
        }
        self.epoch = next_epoch();
    }

    /// Rebinds the parameter vector; implies [`Tape::clear`].
    pub fn reset(&mut self, params: &[f64]) {
        self.clear();
        self.params.clear();
        self.params.extend_from_slice(params);
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<usize, AdError> {
        if v.epoch != self.epoch || v.index >= self.nodes.len() {
            return Err(AdError::StaleHandle { node: v.index });
        }
        Ok(v.index)
    }

    fn idx(&self, v: Var) -> usize {
        self.check(v).expect("tape handle from a cleared or foreign tape")
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
            aux: Vec::new(),
        });
        Var {
            index: self.nodes.len() - 1,
            epoch: self.epoch,
        }
    }

    pub fn try_value(&self, v: Var) -> Result<&Tensor, AdError> {
        let i = self.check(v)?;
        Ok(&self.nodes[i].value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v)].value
    }

    /// Value of a 1×1 node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.len(), 1, "scalar_value on a non-scalar node");
        t.values()[0]
    }

    /// Fails with the offending node when any stored component is non-finite.
    pub fn check_finite(&self, v: Var) -> Result<(), AdError> {
        let i = self.check(v)?;
        let node = &self.nodes[i];
        if node.value.all_finite() {
            Ok(())
        } else {
            Err(AdError::NonFinite {
                node: i,
                op: node.op.name(),
                pass: "forward",
            })
        }
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Constant, value, false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    /// Value-only view of `params[offset .. offset + rows·cols]`, row-major.
    pub fn param(&mut self, offset: usize, rows: usize, cols: usize) -> Var {
        let n = rows * cols;
        assert!(offset + n <= self.params.len(), "parameter block out of range");
        let value = Tensor::from_values(rows, cols, self.params[offset..offset + n].to_vec());
        self.push(Op::Param { offset }, value, true)
    }

    /// `W·input + b` where `W` (`out_rows × input.rows`, row-major) starts at
    /// `w_offset` and `b` (`out_rows`) at `b_offset` in the parameter vector.
    /// Partials are mapped linearly; the bias only enters the value.
    pub fn affine(&mut self, input: Var, w_offset: usize, b_offset: usize, out_rows: usize) -> Var {
        let ii = self.idx(input);
        let a = &self.nodes[ii].value;
        let (in_rows, cols) = (a.rows, a.cols);
        assert!(w_offset + out_rows * in_rows <= self.params.len());
        assert!(b_offset + out_rows <= self.params.len());
        let w = &self.params[w_offset..w_offset + out_rows * in_rows];
        let b = &self.params[b_offset..b_offset + out_rows];
        let mut z = self.pool.tensor(out_rows, cols, a.set);
        let m = Coeffs {
            data: w,
            row_stride: in_rows,
            col_stride: 1,
        };
        for k in 0..a.set.len() {
            let init = if k == 0 { Init::Row(b) } else { Init::Zero };
            matmul(z.comp_mut(k), m, a.comp(k), out_rows, in_rows, cols, init);
        }
        self.push(
            Op::Affine {
                input: ii,
                w: w_offset,
                b: b_offset,
            },
            z,
            true,
        )
    }

    fn broadcast_shape(&self, a: usize, b: usize) -> (usize, usize) {
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        if ta.rows == tb.rows && ta.cols == tb.cols {
            (ta.rows, ta.cols)
        } else if tb.len() == 1 {
            (ta.rows, ta.cols)
        } else if ta.len() == 1 {
            (tb.rows, tb.cols)
        } else {
            panic!(
                "shape mismatch: {}x{} vs {}x{}",
                ta.rows, ta.cols, tb.rows, tb.cols
            );
        }
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.add_sub(a, b, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.add_sub(a, b, -1.0)
    }

    fn add_sub(&mut self, a: Var, b: Var, sign: f64) -> Var {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let (rows, cols) = self.broadcast_shape(ia, ib);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let set = ta.set.union(tb.set);
        let mut out = self.pool.tensor(rows, cols, set);
        let n = out.len();
        for s in set.slots() {
            let dst = out.slot_mut(s).unwrap();
            if let Some(src) = ta.slot(s) {
                if src.len() == n {
                    dst.copy_from_slice(src);
                } else {
                    dst.fill(src[0]);
                }
            }
            if let Some(src) = tb.slot(s) {
                if src.len() == n {
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d += sign * v;
                    }
                } else {
                    let v = sign * src[0];
                    dst.iter_mut().for_each(|d| *d += v);
                }
            }
        }
        let op = if sign > 0.0 { Op::Add(ia, ib) } else { Op::Sub(ia, ib) };
        let g = self.needs(ia) || self.needs(ib);
        self.push(op, out, g)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ia, ib) = (self.idx(a), self.idx(b));
        let (rows, cols) = self.broadcast_shape(ia, ib);
        let (ta, tb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let set = ta.set.union(tb.set);
        let mut out = self.pool.tensor(rows, cols, set);
        let n = out.len();
        let (sa, sb) = (ta.len() == n, tb.len() == n);
        for term in leibniz_terms(set, ta.set, tb.set) {
            let ca = ta.slot(term.a).unwrap();
            let cb = tb.slot(term.b).unwrap();
            let dst = out.slot_mut(term.out).unwrap();
            for (p, d) in dst.iter_mut().enumerate() {
                let va = if sa { ca[p] } else { ca[0] };
                let vb = if sb { cb[p] } else { cb[0] };
                if term.coeff == 1.0 {
                    *d += va * vb;
                } else {
                    *d += term.coeff * va * vb;
                }
            }
        }
        let g = self.needs(ia) || self.needs(ib);
        self.push(Op::Mul(ia, ib), out, g)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let r = self.recip(b);
        self.mul(a, r)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let ia = self.idx(a);
        let mut out = self.nodes[ia].value.clone();
        out.data.iter_mut().for_each(|v| *v = -*v);
        let g = self.needs(ia);
        self.push(Op::Neg(ia), out, g)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ia = self.idx(a);
        let mut out = self.nodes[ia].value.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        let g = self.needs(ia);
        self.push(Op::Scale(ia, c), out, g)
    }

    /// Adds a constant to the value component.
    pub fn shift(&mut self, a: Var, c: f64) -> Var {
        let ia = self.idx(a);
        let mut out = self.nodes[ia].value.clone();
        out.comp_mut(0).iter_mut().for_each(|v| *v += c);
        let g = self.needs(ia);
        self.push(Op::Shift(ia), out, g)
    }

    pub fn unary(&mut self, a: Var, f: UnaryFn) -> Var {
        let ia = self.idx(a);
        let (out, aux) = unary_forward(&self.pool, &self.nodes[ia].value, f);
        let g = self.needs(ia);
        let v = self.push(Op::Unary(ia, f), out, g);
        if g {
            self.nodes[v.index].aux = aux;
        }
        v
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, UnaryFn::Tanh)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, UnaryFn::Exp)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, UnaryFn::Ln)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, UnaryFn::Recip)
    }

    pub fn powi(&mut self, a: Var, n: i32) -> Var {
        self.unary(a, UnaryFn::Powi(n))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// Row `k` of a tensor, as a `1 × cols` tensor.
    pub fn row(&mut self, a: Var, k: usize) -> Var {
        let ia = self.idx(a);
        let ta = &self.nodes[ia].value;
        assert!(k < ta.rows, "row {k} out of range");
        let cols = ta.cols;
        let mut out = self.pool.tensor(1, cols, ta.set);
        for c in 0..ta.set.len() {
            out.comp_mut(c)
                .copy_from_slice(&ta.comp(c)[k * cols..(k + 1) * cols]);
        }
        let g = self.needs(ia);
        self.push(Op::Row(ia, k), out, g)
    }

    /// The stored partial `idx` of `a` as a value-only tensor.
    pub fn partial(&mut self, a: Var, idx: MultiIndex) -> Var {
        let ia = self.idx(a);
        let ta = &self.nodes[ia].value;
        let comp = ta
            .partial(idx)
            .unwrap_or_else(|| panic!("partial {idx} is not carried by node {ia}"));
        let out = Tensor::from_values(ta.rows, ta.cols, comp.to_vec());
        let g = self.needs(ia);
        self.push(Op::Slot(ia, idx.slot()), out, g)
    }

    /// Arithmetic mean of squared values; a 1×1 node.
    pub fn mean_square(&mut self, a: Var) -> Var {
        let ia = self.idx(a);
        let vals = self.nodes[ia].value.values();
        assert!(!vals.is_empty(), "mean_square of an empty tensor");
        let m = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
        let g = self.needs(ia);
        self.push(Op::MeanSquare(ia), Tensor::scalar(m), g)
    }

    /// Sum of values; a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let ia = self.idx(a);
        let s = self.nodes[ia].value.values().iter().sum::<f64>();
        let g = self.needs(ia);
        self.push(Op::Sum(ia), Tensor::scalar(s), g)
    }

    /// Reverse sweep from the 1×1 node `output`: returns `∂output/∂params`.
    pub fn gradient(&self, output: Var) -> Result<Vec<f64>, AdError> {
        let io = self.check(output)?;
        if self.nodes[io].value.len() != 1 {
            return Err(AdError::NotScalar { node: io });
        }
        if !self.nodes[io].value.all_finite() {
            let first = (0..=io)
                .find(|&i| !self.nodes[i].value.all_finite())
                .unwrap_or(io);
            return Err(AdError::NonFinite {
                node: first,
                op: self.nodes[first].op.name(),
                pass: "forward",
            });
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut adj: Vec<Option<Tensor>> = vec![None; io + 1];
        let mut seed = Tensor::zeros(1, 1, self.nodes[io].value.set);
        seed.data[0] = 1.0;
        adj[io] = Some(seed);

        for i in (0..=io).rev() {
            let Some(ybar) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if !ybar.all_finite() {
                return Err(AdError::NonFinite {
                    node: i,
                    op: node.op.name(),
                    pass: "reverse",
                });
            }
            self.backprop_node(node, &ybar, &mut adj, &mut grad);
            self.pool.give(ybar.data);
        }
        for t in adj.into_iter().flatten() {
            self.pool.give(t.data);
        }
        Ok(grad)
    }

    fn adj_slot<'a>(&self, adj: &'a mut [Option<Tensor>], i: usize) -> Option<&'a mut Tensor> {
        if !self.nodes[i].needs_grad {
            return None;
        }
        let v = &self.nodes[i].value;
        Some(adj[i].get_or_insert_with(|| self.pool.tensor(v.rows, v.cols, v.set)))
    }

    fn backprop_node(
        &self,
        node: &Node,
        ybar: &Tensor,
        adj: &mut [Option<Tensor>],
        grad: &mut [f64],
    ) {
        match node.op {
            Op::Constant => {}
            Op::Param { offset } => {
                for (g, v) in grad[offset..offset + ybar.len()].iter_mut().zip(ybar.values()) {
                    *g += v;
                }
            }
            Op::Affine { input, w, b } => self.backprop_affine(input, w, b, ybar, adj, grad),
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Add(..)) { 1.0 } else { -1.0 };
                accumulate_broadcast(self.adj_slot(adj, a), ybar, 1.0);
                accumulate_broadcast(self.adj_slot(adj, b), ybar, sign);
            }
            Op::Mul(a, b) => self.backprop_mul(a, b, ybar, adj),
            Op::Neg(a) => accumulate_broadcast(self.adj_slot(adj, a), ybar, -1.0),
            Op::Scale(a, c) => accumulate_broadcast(self.adj_slot(adj, a), ybar, c),
            Op::Shift(a) => accumulate_broadcast(self.adj_slot(adj, a), ybar, 1.0),
            Op::Unary(a, _) => {
                let ta = &self.nodes[a].value;
                let Some(abar) = self.adj_slot(adj, a) else { return };
                unary_backward(&self.pool, ta, &node.aux, ybar, abar);
            }
            Op::Row(a, k) => {
                let Some(abar) = self.adj_slot(adj, a) else { return };
                let cols = abar.cols;
                for c in 0..abar.set.len() {
                    let dst = &mut abar.comp_mut(c)[k * cols..(k + 1) * cols];
                    for (d, v) in dst.iter_mut().zip(ybar.comp(c)) {
                        *d += v;
                    }
                }
            }
            Op::Slot(a, s) => {
                let Some(abar) = self.adj_slot(adj, a) else { return };
                let dst = abar.slot_mut(s).unwrap();
                for (d, v) in dst.iter_mut().zip(ybar.values()) {
                    *d += v;
                }
            }
            Op::MeanSquare(a) => {
                let vals = self.nodes[a].value.values();
                let k = 2.0 * ybar.data[0] / vals.len() as f64;
                let Some(abar) = self.adj_slot(adj, a) else { return };
                for (d, v) in abar.comp_mut(0).iter_mut().zip(vals) {
                    *d += k * v;
                }
            }
            Op::Sum(a) => {
                let g = ybar.data[0];
                let Some(abar) = self.adj_slot(adj, a) else { return };
                abar.comp_mut(0).iter_mut().for_each(|d| *d += g);
            }
        }
    }

    fn backprop_affine(
        &self,
        input: usize,
        w_off: usize,
        b_off: usize,
        zbar: &Tensor,
        adj: &mut [Option<Tensor>],
        grad: &mut [f64],
    ) {
        let a = &self.nodes[input].value;
        let (in_rows, cols, out_rows) = (a.rows, a.cols, zbar.rows);
        let w = &self.params[w_off..w_off + out_rows * in_rows];

        for r in 0..out_rows {
            grad[b_off + r] += zbar.comp(0)[r * cols..(r + 1) * cols].iter().sum::<f64>();
        }
        let gw = &mut grad[w_off..w_off + out_rows * in_rows];
        for k in 0..a.set.len() {
            outer_accumulate(gw, zbar.comp(k), a.comp(k), out_rows, in_rows, cols);
        }
        if let Some(abar) = self.adj_slot(adj, input) {
            let wt = Coeffs {
                data: w,
                row_stride: 1,
                col_stride: in_rows,
            };
            for k in 0..a.set.len() {
                matmul(abar.comp_mut(k), wt, zbar.comp(k), in_rows, out_rows, cols, Init::Accumulate);
            }
        }
    }

    fn backprop_mul(&self, a: usize, b: usize, ybar: &Tensor, adj: &mut [Option<Tensor>]) {
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        let n = ybar.len();
        let terms = leibniz_terms(ybar.set, ta.set, tb.set);
        let (full_a, full_b) = (ta.len() == n, tb.len() == n);
        if let Some(abar) = self.adj_slot(adj, a) {
            for t in &terms {
                let yb = ybar.slot(t.out).unwrap();
                let cb = tb.slot(t.b).unwrap();
                let dst = abar.slot_mut(t.a).unwrap();
                for p in 0..n {
                    let vb = if full_b { cb[p] } else { cb[0] };
                    let contrib = t.coeff * yb[p] * vb;
                    if full_a {
                        dst[p] += contrib;
                    } else {
                        dst[0] += contrib;
                    }
                }
            }
        }
        if let Some(bbar) = self.adj_slot(adj, b) {
            for t in &terms {
                let yb = ybar.slot(t.out).unwrap();
                let ca = ta.slot(t.a).unwrap();
                let dst = bbar.slot_mut(t.b).unwrap();
                for p in 0..n {
                    let va = if full_a { ca[p] } else { ca[0] };
                    let contrib = t.coeff * yb[p] * va;
                    if full_b {
                        dst[p] += contrib;
                    } else {
                        dst[0] += contrib;
                    }
                }
            }
        }
    }
}

/// `dst += c·src`, summing over broadcast elements when `dst` is 1×1 and
/// skipping slots `dst` does not store.
fn accumulate_broadcast(dst: Option<&mut Tensor>, src: &Tensor, c: f64) {
    let Some(dst) = dst else { return };
    let full = dst.len() == src.len();
    for s in dst.set.slots() {
        let Some(from) = src.slot(s) else { continue };
        let to = dst.slot_mut(s).unwrap();
        if full {
            for (d, v) in to.iter_mut().zip(from) {
                *d += c * v;
            }
        } else {
            to[0] += c * from.iter().sum::<f64>();
        }
    }
}

/// `y = f(z)` on every element. Returns the output and the stored
/// derivatives: `f'` alone for value-only input, else `f'` to `f''''` as four
/// consecutive blocks.
fn unary_forward(pool: &Pool, z: &Tensor, f: UnaryFn) -> (Tensor, Vec<f64>) {
    let n = z.len();
    let mut out = pool.tensor(z.rows, z.cols, z.set);
    if z.set.is_value_only() {
        let mut d1 = pool.zeros(n);
        for e in 0..n {
            let d = f.derivatives(z.data[e]);
            out.data[e] = d[0];
            d1[e] = d[1];
        }
        return (out, d1);
    }
    let mut aux = pool.zeros(4 * n);
    for e in 0..n {
        let d = f.derivatives(z.data[e]);
        out.data[e] = d[0];
        for k in 0..4 {
            aux[k * n + e] = d[k + 1];
        }
    }
    let zero = pool.zeros(n);
    let c = |s: usize| z.slot(s).unwrap_or(&zero);
    let (zt, zx, zxx, zxxx, ztx, ztxx) = (c(1), c(2), c(3), c(4), c(5), c(6));
    let (f1, f2, f3) = (&aux[..n], &aux[n..2 * n], &aux[2 * n..3 * n]);
    for s in z.set.slots().skip(1) {
        let o = out.slot_mut(s).unwrap();
        for e in 0..n {
            o[e] = match s {
                1 => f1[e] * zt[e],
                2 => f1[e] * zx[e],
                3 => f1[e] * zxx[e] + f2[e] * zx[e] * zx[e],
                4 => {
                    f1[e] * zxxx[e]
                        + 3.0 * f2[e] * zx[e] * zxx[e]
                        + f3[e] * zx[e] * zx[e] * zx[e]
                }
                5 => f1[e] * ztx[e] + f2[e] * zt[e] * zx[e],
                _ => {
                    f1[e] * ztxx[e]
                        + f2[e] * (zt[e] * zxx[e] + 2.0 * zx[e] * ztx[e])
                        + f3[e] * zt[e] * zx[e] * zx[e]
                }
            };
        }
    }
    pool.give(zero);
    (out, aux)
}

/// Adjoint of [`unary_forward`], accumulated into `zbar`.
fn unary_backward(pool: &Pool, z: &Tensor, aux: &[f64], ybar: &Tensor, zbar: &mut Tensor) {
    let n = z.len();
    if z.set.is_value_only() {
        for e in 0..n {
            zbar.data[e] += aux[e] * ybar.data[e];
        }
        return;
    }
    let zero = pool.zeros(n);
    let c = |s: usize| z.slot(s).unwrap_or(&zero);
    let b = |s: usize| ybar.slot(s).unwrap_or(&zero);
    let (zt, zx, zxx, zxxx, ztx, ztxx) = (c(1), c(2), c(3), c(4), c(5), c(6));
    let (y0, yt, yx, yxx, yxxx, ytx, ytxx) = (b(0), b(1), b(2), b(3), b(4), b(5), b(6));
    let (f1, f2, f3, f4) = (&aux[..n], &aux[n..2 * n], &aux[2 * n..3 * n], &aux[3 * n..]);
    for s in z.set.slots() {
        let o = zbar.slot_mut(s).unwrap();
        for e in 0..n {
            o[e] += match s {
                0 => {
                    y0[e] * f1[e]
                        + f2[e]
                            * (yt[e] * zt[e]
                                + yx[e] * zx[e]
                                + yxx[e] * zxx[e]
                                + yxxx[e] * zxxx[e]
                                + ytx[e] * ztx[e]
                                + ytxx[e] * ztxx[e])
                        + f3[e]
                            * (yxx[e] * zx[e] * zx[e]
                                + 3.0 * yxxx[e] * zx[e] * zxx[e]
                                + ytx[e] * zt[e] * zx[e]
                                + ytxx[e] * (zt[e] * zxx[e] + 2.0 * zx[e] * ztx[e]))
                        + f4[e] * zx[e] * zx[e] * (yxxx[e] * zx[e] + ytxx[e] * zt[e])
                }
                1 => {
                    yt[e] * f1[e]
                        + ytx[e] * f2[e] * zx[e]
                        + ytxx[e] * (f2[e] * zxx[e] + f3[e] * zx[e] * zx[e])
                }
                2 => {
                    yx[e] * f1[e]
                        + 2.0 * yxx[e] * f2[e] * zx[e]
                        + 3.0 * yxxx[e] * (f2[e] * zxx[e] + f3[e] * zx[e] * zx[e])
                        + ytx[e] * f2[e] * zt[e]
                        + 2.0 * ytxx[e] * (f2[e] * ztx[e] + f3[e] * zt[e] * zx[e])
                }
                3 => yxx[e] * f1[e] + 3.0 * yxxx[e] * f2[e] * zx[e] + ytxx[e] * f2[e] * zt[e],
                4 => yxxx[e] * f1[e],
                5 => ytx[e] * f1[e] + 2.0 * ytxx[e] * f2[e] * zx[e],
                _ => ytxx[e] * f1[e],
            };
        }
    }
    pool.give(zero);
}

/// `∂loss/∂θ` for every parameter the tape was bound with; errors if the
/// handle is stale or the length of `params` disagrees with the tape.
pub fn grad_wrt_params(tape: &Tape, loss: Var, params: &[f64]) -> Result<Vec<f64>, AdError> {
    if params.len() != tape.params().len() {
        return Err(AdError::ParamCount {
            expected: tape.params().len(),
            got: params.len(),
        });
    }
    tape.gradient(loss)
}
