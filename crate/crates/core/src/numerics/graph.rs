//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`] handles. Leaves
//! are either named parameters (tracked) or constants (untracked); an op is
//! tracked when any of its inputs is. [`Graph::backward`] walks the tape in
//! reverse from a scalar root and accumulates gradients for every named
//! parameter.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use indexmap::IndexMap;

use crate::error::{Error, Result};

use super::{Real, Tensor};

/// Per-parameter gradients, keyed by parameter name in registration order.
pub type Gradients<T> = IndexMap<String, Tensor<T>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

enum Op<T> {
    Leaf,
    MatMul { a: usize, b: usize, trans_b: bool },
    AddRow { x: usize, bias: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { x: usize, c: T },
    Activate { x: usize, act: Activation },
    Ln { x: usize },
    NormalizeRows { x: usize, norms: Vec<T> },
    SoftmaxRows { x: usize },
    MaskedLogSumExp { x: usize, weights: Vec<T> },
    Pick { x: usize, cols: Vec<usize> },
    Sum { x: usize },
    Mean { x: usize },
    SumCols { x: usize },
    SliceRows { x: usize, start: usize },
    ConcatRows { parts: Vec<usize> },
    ConcatCols { a: usize, b: usize },
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op<T>,
    tracked: bool,
}

/// Single-use computation tape. Confined to one thread.
pub struct Graph<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<IndexMap<String, usize>>,
    grads: RefCell<Gradients<T>>,
    consumed: Cell<bool>,
}

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g, T: Real> {
    graph: &'g Graph<T>,
    id: usize,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(IndexMap::new()),
            grads: RefCell::new(IndexMap::new()),
            consumed: Cell::new(false),
        }
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            tracked,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn tracked(&self, id: usize) -> bool {
        self.nodes.borrow()[id].tracked
    }

    /// Registers a named, gradient-tracked leaf.
    ///
    /// Panics if the name is already registered on this graph.
    pub fn param(&self, name: &str, value: Tensor<T>) -> Var<'_, T> {
        let var = self.push(value, Op::Leaf, true);
        let previous = self.params.borrow_mut().insert(name.to_string(), var.id);
        assert!(previous.is_none(), "parameter {name} registered twice");
        var
    }

    /// Registers an untracked leaf.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Accumulated parameter gradients from the last backward pass.
    pub fn gradients(&self) -> Gradients<T> {
        self.grads.borrow().clone()
    }

    /// Drops accumulated gradients and re-arms [`Graph::backward`].
    pub fn clear_grads(&self) {
        self.grads.borrow_mut().clear();
        self.consumed.set(false);
    }

    /// Back-propagates from a scalar root and returns `∂root/∂p` for every
    /// registered parameter that the root depends on.
    pub fn backward(&self, root: Var<'_, T>) -> Result<Gradients<T>> {
        assert!(
            std::ptr::eq(root.graph, self),
            "root belongs to another graph"
        );
        if self.consumed.get() {
            return Err(Error::GraphConsumed);
        }
        let nodes = self.nodes.borrow();
        let root_node = &nodes[root.id];
        if root_node.value.numel() != 1 {
            return Err(Error::NonScalarRoot(root_node.value.shape().to_vec()));
        }
        if !root_node.tracked {
            return Err(Error::DetachedRoot);
        }

        let mut grads: Vec<Option<Vec<T>>> = vec![None; root.id + 1];
        grads[root.id] = Some(vec![T::one()]);
        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.tracked {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[id] = Some(g);
                continue;
            }
            propagate(&nodes, id, &g, &mut grads);
        }

        let mut acc = self.grads.borrow_mut();
        for (name, &id) in self.params.borrow().iter() {
            if id > root.id {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let shape = nodes[id].value.shape().to_vec();
            match acc.get_mut(name) {
                Some(existing) => {
                    for (e, v) in existing.data_mut().iter_mut().zip(g) {
                        *e += v;
                    }
                }
                None => {
                    acc.insert(name.clone(), Tensor::new(shape, g)?);
                }
            }
        }
        self.consumed.set(true);
        Ok(acc.clone())
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], id: usize, contrib: Vec<T>) {
    match &mut grads[id] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(contrib) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(contrib),
    }
}

fn matrix_dims<T: Real>(t: &Tensor<T>) -> (usize, usize) {
    assert_eq!(
        t.shape().len(),
        2,
        "expected a matrix, got shape {:?}",
        t.shape()
    );
    (t.shape()[0], t.shape()[1])
}

fn propagate<T: Real>(nodes: &[Node<T>], id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let node = &nodes[id];
    let tracked = |i: usize| nodes[i].tracked;
    let val = |i: usize| &nodes[i].value;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul { a, b, trans_b } => {
            let (m, k) = matrix_dims(val(*a));
            let bv = val(*b);
            let n = if *trans_b {
                bv.shape()[0]
            } else {
                bv.shape()[1]
            };
            let (ad, bd) = (val(*a).data(), bv.data());
            let g_rs = (n as isize, 1);
            if tracked(*a) {
                // dA = G · Bᵀ (or G · B when B was transposed)
                let mut da = vec![T::zero(); m * k];
                let b_strides = if *trans_b {
                    (k as isize, 1)
                } else {
                    (1, n as isize)
                };
                T::gemm(m, n, k, g, g_rs, bd, b_strides, &mut da, false);
                accumulate(grads, *a, da);
            }
            if tracked(*b) {
                let mut db = vec![T::zero(); k * n];
                if *trans_b {
                    // B is n × k: dB = Gᵀ · A
                    T::gemm(
                        n,
                        m,
                        k,
                        g,
                        (1, n as isize),
                        ad,
                        (k as isize, 1),
                        &mut db,
                        false,
                    );
                } else {
                    // dB = Aᵀ · G
                    T::gemm(k, m, n, ad, (1, k as isize), g, g_rs, &mut db, false);
                }
                accumulate(grads, *b, db);
            }
        }
        Op::AddRow { x, bias } => {
            if tracked(*x) {
                accumulate(grads, *x, g.to_vec());
            }
            if tracked(*bias) {
                let n = val(*bias).numel();
                let mut db = vec![T::zero(); n];
                for row in g.chunks(n) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                accumulate(grads, *bias, db);
            }
        }
        Op::Add { a, b } => {
            if tracked(*a) {
                accumulate(grads, *a, g.to_vec());
            }
            if tracked(*b) {
                accumulate(grads, *b, g.to_vec());
            }
        }
        Op::Sub { a, b } => {
            if tracked(*a) {
                accumulate(grads, *a, g.to_vec());
            }
            if tracked(*b) {
                accumulate(grads, *b, g.iter().map(|&v| -v).collect());
            }
        }
        Op::Mul { a, b } => {
            if tracked(*a) {
                let bd = val(*b).data();
                accumulate(grads, *a, g.iter().zip(bd).map(|(&u, &v)| u * v).collect());
            }
            if tracked(*b) {
                let ad = val(*a).data();
                accumulate(grads, *b, g.iter().zip(ad).map(|(&u, &v)| u * v).collect());
            }
        }
        Op::Scale { x, c } => {
            accumulate(grads, *x, g.iter().map(|&v| v * *c).collect());
        }
        Op::Activate { x, act } => {
            let contrib = match act {
                Activation::Relu => g
                    .iter()
                    .zip(val(*x).data())
                    .map(|(&u, &xv)| if xv > T::zero() { u } else { T::zero() })
                    .collect(),
                Activation::Tanh => g
                    .iter()
                    .zip(node.value.data())
                    .map(|(&u, &y)| u * (T::one() - y * y))
                    .collect(),
            };
            accumulate(grads, *x, contrib);
        }
        Op::Ln { x } => {
            accumulate(
                grads,
                *x,
                g.iter().zip(val(*x).data()).map(|(&u, &v)| u / v).collect(),
            );
        }
        Op::NormalizeRows { x, norms } => {
            let y = &node.value;
            let c = y.cols();
            let mut dx = Vec::with_capacity(g.len());
            for (r, &norm) in norms.iter().enumerate() {
                let yr = &y.data()[r * c..(r + 1) * c];
                let gr = &g[r * c..(r + 1) * c];
                let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                dx.extend(yr.iter().zip(gr).map(|(&yv, &gv)| (gv - yv * dot) / norm));
            }
            accumulate(grads, *x, dx);
        }
        Op::SoftmaxRows { x } => {
            let y = &node.value;
            let c = y.cols();
            let mut dx = Vec::with_capacity(g.len());
            for (yr, gr) in y.data().chunks(c).zip(g.chunks(c)) {
                let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                dx.extend(yr.iter().zip(gr).map(|(&yv, &gv)| yv * (gv - dot)));
            }
            accumulate(grads, *x, dx);
        }
        Op::MaskedLogSumExp { x, weights } => {
            let c = val(*x).cols();
            let mut dx = Vec::with_capacity(weights.len());
            for (r, &gr) in g.iter().enumerate() {
                dx.extend(weights[r * c..(r + 1) * c].iter().map(|&w| w * gr));
            }
            accumulate(grads, *x, dx);
        }
        Op::Pick { x, cols } => {
            let c = val(*x).cols();
            let mut dx = vec![T::zero(); val(*x).numel()];
            for (r, (&col, &gr)) in cols.iter().zip(g).enumerate() {
                dx[r * c + col] += gr;
            }
            accumulate(grads, *x, dx);
        }
        Op::Sum { x } => {
            accumulate(grads, *x, vec![g[0]; val(*x).numel()]);
        }
        Op::Mean { x } => {
            let n = val(*x).numel();
            accumulate(grads, *x, vec![g[0] / T::of(n as f64); n]);
        }
        Op::SumCols { x } => {
            let c = val(*x).cols();
            let mut dx = Vec::with_capacity(val(*x).numel());
            for &gr in g {
                dx.extend(std::iter::repeat_n(gr, c));
            }
            accumulate(grads, *x, dx);
        }
        Op::SliceRows { x, start } => {
            let c = val(*x).cols();
            let mut dx = vec![T::zero(); val(*x).numel()];
            dx[start * c..start * c + g.len()].copy_from_slice(g);
            accumulate(grads, *x, dx);
        }
        Op::ConcatRows { parts } => {
            let mut offset = 0;
            for &p in parts {
                let n = val(p).numel();
                if tracked(p) {
                    accumulate(grads, p, g[offset..offset + n].to_vec());
                }
                offset += n;
            }
        }
        Op::ConcatCols { a, b } => {
            let ca = val(*a).cols();
            let cb = val(*b).cols();
            let rows = val(*a).rows();
            if tracked(*a) {
                let mut da = Vec::with_capacity(rows * ca);
                for r in 0..rows {
                    da.extend_from_slice(&g[r * (ca + cb)..r * (ca + cb) + ca]);
                }
                accumulate(grads, *a, da);
            }
            if tracked(*b) {
                let mut db = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    db.extend_from_slice(&g[r * (ca + cb) + ca..(r + 1) * (ca + cb)]);
                }
                accumulate(grads, *b, db);
            }
        }
    }
}

impl<'g, T: Real> Var<'g, T> {
    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn is_tracked(&self) -> bool {
        self.graph.tracked(self.id)
    }

    /// Scalar value of a single-element node.
    pub fn item(&self) -> T {
        self.value().item()
    }

    fn same_graph(&self, other: &Var<'g, T>) {
        assert!(
            std::ptr::eq(self.graph, other.graph),
            "vars belong to different graphs"
        );
    }

    fn unary(&self, value: Tensor<T>, op: Op<T>) -> Var<'g, T> {
        self.graph.push(value, op, self.is_tracked())
    }

    fn binary(&self, other: &Var<'g, T>, value: Tensor<T>, op: Op<T>) -> Var<'g, T> {
        self.same_graph(other);
        let tracked = self.is_tracked() || other.is_tracked();
        self.graph.push(value, op, tracked)
    }

    /// Untracked copy of this node's value.
    pub fn detach(&self) -> Var<'g, T> {
        self.graph.constant((*self.value()).clone())
    }

    fn matmul_impl(&self, other: &Var<'g, T>, trans_b: bool) -> Var<'g, T> {
        let a = self.value();
        let b = other.value();
        let (m, k) = matrix_dims(&a);
        let (br, bc) = matrix_dims(&b);
        let (kb, n, b_strides) = if trans_b {
            (bc, br, (1, bc as isize))
        } else {
            (br, bc, (bc as isize, 1))
        };
        assert_eq!(
            k,
            kb,
            "matmul inner dimensions {:?} x {:?}",
            a.shape(),
            b.shape()
        );
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            a.data(),
            (k as isize, 1),
            b.data(),
            b_strides,
            &mut out,
            false,
        );
        let value = Tensor::new(vec![m, n], out).expect("matmul shape");
        self.binary(
            other,
            value,
            Op::MatMul {
                a: self.id,
                b: other.id,
                trans_b,
            },
        )
    }

    /// `self · other` for matrices.
    pub fn matmul(&self, other: &Var<'g, T>) -> Var<'g, T> {
        self.matmul_impl(other, false)
    }

    /// `self · otherᵀ` for matrices.
    pub fn matmul_t(&self, other: &Var<'g, T>) -> Var<'g, T> {
        self.matmul_impl(other, true)
    }

    /// Adds a bias vector to every row.
    pub fn add_row(&self, bias: &Var<'g, T>) -> Var<'g, T> {
        let x = self.value();
        let b = bias.value();
        let c = x.cols();
        assert_eq!(b.numel(), c, "bias length {} vs row width {c}", b.numel());
        let data = x
            .data()
            .chunks(c)
            .flat_map(|row| row.iter().zip(b.data()).map(|(&u, &v)| u + v))
            .collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("add_row shape");
        self.binary(
            bias,
            value,
            Op::AddRow {
                x: self.id,
                bias: bias.id,
            },
        )
    }

    fn zip_with(&self, other: &Var<'g, T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let a = self.value();
        let b = other.value();
        assert_eq!(a.shape(), b.shape(), "elementwise operands differ in shape");
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&u, &v)| f(u, v))
            .collect();
        Tensor::new(a.shape().to_vec(), data).expect("elementwise shape")
    }

    fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        let a = self.value();
        Tensor::new(a.shape().to_vec(), a.data().iter().map(|&v| f(v)).collect())
            .expect("map shape")
    }

    pub fn add(&self, other: &Var<'g, T>) -> Var<'g, T> {
        let value = self.zip_with(other, |u, v| u + v);
        self.binary(
            other,
            value,
            Op::Add {
                a: self.id,
                b: other.id,
            },
        )
    }

    pub fn sub(&self, other: &Var<'g, T>) -> Var<'g, T> {
        let value = self.zip_with(other, |u, v| u - v);
        self.binary(
            other,
            value,
            Op::Sub {
                a: self.id,
                b: other.id,
            },
        )
    }

    pub fn mul(&self, other: &Var<'g, T>) -> Var<'g, T> {
        let value = self.zip_with(other, |u, v| u * v);
        self.binary(
            other,
            value,
            Op::Mul {
                a: self.id,
                b: other.id,
            },
        )
    }

    pub fn scale(&self, c: T) -> Var<'g, T> {
        let value = self.map(|v| v * c);
        self.unary(value, Op::Scale { x: self.id, c })
    }

    pub fn activate(&self, act: Activation) -> Var<'g, T> {
        let value = match act {
            Activation::Relu => self.map(|v| v.max(T::zero())),
            Activation::Tanh => self.map(T::tanh),
        };
        self.unary(value, Op::Activate { x: self.id, act })
    }

    pub fn relu(&self) -> Var<'g, T> {
        self.activate(Activation::Relu)
    }

    pub fn ln(&self) -> Var<'g, T> {
        let value = self.map(T::ln);
        self.unary(value, Op::Ln { x: self.id })
    }

    pub fn square(&self) -> Var<'g, T> {
        self.mul(self)
    }

    /// Scales every row to unit L2 norm. Fails on a zero row.
    pub fn normalize_rows(&self) -> Result<Var<'g, T>> {
        let x = self.value();
        let c = x.cols();
        let mut norms = Vec::with_capacity(x.rows());
        let mut data = Vec::with_capacity(x.numel());
        for row in x.data().chunks(c) {
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm <= T::zero() || !norm.is_finite() {
                return Err(Error::ZeroNorm("embedding row"));
            }
            data.extend(row.iter().map(|&v| v / norm));
            norms.push(norm);
        }
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.unary(value, Op::NormalizeRows { x: self.id, norms }))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&self) -> Var<'g, T> {
        let x = self.value();
        let c = x.cols();
        let mut data = Vec::with_capacity(x.numel());
        for row in x.data().chunks(c) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let start = data.len();
            data.extend(row.iter().map(|&v| (v - max).exp()));
            let total: T = data[start..].iter().copied().sum();
            data[start..].iter_mut().for_each(|v| *v /= total);
        }
        let value = Tensor::new(x.shape().to_vec(), data).expect("softmax shape");
        self.unary(value, Op::SoftmaxRows { x: self.id })
    }

    /// `out_i = ln Σ_{j : mask[i][j]} exp(x_ij)` over a row-major boolean mask.
    ///
    /// Panics if a row has no selected entry.
    pub fn masked_logsumexp_rows(&self, mask: &[bool]) -> Var<'g, T> {
        let x = self.value();
        assert_eq!(mask.len(), x.numel(), "mask size");
        let c = x.cols();
        let mut out = Vec::with_capacity(x.rows());
        let mut weights = vec![T::zero(); x.numel()];
        for (r, (row, mrow)) in x.data().chunks(c).zip(mask.chunks(c)).enumerate() {
            let max = row
                .iter()
                .zip(mrow)
                .filter(|(_, &m)| m)
                .map(|(&v, _)| v)
                .fold(T::neg_infinity(), T::max);
            assert!(max > T::neg_infinity(), "row {r} has an empty mask");
            let w = &mut weights[r * c..(r + 1) * c];
            let mut total = T::zero();
            for ((wv, &v), &m) in w.iter_mut().zip(row).zip(mrow) {
                if m {
                    *wv = (v - max).exp();
                    total += *wv;
                }
            }
            w.iter_mut().for_each(|v| *v /= total);
            out.push(max + total.ln());
        }
        let value = Tensor::vector(out);
        self.unary(
            value,
            Op::MaskedLogSumExp {
                x: self.id,
                weights,
            },
        )
    }

    /// `out_i = x[i, cols[i]]`.
    pub fn pick(&self, cols: &[usize]) -> Var<'g, T> {
        let x = self.value();
        assert_eq!(cols.len(), x.rows(), "one column per row");
        let c = x.cols();
        let data = cols
            .iter()
            .enumerate()
            .map(|(r, &j)| x.data()[r * c + j])
            .collect();
        self.unary(
            Tensor::vector(data),
            Op::Pick {
                x: self.id,
                cols: cols.to_vec(),
            },
        )
    }

    pub fn sum(&self) -> Var<'g, T> {
        let total = self.value().data().iter().copied().sum();
        self.unary(Tensor::scalar(total), Op::Sum { x: self.id })
    }

    pub fn mean(&self) -> Var<'g, T> {
        let x = self.value();
        let total: T = x.data().iter().copied().sum();
        let value = Tensor::scalar(total / T::of(x.numel() as f64));
        self.unary(value, Op::Mean { x: self.id })
    }

    /// Sums each row of a matrix into a vector.
    pub fn sum_cols(&self) -> Var<'g, T> {
        let x = self.value();
        let data = x
            .data()
            .chunks(x.cols())
            .map(|r| r.iter().copied().sum())
            .collect();
        self.unary(Tensor::vector(data), Op::SumCols { x: self.id })
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Var<'g, T> {
        let x = self.value();
        let (rows, c) = matrix_dims(&x);
        assert!(
            start <= end && end <= rows,
            "row slice {start}..{end} of {rows}"
        );
        let value = Tensor::new(vec![end - start, c], x.data()[start * c..end * c].to_vec())
            .expect("slice shape");
        self.unary(value, Op::SliceRows { x: self.id, start })
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(parts: &[Var<'g, T>]) -> Var<'g, T> {
        let first = parts.first().expect("concat of nothing");
        let cols = first.value().cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            first.same_graph(p);
            let v = p.value();
            assert_eq!(v.cols(), cols, "concat_rows column mismatch");
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let tracked = parts.iter().any(Var::is_tracked);
        let value = Tensor::new(vec![rows, cols], data).expect("concat shape");
        first.graph.push(
            value,
            Op::ConcatRows {
                parts: parts.iter().map(|p| p.id).collect(),
            },
            tracked,
        )
    }

    /// Places `other`'s columns to the right of `self`'s.
    pub fn concat_cols(&self, other: &Var<'g, T>) -> Var<'g, T> {
        let a = self.value();
        let b = other.value();
        let rows = a.rows();
        assert_eq!(rows, b.rows(), "concat_cols row mismatch");
        let (ca, cb) = (a.cols(), b.cols());
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            data.extend_from_slice(a.row(r));
            data.extend_from_slice(b.row(r));
        }
        let value = Tensor::new(vec![rows, ca + cb], data).expect("concat shape");
        self.binary(
            other,
            value,
            Op::ConcatCols {
                a: self.id,
                b: other.id,
            },
        )
    }

    /// Reshapes a vector into an `n × 1` column.
    pub fn as_column(&self) -> Var<'g, T> {
        let x = self.value();
        let value = Tensor::new(vec![x.numel(), 1], x.data().to_vec()).expect("column shape");
        // A copy with a new shape is a single-part row concat.
        self.graph.push(
            value,
            Op::ConcatRows {
                parts: vec![self.id],
            },
            self.is_tracked(),
        )
    }
}
