//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Operations are appended to a [`Tape`] in execution order, so the tape is a
//! topological order of the computation and the backward sweep simply walks
//! it in reverse. Parameter leaves remember which [`ParamStore`] entry they
//! came from; [`Tape::backward`] adds their adjoints into the store, so two
//! backward passes without `zero_grad` accumulate.

use alloc::vec::Vec;

use super::matrix::{matmul_into, Matrix};
use super::params::{ParamId, ParamStore};
use crate::{Error, Real, Result};

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    LayerNorm { x: Var, inv_std: Vec<T> },
    Softmax(Var),
    Gather(Var, Vec<u32>),
    ScatterAdd(Var, Vec<u32>),
    CrossEntropy { logits: Var, target: usize, probs: Vec<T> },
    Sum(Var),
    Mean(Var),
    Transpose(Var),
    Reshape(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

/// Single-owner record of one forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Adjoints of every tape node, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Adjoint of `v`, or `None` if `v` does not influence the root.
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

/// How the right operand of an elementwise op is broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Scalar,
}

fn broadcast_kind(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Result<Broadcast> {
    if lhs == rhs {
        Ok(Broadcast::Same)
    } else if rhs == (1, lhs.1) {
        Ok(Broadcast::Row)
    } else if rhs == (1, 1) {
        Ok(Broadcast::Scalar)
    } else {
        Err(Error::Shape { op, lhs, rhs })
    }
}

#[inline]
fn rhs_index(kind: Broadcast, i: usize, cols: usize) -> usize {
    match kind {
        Broadcast::Same => i,
        Broadcast::Row => i % cols,
        Broadcast::Scalar => 0,
    }
}

const LAYER_NORM_EPS: f64 = 1e-5;

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Constant input (receives an adjoint but belongs to no parameter).
    pub fn leaf(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Record the current value of a stored parameter.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// Elementwise sum; `b` may be same-shape, a `1×cols` row or a `1×1` scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let kind = broadcast_kind("add", av.shape(), bv.shape())?;
        let cols = av.cols();
        let mut out = av.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o += bv.data()[rhs_index(kind, i, cols)];
        }
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Elementwise product with the same broadcasting rules as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let kind = broadcast_kind("mul", av.shape(), bv.shape())?;
        let cols = av.cols();
        let mut out = av.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o *= bv.data()[rhs_index(kind, i, cols)];
        }
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(out, Op::Relu(a))
    }

    /// Horizontal concatenation (all parts share the row count).
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: (rows, cols),
                    rhs: s,
                });
            }
            cols += s.1;
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = self.value(p);
            for r in 0..rows {
                out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
            }
            off += v.cols();
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Vertical concatenation (all parts share the column count).
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    lhs: (rows, cols),
                    rhs: v.shape(),
                });
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let out = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Per-row standardisation to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let n = T::from_f64(cols as f64);
        let eps = T::from_f64(LAYER_NORM_EPS);
        let mut out = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            for (o, &v) in out.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
        }
        self.push(out, Op::LayerNorm { x, inv_std })
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Var {
        let out = softmax_rows(self.value(x));
        self.push(out, Op::Softmax(x))
    }

    /// Select rows of `x` by index.
    pub fn gather(&mut self, x: Var, index: &[u32]) -> Result<Var> {
        let xv = self.value(x);
        let cols = xv.cols();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index {
            if i as usize >= xv.rows() {
                return Err(Error::Index {
                    what: "gather source row",
                    index: i as usize,
                    len: xv.rows(),
                });
            }
            data.extend_from_slice(xv.row(i as usize));
        }
        let out = Matrix::from_vec(index.len(), cols, data)?;
        Ok(self.push(out, Op::Gather(x, index.to_vec())))
    }

    /// `out[i] = Σ_{e : dst[e] = i} messages[e]` over `out_rows` rows.
    pub fn scatter_add(&mut self, messages: Var, dst: &[u32], out_rows: usize) -> Result<Var> {
        let mv = self.value(messages);
        if mv.rows() != dst.len() {
            return Err(Error::Shape {
                op: "scatter_add",
                lhs: mv.shape(),
                rhs: (dst.len(), 1),
            });
        }
        let mut out = Matrix::zeros(out_rows, mv.cols());
        for (e, &d) in dst.iter().enumerate() {
            if d as usize >= out_rows {
                return Err(Error::Index {
                    what: "scatter_add destination",
                    index: d as usize,
                    len: out_rows,
                });
            }
            for (o, &m) in out.row_mut(d as usize).iter_mut().zip(mv.row(e)) {
                *o += m;
            }
        }
        Ok(self.push(out, Op::ScatterAdd(messages, dst.to_vec())))
    }

    /// `-log softmax(logits)[target]` for a `1×n` logit row.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != 1 {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: lv.shape(),
                rhs: (1, lv.cols()),
            });
        }
        if target >= lv.cols() {
            return Err(Error::Index {
                what: "cross_entropy target",
                index: target,
                len: lv.cols(),
            });
        }
        let row = lv.row(0);
        let (arg, max) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, b), (i, z)| if z > b { (i, z) } else { (bi, b) });
        // log-sum-exp as max + ln_1p(rest) keeps tiny losses accurate
        let rest: T = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != arg)
            .map(|(_, &z)| (z - max).exp())
            .sum();
        let lse = rest.ln_1p();
        let log_z = max + lse;
        let loss = (max - row[target]) + lse;
        let probs = row.iter().map(|&z| (z - log_z).exp()).collect();
        Ok(self.push(
            Matrix::scalar(loss),
            Op::CrossEntropy {
                logits,
                target,
                probs,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Matrix::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let n = (v.rows() * v.cols()).max(1);
        let s = v.sum() / T::from_f64(n as f64);
        self.push(Matrix::scalar(s), Op::Mean(x))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let out = self.value(x).transpose();
        self.push(out, Op::Transpose(x))
    }

    /// Reinterpret the row-major data with a new shape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let v = self.value(x);
        if v.rows() * v.cols() != rows * cols {
            return Err(Error::Shape {
                op: "reshape",
                lhs: v.shape(),
                rhs: (rows, cols),
            });
        }
        let out = Matrix::from_vec(rows, cols, v.data().to_vec())?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Reverse sweep from a `1×1` root; returns the adjoint of every node.
    pub fn gradients(&self, root: Var) -> Result<Gradients<T>> {
        if self.shape(root) != (1, 1) {
            return Err(Error::Contract(alloc::format!(
                "backward root must be a scalar, got {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Matrix<T>>> = alloc::vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(T::one()));
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Backpropagate from `root` and add parameter adjoints into `store`.
    pub fn backward(&self, root: Var, store: &mut ParamStore<T>) -> Result<()> {
        let grads = self.gradients(root)?;
        for (idx, node) in self.nodes.iter().enumerate().take(root.0 + 1) {
            if let (Op::Param(id), Some(g)) = (&node.op, grads.grads[idx].as_ref()) {
                store.grad_mut(*id).add_assign(g);
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = slot(grads, *a, av.shape());
                matmul_into(g, bv, ga, false, true);
                let gb = slot(grads, *b, bv.shape());
                matmul_into(av, g, gb, true, false);
            }
            Op::Add(a, b) => {
                let (ash, bsh) = (self.shape(*a), self.shape(*b));
                let kind = broadcast_kind("add", ash, bsh).expect("checked in forward");
                slot(grads, *a, ash).add_assign(g);
                let gb = slot(grads, *b, bsh);
                for (i, &gv) in g.data().iter().enumerate() {
                    gb.data_mut()[rhs_index(kind, i, ash.1)] += gv;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let kind = broadcast_kind("mul", av.shape(), bv.shape()).expect("checked in forward");
                let cols = av.cols();
                {
                    let ga = slot(grads, *a, av.shape());
                    for (i, (o, &gv)) in ga.data_mut().iter_mut().zip(g.data()).enumerate() {
                        *o += gv * bv.data()[rhs_index(kind, i, cols)];
                    }
                }
                let gb = slot(grads, *b, bv.shape());
                for (i, (&gv, &x)) in g.data().iter().zip(av.data()).enumerate() {
                    gb.data_mut()[rhs_index(kind, i, cols)] += gv * x;
                }
            }
            Op::Scale(a, s) => {
                let ga = slot(grads, *a, g.shape());
                for (o, &gv) in ga.data_mut().iter_mut().zip(g.data()) {
                    *o += gv * *s;
                }
            }
            Op::Relu(a) => {
                let out = &node.value;
                let ga = slot(grads, *a, g.shape());
                for ((o, &gv), &y) in ga.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                    if y > T::zero() {
                        *o += gv;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let sh = self.shape(p);
                    let gp = slot(grads, p, sh);
                    for r in 0..sh.0 {
                        for (o, &gv) in gp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + sh.1]) {
                            *o += gv;
                        }
                    }
                    off += sh.1;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let sh = self.shape(p);
                    let n = sh.0 * sh.1;
                    let gp = slot(grads, p, sh);
                    for (o, &gv) in gp.data_mut().iter_mut().zip(&g.data()[off..off + n]) {
                        *o += gv;
                    }
                    off += n;
                }
            }
            Op::LayerNorm { x, inv_std } => {
                let y = &node.value;
                let cols = y.cols();
                let n = T::from_f64(cols as f64);
                let gx = slot(grads, *x, y.shape());
                for r in 0..y.rows() {
                    let (gr, yr) = (g.row(r), y.row(r));
                    let mean_g = gr.iter().copied().sum::<T>() / n;
                    let mean_gy = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum::<T>() / n;
                    for ((o, &gv), &yv) in gx.row_mut(r).iter_mut().zip(gr).zip(yr) {
                        *o += inv_std[r] * (gv - mean_g - yv * mean_gy);
                    }
                }
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let gx = slot(grads, *x, y.shape());
                for r in 0..y.rows() {
                    let (gr, yr) = (g.row(r), y.row(r));
                    let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for ((o, &gv), &yv) in gx.row_mut(r).iter_mut().zip(gr).zip(yr) {
                        *o += yv * (gv - dot);
                    }
                }
            }
            Op::Gather(x, index) => {
                let sh = self.shape(*x);
                let gx = slot(grads, *x, sh);
                for (k, &i) in index.iter().enumerate() {
                    for (o, &gv) in gx.row_mut(i as usize).iter_mut().zip(g.row(k)) {
                        *o += gv;
                    }
                }
            }
            Op::ScatterAdd(m, dst) => {
                let sh = self.shape(*m);
                let gm = slot(grads, *m, sh);
                for (e, &d) in dst.iter().enumerate() {
                    for (o, &gv) in gm.row_mut(e).iter_mut().zip(g.row(d as usize)) {
                        *o += gv;
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                target,
                probs,
            } => {
                let gs = g.data()[0];
                let gl = slot(grads, *logits, (1, probs.len()));
                for (j, (o, &p)) in gl.data_mut().iter_mut().zip(probs).enumerate() {
                    let onehot = if j == *target { T::one() } else { T::zero() };
                    *o += gs * (p - onehot);
                }
            }
            Op::Sum(x) => {
                let gs = g.data()[0];
                let gx = slot(grads, *x, self.shape(*x));
                gx.data_mut().iter_mut().for_each(|o| *o += gs);
            }
            Op::Mean(x) => {
                let sh = self.shape(*x);
                let gs = g.data()[0] / T::from_f64((sh.0 * sh.1).max(1) as f64);
                let gx = slot(grads, *x, sh);
                gx.data_mut().iter_mut().for_each(|o| *o += gs);
            }
            Op::Transpose(x) => {
                let gt = g.transpose();
                slot(grads, *x, gt.shape()).add_assign(&gt);
            }
            Op::Reshape(x) => {
                let sh = self.shape(*x);
                let gx = slot(grads, *x, sh);
                for (o, &gv) in gx.data_mut().iter_mut().zip(g.data()) {
                    *o += gv;
                }
            }
        }
    }
}

fn slot<T: Real>(grads: &mut [Option<Matrix<T>>], v: Var, shape: (usize, usize)) -> &mut Matrix<T> {
    grads[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
}

/// Row-wise softmax of a plain matrix.
pub fn softmax_rows<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows)
    }

    #[test]
    fn identity_times_x() {
        let mut t = Tape::new();
        let i = t.leaf(Matrix::identity(2));
        let x = t.leaf(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(Matrix::zeros(2, 3));
        let b = t.leaf(Matrix::zeros(2, 3));
        assert_eq!(
            t.matmul(a, b),
            Err(Error::Shape {
                op: "matmul",
                lhs: (2, 3),
                rhs: (2, 3)
            })
        );
    }

    #[test]
    fn softmax_rows_behave() {
        let mut t = Tape::new();
        let x = t.leaf(m(&[&[0.0, 0.0, 0.0], &[1000.0, 0.0, -5.0]]));
        let y = t.softmax(x);
        let v = t.value(y);
        for c in 0..3 {
            assert!((v.get(0, c) - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((v.get(1, 0) - 1.0).abs() < 1e-12);
        assert!(v.get(1, 1) < 1e-300 || v.get(1, 1).abs() < 1e-12);
        assert!(v.is_finite());
    }

    #[test]
    fn scatter_add_groups_rows() {
        let mut t = Tape::new();
        let msg = t.leaf(m(&[&[1.0, 1.0], &[2.0, 2.0]]));
        let out = t.scatter_add(msg, &[0, 0], 2).unwrap();
        assert_eq!(t.value(out), &m(&[&[3.0, 3.0], &[0.0, 0.0]]));
        let empty = t.leaf(Matrix::zeros(0, 2));
        let z = t.scatter_add(empty, &[], 3).unwrap();
        assert_eq!(t.value(z), &Matrix::zeros(3, 2));
        assert!(matches!(t.scatter_add(msg, &[0, 2], 2), Err(Error::Index { .. })));
    }

    #[test]
    fn cross_entropy_values() {
        let mut t = Tape::new();
        let z = t.leaf(Matrix::filled(1, 4, 0.3));
        let l = t.cross_entropy(z, 2).unwrap();
        assert!((t.value(l).get(0, 0) - 4f64.ln()).abs() < 1e-12);

        let z = t.leaf(m(&[&[10.0, -10.0]]));
        let l = t.cross_entropy(z, 0).unwrap();
        // -log sigmoid(20) = log(1 + e^-20)
        let want = (-20f64).exp().ln_1p();
        assert!((t.value(l).get(0, 0) - want).abs() < 1e-18);
        assert!((want - 2.0611536e-9).abs() < 1e-15);
        assert!(t.cross_entropy(z, 2).is_err());
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let mut t = Tape::new();
        let z = t.leaf(m(&[&[0.5, -1.0, 2.0]]));
        let l = t.cross_entropy(z, 1).unwrap();
        let g = t.gradients(l).unwrap();
        let p = softmax_rows(t.value(z));
        let gz = g.get(z).unwrap();
        for j in 0..3 {
            let want = p.get(0, j) - if j == 1 { 1.0 } else { 0.0 };
            assert!((gz.get(0, j) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_of_param_has_unit_grad() {
        let mut store = ParamStore::new();
        let p = store.insert("p", m(&[&[1.0, -2.0], &[0.5, 3.0]])).unwrap();
        let q = store.insert("q", Matrix::filled(1, 1, 4.0)).unwrap();
        let mut t = Tape::new();
        let pv = t.param(&store, p);
        let l = t.sum(pv);
        // a disconnected computation on q
        let qv = t.param(&store, q);
        let _ = t.scale(qv, 2.0);
        t.backward(l, &mut store).unwrap();
        assert_eq!(store.grad(p), &Matrix::filled(2, 2, 1.0));
        assert_eq!(store.grad(q), &Matrix::zeros(1, 1));
        // replay without reset accumulates
        t.backward(l, &mut store).unwrap();
        assert_eq!(store.grad(p), &Matrix::filled(2, 2, 2.0));
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Matrix::zeros(2, 2));
        assert!(matches!(t.gradients(x), Err(Error::Contract(_))));
    }

    #[test]
    fn broadcast_add_and_mul() {
        let mut t = Tape::new();
        let a = t.leaf(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let row = t.leaf(m(&[&[10.0, 20.0]]));
        let s = t.leaf(Matrix::scalar(2.0));
        let x = t.add(a, row).unwrap();
        let y = t.mul(x, s).unwrap();
        assert_eq!(t.value(y), &m(&[&[22.0, 44.0], &[26.0, 48.0]]));
        let l = t.sum(y);
        let g = t.gradients(l).unwrap();
        assert_eq!(g.get(row).unwrap(), &m(&[&[4.0, 4.0]]));
        assert_eq!(g.get(s).unwrap(), &Matrix::scalar(11.0 + 22.0 + 13.0 + 24.0));
        let bad = t.leaf(Matrix::zeros(2, 1));
        assert!(t.add(a, bad).is_err());
    }
}
