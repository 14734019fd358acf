use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{dot, norm, Matrix};
use crate::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Relu(Var),
    Sigmoid(Var),
    Ln(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    L2NormalizeRows(Var),
    MeanRows(Var),
    BlockMeanRows(Var, usize),
    SumAll(Var),
    ConcatRows(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    AddRowBroadcast(Var, Var),
    AddScalarVar(Var, Var),
    ScaleRows(Var, Var),
    Gather(Var, Vec<(usize, usize)>),
    PairwiseDistances(Var, Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Append-only evaluation record for reverse-mode differentiation.
///
/// Nodes are only ever appended after their operands, so walking the node
/// list backwards is a reverse topological order and [`Graph::backward`]
/// visits every node once. A graph is a single-threaded, per-step object:
/// build it, call `backward`, read the gradients, drop it.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn dim_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Dimension {
        op,
        left: a.shape(),
        right: b.shape(),
    }
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

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Registers an input (parameter or constant).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Option<f64> {
        self.value(v).as_scalar()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).scale(factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|v| v + c);
        self.push(value, Op::AddConst(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.push(value, Op::MatMulNt(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    /// Natural logarithm; every entry must be positive.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if let Some(bad) = x.data().iter().position(|&v| v <= 0.0) {
            return Err(Error::Contract(format!(
                "ln: non-positive entry at flat index {bad}"
            )));
        }
        let value = x.map(libm::log);
        Ok(self.push(value, Op::Ln(a)))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let value = super::softmax_rows(self.value(a))?;
        Ok(self.push(value, Op::SoftmaxRows(a)))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::Contract("log_softmax_rows: empty input".into()));
        }
        let mut value = x.clone();
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            row.iter_mut().for_each(|v| *v -= lse);
        }
        Ok(self.push(value, Op::LogSoftmaxRows(a)))
    }

    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).l2_normalize_rows()?;
        Ok(self.push(value, Op::L2NormalizeRows(a)))
    }

    /// Cosine similarity of every row of `a` against every row of `b`.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.cols() {
            return Err(dim_err("cosine_rows", x, y));
        }
        let an = self.l2_normalize_rows(a).map_err(|e| relabel(e, "cosine_rows (left)"))?;
        let bn = self.l2_normalize_rows(b).map_err(|e| relabel(e, "cosine_rows (right)"))?;
        self.matmul_nt(an, bn)
    }

    /// Mean over rows: `n×c → 1×c`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(Error::Contract("mean_rows: no rows".into()));
        }
        let mut value = Matrix::zeros(1, x.cols());
        for r in 0..x.rows() {
            for (o, v) in value.data_mut().iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        let n = x.rows() as f64;
        value.data_mut().iter_mut().for_each(|v| *v /= n);
        Ok(self.push(value, Op::MeanRows(a)))
    }

    /// Mean of each consecutive block of `block` rows.
    pub fn block_mean_rows(&mut self, a: Var, block: usize) -> Result<Var> {
        let x = self.value(a);
        if block == 0 || x.rows() % block != 0 {
            return Err(Error::Config(format!(
                "block mean: {} rows not divisible into groups of {block}",
                x.rows()
            )));
        }
        let groups = x.rows() / block;
        let mut value = Matrix::zeros(groups, x.cols());
        for r in 0..x.rows() {
            let out = value.row_mut(r / block);
            for (o, v) in out.iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        let inv = 1.0 / block as f64;
        value.data_mut().iter_mut().for_each(|v| *v *= inv);
        Ok(self.push(value, Op::BlockMeanRows(a, block)))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::Contract("mean_all: empty input".into()));
        }
        let s = self.sum_all(a);
        Ok(self.scale(s, 1.0 / n as f64))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let value = Matrix::concat_rows(&mats)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    /// Gathers rows by index; repeated indices accumulate gradient.
    pub fn select_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let value = self.value(a).select_rows(index)?;
        Ok(self.push(value, Op::SelectRows(a, index.to_vec())))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let index: Vec<usize> = (start..end).collect();
        self.select_rows(a, &index)
    }

    /// `x + b` with `b` a `1×c` row added to every row of `x`.
    pub fn add_row_broadcast(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(dim_err("add_row_broadcast", xv, bv));
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (o, v) in value.row_mut(r).iter_mut().zip(bv.data()) {
                *o += v;
            }
        }
        Ok(self.push(value, Op::AddRowBroadcast(x, b)))
    }

    /// `x + s` with `s` a `1×1` node.
    pub fn add_scalar_var(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xv, sv) = (self.value(x), self.value(s));
        let Some(c) = sv.as_scalar() else {
            return Err(dim_err("add_scalar_var", xv, sv));
        };
        let value = xv.map(|v| v + c);
        Ok(self.push(value, Op::AddScalarVar(x, s)))
    }

    /// Multiplies row `r` of `x` by `col[r]`, with `col` an `n×1` node.
    pub fn scale_rows(&mut self, x: Var, col: Var) -> Result<Var> {
        let (xv, cv) = (self.value(x), self.value(col));
        if cv.cols() != 1 || cv.rows() != xv.rows() {
            return Err(dim_err("scale_rows", xv, cv));
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let c = cv.get(r, 0);
            value.row_mut(r).iter_mut().for_each(|v| *v *= c);
        }
        Ok(self.push(value, Op::ScaleRows(x, col)))
    }

    /// Picks entries `(row, col)` into a `k×1` column.
    pub fn gather(&mut self, a: Var, at: &[(usize, usize)]) -> Result<Var> {
        let x = self.value(a);
        let mut data = Vec::with_capacity(at.len());
        for &(r, c) in at {
            if r >= x.rows() || c >= x.cols() {
                return Err(Error::Contract(format!(
                    "gather: ({r}, {c}) outside {}x{}",
                    x.rows(),
                    x.cols()
                )));
            }
            data.push(x.get(r, c));
        }
        let value = Matrix::from_vec(at.len(), 1, data)?;
        Ok(self.push(value, Op::Gather(a, at.to_vec())))
    }

    /// Euclidean distance between every row of `a` and every row of `b`.
    ///
    /// At coincident rows the distance is not differentiable; the zero
    /// subgradient is used there.
    pub fn pairwise_distances(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.cols() {
            return Err(dim_err("pairwise_distances", x, y));
        }
        let mut value = Matrix::zeros(x.rows(), y.rows());
        for i in 0..x.rows() {
            for j in 0..y.rows() {
                let d2: f64 = x.row(i).iter().zip(y.row(j)).map(|(p, q)| (p - q) * (p - q)).sum();
                value.set(i, j, libm::sqrt(d2));
            }
        }
        Ok(self.push(value, Op::PairwiseDistances(a, b)))
    }

    /// Reverse sweep from a `1×1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, got {}x{}",
                out.rows(),
                out.cols()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::scalar(1.0));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.scale(-1.0));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.hadamard(self.value(*b))?;
                    let gb = g.hadamard(self.value(*a))?;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, g.scale(*f)),
                Op::AddConst(a) => accumulate(&mut grads, *a, g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_nt(self.value(*b))?;
                    let gb = self.value(*a).matmul_tn(&g)?;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulNt(a, b) => {
                    let ga = g.matmul(self.value(*b))?;
                    let gb = g.matmul_tn(self.value(*a))?;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut ga = g;
                    for (o, &v) in ga.data_mut().iter_mut().zip(x.data()) {
                        if v <= 0.0 {
                            *o = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    for (o, &y) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        *o *= y * (1.0 - y);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Ln(a) => {
                    let mut ga = g;
                    for (o, &x) in ga.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *o /= x;
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = g;
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let inner = dot(ga.row(r), yr);
                        for (o, &p) in ga.row_mut(r).iter_mut().zip(yr) {
                            *o = p * (*o - inner);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::LogSoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = g;
                    for r in 0..y.rows() {
                        let total: f64 = ga.row(r).iter().sum();
                        for (o, &ly) in ga.row_mut(r).iter_mut().zip(y.row(r)) {
                            *o -= libm::exp(ly) * total;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::L2NormalizeRows(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let mut ga = g;
                    for r in 0..y.rows() {
                        let n = norm(x.row(r));
                        let yr = y.row(r);
                        let inner = dot(ga.row(r), yr);
                        for (o, &p) in ga.row_mut(r).iter_mut().zip(yr) {
                            *o = (*o - p * inner) / n;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::MeanRows(a) => {
                    let x = self.value(*a);
                    let n = x.rows() as f64;
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.data()) {
                            *o = v / n;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::BlockMeanRows(a, block) => {
                    let x = self.value(*a);
                    let inv = 1.0 / *block as f64;
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(r / block)) {
                            *o = v * inv;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumAll(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Matrix::filled(rows, cols, g.get(0, 0)));
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let index: Vec<usize> = (offset..offset + rows).collect();
                        accumulate(&mut grads, p, g.select_rows(&index)?);
                        offset += rows;
                    }
                }
                Op::SelectRows(a, index) => {
                    let x = self.value(*a);
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for (k, &r) in index.iter().enumerate() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::AddRowBroadcast(x, b) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *x, g);
                }
                Op::AddScalarVar(x, s) => {
                    accumulate(&mut grads, *s, Matrix::scalar(g.sum()));
                    accumulate(&mut grads, *x, g);
                }
                Op::ScaleRows(x, col) => {
                    let xv = self.value(*x);
                    let cv = self.value(*col);
                    let mut gc = Matrix::zeros(cv.rows(), 1);
                    let mut gx = g.clone();
                    for r in 0..xv.rows() {
                        gc.set(r, 0, dot(g.row(r), xv.row(r)));
                        let c = cv.get(r, 0);
                        gx.row_mut(r).iter_mut().for_each(|v| *v *= c);
                    }
                    accumulate(&mut grads, *col, gc);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Gather(a, at) => {
                    let (rows, cols) = self.value(*a).shape();
                    let mut ga = Matrix::zeros(rows, cols);
                    for (k, &(r, c)) in at.iter().enumerate() {
                        let cur = ga.get(r, c);
                        ga.set(r, c, cur + g.get(k, 0));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::PairwiseDistances(a, b) => {
                    let (x, y, d) = (self.value(*a), self.value(*b), &node.value);
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    let mut gb = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..x.rows() {
                        for j in 0..y.rows() {
                            let dist = d.get(i, j);
                            let gij = g.get(i, j);
                            if dist <= 0.0 || gij == 0.0 {
                                continue;
                            }
                            let k = gij / dist;
                            for c in 0..x.cols() {
                                let diff = k * (x.get(i, c) - y.get(j, c));
                                ga.row_mut(i)[c] += diff;
                                gb.row_mut(j)[c] -= diff;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn relabel(e: Error, op: &'static str) -> Error {
    match e {
        Error::Degenerate { row, .. } => Error::Degenerate { op, row },
        other => other,
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Gradients of one backward sweep, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` when no path connects `v` to the output.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zero-filled in the shape of `like` when unreached.
    pub fn get_or_zeros(&self, v: Var, like: &Matrix) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(like.rows(), like.cols()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_sum_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum_all(sq);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap(), &Matrix::from_rows(&[[2.0, -4.0], [6.0, 1.0]]));
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Matrix::from_rows(&[[1.0, 2.0]]));
        let unused = g.leaf(Matrix::from_rows(&[[5.0]]));
        let s = g.sum_all(x);
        let grads = g.backward(s).unwrap();
        assert!(grads.get(unused).is_none());
        let z = grads.get_or_zeros(unused, g.value(unused));
        assert_eq!(z.data(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Matrix::zeros(2, 2));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = sum(x) + sum(x) → df/dx = 2
        let mut g = Graph::new();
        let x = g.leaf(Matrix::from_rows(&[[1.0, 2.0, 3.0]]));
        let a = g.sum_all(x);
        let b = g.sum_all(x);
        let f = g.add(a, b).unwrap();
        let grads = g.backward(f).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn distance_at_coincident_rows_is_finite() {
        let mut g = Graph::new();
        let a = g.leaf(Matrix::from_rows(&[[1.0, 1.0]]));
        let b = g.leaf(Matrix::from_rows(&[[1.0, 1.0], [4.0, 5.0]]));
        let d = g.pairwise_distances(a, b).unwrap();
        assert_eq!(g.value(d).row(0), &[0.0, 5.0]);
        let s = g.sum_all(d);
        let grads = g.backward(s).unwrap();
        assert!(grads.get(a).unwrap().is_finite());
        // only the (0,1) pair contributes: (a - b1)/5
        let ga = grads.get(a).unwrap();
        assert!((ga.get(0, 0) + 0.6).abs() < 1e-15 && (ga.get(0, 1) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn ln_rejects_nonpositive() {
        let mut g = Graph::new();
        let x = g.leaf(Matrix::from_rows(&[[1.0, 0.0]]));
        assert!(g.ln(x).is_err());
    }

    #[test]
    fn block_mean_requires_divisibility() {
        let mut g = Graph::new();
        let x = g.leaf(Matrix::zeros(5, 2));
        assert!(matches!(g.block_mean_rows(x, 2), Err(Error::Config(_))));
    }
}
