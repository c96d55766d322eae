//! Reverse-mode differentiation over a closed set of matrix primitives.
//!
//! The primitive set is the one needed to write the three penalized losses,
//! their gradients, and the trainable layer map: `matmul`, `add`, `scale`,
//! `hadamard`, `row_dot`, `row_normalize`, `gather_rows`, `scatter_add`, `sum`
//! and `square`. Shapes are checked when an operation is recorded; the backward
//! pass cannot fail on shapes.
//!
//! ```
//! use maxcsp::autodiff::{Mat, Tape};
//!
//! let mut tape = Tape::<f64>::new();
//! let a = tape.leaf(Mat::from_vec(1, 2, vec![1.0, -3.0]).unwrap());
//! let sq = tape.square(a);
//! let out = tape.sum(sq);
//! let grads = tape.backward(out).unwrap();
//! assert_eq!(grads.wrt(a).as_slice(), &[2.0, -6.0]);
//! ```

use crate::embed::{sample_sphere, DEGENERATE_NORM};
use crate::rng::tags;
use crate::scalar::{dot, norm};
use crate::{Error, Result, Rng, Scalar};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn column(data: Vec<T>) -> Self {
        Mat {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    pub fn scalar(x: T) -> Self {
        Mat {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn map(&self, f: impl Fn(T) -> T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != T::zero() {
                    for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            }
        }
        out
    }

    /// `selfᵀ · other`
    fn t_matmul(&self, other: &Self) -> Self {
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let brow = other.row(k);
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i];
                if a != T::zero() {
                    for (o, &b) in out.data[i * other.cols..(i + 1) * other.cols].iter_mut().zip(brow) {
                        *o += a * b;
                    }
                }
            }
        }
        out
    }

    /// `self · otherᵀ`
    fn matmul_t(&self, other: &Self) -> Self {
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(self.row(i), other.row(j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }
}

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Matmul(usize, usize),
    Add(usize, usize),
    Scale(usize, T),
    Hadamard(usize, usize),
    RowDot(usize, usize),
    RowNormalize { input: usize, norms: Vec<T>, degenerate: Vec<bool> },
    GatherRows { input: usize, index: Vec<usize> },
    ScatterAdd { input: usize, index: Vec<usize> },
    Sum(usize),
    Square(usize),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Mat<T>,
    op: Op<T>,
}

/// Append-only record of a computation. Every node's inputs precede it.
#[derive(Clone, Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    degenerate_rows: usize,
    rescue: Rng,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            degenerate_rows: 0,
            rescue: Rng::new(0).split(tags::RESCUE),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rows that hit the degenerate branch of `row_normalize` so far.
    pub fn degenerate_rows(&self) -> usize {
        self.degenerate_rows
    }

    fn push(&mut self, value: Mat<T>, op: Op<T>) -> Var {
        let var = Var {
            id: self.nodes.len(),
            rows: value.rows,
            cols: value.cols,
        };
        self.nodes.push(Node { value, op });
        var
    }

    pub fn leaf(&mut self, value: Mat<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A leaf whose gradient is simply never read.
    pub fn constant(&mut self, value: Mat<T>) -> Var {
        self.leaf(value)
    }

    pub fn value(&self, v: Var) -> &Mat<T> {
        &self.nodes[v.id].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        v.shape()
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if a.shape() != b.shape() {
            return Err(Error::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.cols != b.rows {
            return Err(Error::Shape(format!("matmul: {:?} x {:?}", a.shape(), b.shape())));
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(value, Op::Matmul(a.id, b.id)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a).zip(self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a.id, b.id)))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let value = self.value(a).map(|x| x * c);
        self.push(value, Op::Scale(a.id, c))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "hadamard")?;
        let value = self.value(a).zip(self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Hadamard(a.id, b.id)))
    }

    /// Per-row inner products, an `m × 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "row_dot")?;
        let (va, vb) = (self.value(a), self.value(b));
        let value = Mat::column((0..a.rows).map(|i| dot(va.row(i), vb.row(i))).collect());
        Ok(self.push(value, Op::RowDot(a.id, b.id)))
    }

    /// Divides every row by its norm. Degenerate rows (norm below
    /// [`DEGENERATE_NORM`]) are resampled on the sphere and pass no gradient.
    pub fn row_normalize(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        let mut norms = Vec::with_capacity(a.rows);
        let mut degenerate = Vec::with_capacity(a.rows);
        for i in 0..a.rows {
            let row = value.row_mut(i);
            let nrm = norm(row);
            if nrm.as_f64() < DEGENERATE_NORM || !nrm.is_finite() {
                sample_sphere(row, &mut self.rescue);
                self.degenerate_rows += 1;
                degenerate.push(true);
            } else {
                row.iter_mut().for_each(|x| *x /= nrm);
                degenerate.push(false);
            }
            norms.push(nrm);
        }
        self.push(
            value,
            Op::RowNormalize {
                input: a.id,
                norms,
                degenerate,
            },
        )
    }

    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        if let Some(&bad) = index.iter().find(|&&i| i >= a.rows) {
            return Err(Error::Shape(format!("gather_rows: index {bad} >= {} rows", a.rows)));
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(index.len() * a.cols);
        for &i in index {
            data.extend_from_slice(src.row(i));
        }
        let value = Mat {
            rows: index.len(),
            cols: a.cols,
            data,
        };
        Ok(self.push(
            value,
            Op::GatherRows {
                input: a.id,
                index: index.to_vec(),
            },
        ))
    }

    /// `out[index[p]] += a[p]` into a zero matrix with `target_rows` rows.
    pub fn scatter_add(&mut self, a: Var, index: &[usize], target_rows: usize) -> Result<Var> {
        if index.len() != a.rows {
            return Err(Error::Shape(format!(
                "scatter_add: {} indices for {} rows",
                index.len(),
                a.rows
            )));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= target_rows) {
            return Err(Error::Shape(format!("scatter_add: index {bad} >= {target_rows}")));
        }
        let src = self.value(a);
        let mut value = Mat::zeros(target_rows, a.cols);
        for (p, &i) in index.iter().enumerate() {
            for (o, &x) in value.row_mut(i).iter_mut().zip(src.row(p)) {
                *o += x;
            }
        }
        Ok(self.push(
            value,
            Op::ScatterAdd {
                input: a.id,
                index: index.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().copied().sum();
        self.push(Mat::scalar(s), Op::Sum(a.id))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        self.push(value, Op::Square(a.id))
    }

    /// `a − b`
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -T::one());
        self.add(a, nb)
    }

    /// Reverse sweep from a scalar output. Nodes are visited in decreasing id
    /// order, so accumulation order is fixed.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        if output.shape() != (1, 1) {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar output, got {:?}",
                output.shape()
            )));
        }
        let mut grads: Vec<Option<Mat<T>>> = vec![None; output.id + 1];
        grads[output.id] = Some(Mat::scalar(T::one()));

        fn accumulate<T: Scalar>(slot: &mut Option<Mat<T>>, g: Mat<T>) {
            match slot {
                Some(acc) => acc.add_assign(&g),
                None => *slot = Some(g),
            }
        }

        for id in (0..=output.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Matmul(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let ga = g.matmul_t(vb);
                    let gb = va.t_matmul(&g);
                    accumulate(&mut grads[*a], ga);
                    accumulate(&mut grads[*b], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[*a], g.clone());
                    accumulate(&mut grads[*b], g);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads[*a], g.map(|x| x * c));
                }
                Op::Hadamard(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    accumulate(&mut grads[*a], g.zip(vb, |x, y| x * y));
                    accumulate(&mut grads[*b], g.zip(va, |x, y| x * y));
                }
                Op::RowDot(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let mut ga = vb.clone();
                    let mut gb = va.clone();
                    for i in 0..va.rows {
                        let gi = g.data[i];
                        ga.row_mut(i).iter_mut().for_each(|x| *x *= gi);
                        gb.row_mut(i).iter_mut().for_each(|x| *x *= gi);
                    }
                    accumulate(&mut grads[*a], ga);
                    accumulate(&mut grads[*b], gb);
                }
                Op::RowNormalize {
                    input,
                    norms,
                    degenerate,
                } => {
                    // d(a/‖a‖) = (I − y yᵀ) g / ‖a‖
                    let y = &node.value;
                    let mut ga = Mat::zeros(g.rows, g.cols);
                    for i in 0..g.rows {
                        if degenerate[i] {
                            continue;
                        }
                        let (gi, yi) = (g.row(i), y.row(i));
                        let proj = dot(gi, yi);
                        let inv = T::one() / norms[i];
                        for ((o, &gk), &yk) in ga.row_mut(i).iter_mut().zip(gi).zip(yi) {
                            *o = (gk - proj * yk) * inv;
                        }
                    }
                    accumulate(&mut grads[*input], ga);
                }
                Op::GatherRows { input, index } => {
                    let src = &self.nodes[*input].value;
                    let mut ga = Mat::zeros(src.rows, src.cols);
                    for (p, &i) in index.iter().enumerate() {
                        for (o, &x) in ga.row_mut(i).iter_mut().zip(g.row(p)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads[*input], ga);
                }
                Op::ScatterAdd { input, index } => {
                    let mut data = Vec::with_capacity(index.len() * g.cols);
                    for &i in index {
                        data.extend_from_slice(g.row(i));
                    }
                    let ga = Mat {
                        rows: index.len(),
                        cols: g.cols,
                        data,
                    };
                    accumulate(&mut grads[*input], ga);
                }
                Op::Sum(a) => {
                    let src = &self.nodes[*a].value;
                    let s = g.data[0];
                    accumulate(&mut grads[*a], Mat::from_vec(src.rows, src.cols, vec![s; src.data.len()])?);
                }
                Op::Square(a) => {
                    let src = &self.nodes[*a].value;
                    accumulate(&mut grads[*a], g.zip(src, |gk, x| T::lit(2.0) * x * gk));
                }
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

/// Adjoints of every node up to the output.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Mat<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the output with respect to `v`; zeros if `v` does not
    /// influence the output.
    pub fn wrt(&self, v: Var) -> Mat<T> {
        match self.grads.get(v.id).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.id];
                Mat::zeros(r, c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_mat(rows: usize, cols: usize, rng: &mut Rng) -> Mat<f64> {
        let mut data = vec![0.0; rows * cols];
        rng.fill_gaussian(&mut data);
        Mat::from_vec(rows, cols, data).unwrap()
    }

    /// Central differences of `f` at `x`.
    fn numeric_grad(x: &Mat<f64>, f: &dyn Fn(&Mat<f64>) -> f64) -> Vec<f64> {
        let h = 1e-5;
        (0..x.data.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp.data[k] += h;
                xm.data[k] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
        num / den
    }

    #[test]
    fn sum_of_squares() {
        let mut rng = Rng::new(1);
        let a0 = random_mat(3, 4, &mut rng);
        let mut tape = Tape::new();
        let a = tape.leaf(a0.clone());
        let sq = tape.square(a);
        let s = tape.sum(sq);
        let g = tape.backward(s).unwrap().wrt(a);
        for (x, gx) in a0.data.iter().zip(g.as_slice()) {
            assert_eq!(*gx, 2.0 * x);
        }
    }

    #[test]
    fn sum_of_leaf_is_ones_and_unreachable_is_zero() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Mat::zeros(2, 3));
        let b = tape.leaf(Mat::column(vec![1.0, 2.0]));
        let s = tape.sum(a);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(a).as_slice(), &[1.0; 6]);
        assert_eq!(g.wrt(b).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Mat::zeros(2, 2));
        assert!(matches!(tape.backward(a), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn shape_errors_at_record_time() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Mat::zeros(2, 3));
        let b = tape.leaf(Mat::zeros(2, 2));
        assert!(tape.add(a, b).is_err());
        assert!(tape.hadamard(a, b).is_err());
        assert!(tape.row_dot(a, b).is_err());
        assert!(tape.matmul(a, a).is_err());
        assert!(tape.gather_rows(a, &[2]).is_err());
        assert!(tape.scatter_add(a, &[0], 4).is_err());
        assert!(tape.scatter_add(a, &[0, 5], 4).is_err());
    }

    #[test]
    fn row_normalize_backward_is_tangent_projection() {
        let y = vec![0.6, 0.8];
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Mat::from_vec(1, 2, y.clone()).unwrap());
        let n = tape.row_normalize(a);
        let w = tape.constant(Mat::from_vec(1, 2, vec![2.0, -1.0]).unwrap());
        let p = tape.hadamard(n, w).unwrap();
        let s = tape.sum(p);
        let g = tape.backward(s).unwrap().wrt(a);
        let gv: f64 = 2.0 * 0.6 - 0.8;
        let expect = [2.0 - gv * 0.6, -1.0 - gv * 0.8];
        assert!((g.as_slice()[0] - expect[0]).abs() < 1e-15);
        assert!((g.as_slice()[1] - expect[1]).abs() < 1e-15);
    }

    #[test]
    fn degenerate_rows_stop_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Mat::from_vec(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap());
        let n = tape.row_normalize(a);
        assert_eq!(tape.degenerate_rows(), 1);
        assert!((norm(tape.value(n).row(0)) - 1.0).abs() < 1e-12);
        let s = tape.sum(n);
        let g = tape.backward(s).unwrap().wrt(a);
        assert_eq!(&g.as_slice()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn every_primitive_matches_finite_differences() {
        let mut rng = Rng::new(5);
        let x0 = random_mat(4, 3, &mut rng);
        let w = random_mat(3, 5, &mut rng);
        let c = random_mat(4, 5, &mut rng);
        let idx = [3usize, 0, 0, 2, 1, 3];

        let build = |tape: &mut Tape<f64>, x: Var| -> Var {
            let wv = tape.constant(w.clone());
            let cv = tape.constant(c.clone());
            let m = tape.matmul(x, wv).unwrap();
            let h = tape.hadamard(m, cv).unwrap();
            let n = tape.row_normalize(h);
            let g = tape.gather_rows(n, &idx).unwrap();
            let sc = tape.scatter_add(g, &[1, 1, 0, 4, 2, 3], 5).unwrap();
            let sc = tape.scale(sc, 1.7);
            let gx = tape.gather_rows(m, &[0, 1, 2, 3, 0]).unwrap();
            let d = tape.row_dot(sc, gx).unwrap();
            let sq = tape.square(d);
            let a = tape.add(sq, d).unwrap();
            tape.sum(a)
        };
        let f = |x: &Mat<f64>| {
            let mut t = Tape::new();
            let v = t.leaf(x.clone());
            let out = build(&mut t, v);
            t.value(out).get(0, 0)
        };
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let out = build(&mut tape, x);
        let g = tape.backward(out).unwrap().wrt(x);
        let num = numeric_grad(&x0, &f);
        assert!(rel_err(g.as_slice(), &num) < 1e-6, "{:?} vs {:?}", g.as_slice(), num);
    }
}
