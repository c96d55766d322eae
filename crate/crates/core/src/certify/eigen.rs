//! Smallest eigenvalue of a symmetric operator.
//!
//! Small operators are densified and diagonalized with cyclic Jacobi
//! rotations. Larger ones use restarted Lanczos with full
//! reorthogonalization on the shifted operator `sI − M`, where `s` bounds the
//! spectral radius. Either way the Ritz value is reported together with the
//! norm of its residual `‖Mx − θx‖`, and [`EigenEstimate::value`] subtracts
//! the residual.

use crate::scalar::{axpy, dot, norm};
use crate::{Error, Result, Rng, Scalar};

/// Operators up to this dimension are solved densely.
pub const DENSE_LIMIT: usize = 64;
const MAX_SWEEPS: usize = 100;
const BASIS: usize = 80;
const CHECK_EVERY: usize = 5;
const START_SEED: u64 = 0x1a9c_2f0b;

/// Dense symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    /// Takes the symmetric part `(A + Aᵀ)/2` of a row-major square matrix.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!("expected {} entries, got {}", n * n, data.len())));
        }
        let mut m = SymMatrix { n, data };
        let half = T::lit(0.5);
        for i in 0..n {
            for j in i + 1..n {
                let s = half * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = s;
                m.data[j * n + i] = s;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Adds `x` to both `(i, j)` and `(j, i)` (once on the diagonal).
    pub fn add_sym(&mut self, i: usize, j: usize, x: T) {
        self.data[i * self.n + j] += x;
        if i != j {
            self.data[j * self.n + i] += x;
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }

    /// `max_i Σ_j |a_ij|`, an upper bound on the spectral radius.
    pub fn gershgorin_radius(&self) -> T {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// `⟨A, B⟩ = Σ a_ij b_ij`.
    pub fn frobenius_inner(&self, other: &Self) -> T {
        dot(&self.data, &other.data)
    }

    /// All eigenvalues (ascending) and the matching eigenvectors as the
    /// columns of a row-major matrix.
    pub fn jacobi_eigen(&self) -> (Vec<T>, Vec<T>) {
        let n = self.n;
        let mut a = self.data.clone();
        let mut v = vec![T::zero(); n * n];
        for i in 0..n {
            v[i * n + i] = T::one();
        }
        let scale = a.iter().map(|x| *x * *x).sum::<T>();
        let target = T::epsilon() * T::epsilon() * scale;
        for _ in 0..MAX_SWEEPS {
            let off: T = (0..n)
                .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
                .map(|(p, q)| a[p * n + q] * a[p * n + q])
                .sum();
            if off <= target {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k * n + p], a[k * n + q]);
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).expect("finite matrix"));
        let values = order.iter().map(|&i| a[i * n + i]).collect();
        let mut vectors = vec![T::zero(); n * n];
        for (col, &src) in order.iter().enumerate() {
            for k in 0..n {
                vectors[k * n + col] = v[k * n + src];
            }
        }
        (values, vectors)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EigenMethod {
    /// Dense below [`DENSE_LIMIT`], Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenEstimate<T> {
    /// Ritz value approximating `λ_min`.
    pub ritz: T,
    /// `‖Mx − θx‖` for the unit Ritz vector `x`.
    pub residual: T,
    /// Operator applications spent.
    pub iterations: usize,
}

impl<T: Scalar> EigenEstimate<T> {
    /// Ritz value lowered by its residual.
    pub fn value(&self) -> T {
        self.ritz - self.residual
    }
}

fn residual<T: Scalar>(apply: &impl Fn(&[T], &mut [T]), x: &[T], theta: T) -> T {
    let mut mx = vec![T::zero(); x.len()];
    apply(x, &mut mx);
    axpy(-theta, x, &mut mx);
    norm(&mx)
}

fn dense<T: Scalar>(dim: usize, apply: &impl Fn(&[T], &mut [T])) -> Result<EigenEstimate<T>> {
    let mut data = vec![T::zero(); dim * dim];
    let mut e = vec![T::zero(); dim];
    let mut col = vec![T::zero(); dim];
    for j in 0..dim {
        e[j] = T::one();
        apply(&e, &mut col);
        e[j] = T::zero();
        for i in 0..dim {
            data[i * dim + j] = col[i];
        }
    }
    let m = SymMatrix::from_row_major(dim, data)?;
    let (values, vectors) = m.jacobi_eigen();
    let x: Vec<T> = (0..dim).map(|k| vectors[k * dim]).collect();
    Ok(EigenEstimate {
        ritz: values[0],
        residual: residual(apply, &x, values[0]),
        iterations: dim,
    })
}

/// Largest eigenpair of the tridiagonal matrix with diagonal `alpha` and
/// off-diagonal `beta`.
fn tridiagonal_top<T: Scalar>(alpha: &[T], beta: &[T]) -> (T, Vec<T>) {
    let k = alpha.len();
    let mut t = SymMatrix::zeros(k);
    for i in 0..k {
        t.add_sym(i, i, alpha[i]);
        if i + 1 < k {
            t.add_sym(i, i + 1, beta[i]);
        }
    }
    let (values, vectors) = t.jacobi_eigen();
    (values[k - 1], (0..k).map(|r| vectors[r * k + k - 1]).collect())
}

fn lanczos<T: Scalar>(dim: usize, apply: &impl Fn(&[T], &mut [T]), shift: T, tol: T) -> Result<EigenEstimate<T>> {
    let cap = 10 * dim;
    let basis = dim.min(BASIS);
    let shifted = |x: &[T], y: &mut [T]| {
        apply(x, y);
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = shift * xi - *yi;
        }
    };
    let mut start = vec![T::zero(); dim];
    Rng::new(START_SEED).fill_gaussian(&mut start);
    let mut iterations = 0;
    let mut best_residual = T::infinity();
    loop {
        let n0 = norm(&start);
        start.iter_mut().for_each(|x| *x /= n0);
        let mut q: Vec<Vec<T>> = vec![start.clone()];
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        let mut w = vec![T::zero(); dim];
        for j in 0..basis {
            shifted(&q[j], &mut w);
            iterations += 1;
            let a = dot(&q[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for qi in &q {
                    let c = dot(qi, &w);
                    axpy(-c, qi, &mut w);
                }
            }
            let b = norm(&w);
            let exhausted = b <= T::epsilon() * shift.max(T::one());
            let last = j + 1 == basis || exhausted || iterations >= cap;
            if (j + 1) % CHECK_EVERY == 0 || last {
                let (theta, y) = tridiagonal_top(&alpha, &beta);
                let estimate = b * y[j].abs();
                if estimate <= tol || last {
                    let mut x = vec![T::zero(); dim];
                    for (qi, &yi) in q.iter().zip(&y) {
                        axpy(yi, qi, &mut x);
                    }
                    let nx = norm(&x);
                    x.iter_mut().for_each(|v| *v /= nx);
                    let ritz = shift - theta;
                    let r = residual(apply, &x, ritz);
                    best_residual = best_residual.min(r);
                    if r <= tol {
                        return Ok(EigenEstimate {
                            ritz,
                            residual: r,
                            iterations,
                        });
                    }
                    if iterations >= cap {
                        return Err(Error::Eigen {
                            iterations,
                            residual: best_residual.as_f64(),
                        });
                    }
                    start = x;
                    break;
                }
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            q.push(std::mem::replace(&mut w, vec![T::zero(); dim]));
        }
    }
}

/// Smallest eigenvalue of the symmetric operator `apply` of size `dim`.
/// `radius` must bound the spectral radius (a Gershgorin bound will do).
/// Lanczos stops once the Ritz residual is at most `tol`; the operator may
/// be applied at most `10·dim` times.
pub fn min_eigenvalue<T: Scalar>(
    dim: usize,
    apply: impl Fn(&[T], &mut [T]),
    radius: T,
    tol: T,
    method: EigenMethod,
) -> Result<EigenEstimate<T>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("operator has dimension 0".into()));
    }
    let use_dense = match method {
        EigenMethod::Auto => dim <= DENSE_LIMIT,
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
    };
    if use_dense {
        dense(dim, &apply)
    } else {
        lanczos(dim, &apply, radius.abs() * T::lit(1.01) + T::epsilon(), tol)
    }
}

/// Default Lanczos tolerance for an operator of spectral radius `radius`.
pub fn default_tolerance<T: Scalar>(radius: T) -> T {
    let floor = T::lit(1e-10).max(T::lit(100.0) * T::epsilon());
    floor * radius.max(T::one())
}
