//! Dual certificates from embeddings.
//!
//! For a minimization problem `min F(X)` over PSD matrices with unit
//! diagonal, any symmetric `X̃` with unit diagonal gives
//!
//! `OPT ≥ F(X̃) − ⟨∇F(X̃), X̃⟩ + λ_min(∇F(X̃)) · N`.
//!
//! For Max-Cut, `F(X) = ⟨¼A, X⟩ + Σ λ_i (X_ii − 1)` with
//! `λ_i = ½‖Σ_{j∈N(i)} w_ij v_j‖`. Because `X̃_ii = 1`, the λ terms of `F`
//! vanish and the bound on the cut becomes
//!
//! `UB = ½ Σ w + Σ λ_i − N · λ_min(¼A + diag λ)`.
//!
//! The same bound applied to the penalized VC and Max-3-SAT losses is
//! available through [`penalized_lower_bound`]; its soundness rests on the
//! eigenvalue safeguard only, so it is marked experimental.

pub mod eigen;

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::embed::Embedding;
use crate::instances::Graph;
use crate::lagrangian::Problem;
use crate::scalar::norm;
use crate::{Error, Result, Scalar};

pub use eigen::{min_eigenvalue, EigenEstimate, EigenMethod, SymMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate<T> {
    /// Upper bound on the maximum cut weight.
    pub bound: T,
    pub lambda: Vec<T>,
    /// `λ_min(∇F)` after subtracting the eigen residual.
    pub lambda_min: T,
    pub residual: T,
    pub n: usize,
    pub edges: usize,
    pub wall_time: Duration,
}

#[derive(Serialize)]
struct CertificateJson<T> {
    bound: T,
    lambda_min: T,
    n: usize,
    edges: usize,
    wall_ms: f64,
}

impl<T: Scalar> Certificate<T> {
    /// `{bound, lambda_min, n, edges, wall_ms}`; `wall_ms` is zeroed when
    /// `timing` is false.
    pub fn to_json(&self, timing: bool) -> String {
        serde_json::to_string(&CertificateJson {
            bound: self.bound,
            lambda_min: self.lambda_min,
            n: self.n,
            edges: self.edges,
            wall_ms: if timing { self.wall_time.as_secs_f64() * 1e3 } else { 0.0 },
        })
        .expect("certificate serializes")
    }
}

fn check_rows<T: Scalar>(graph: &Graph<T>, v: &Embedding<T>) -> Result<()> {
    if v.rows() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "embedding has {} rows for a graph on {} nodes",
            v.rows(),
            graph.num_nodes()
        )));
    }
    Ok(())
}

/// `λ_i = ½‖Σ_{j∈N(i)} w_ij v_j‖`.
pub fn maxcut_dual_vars<T: Scalar>(graph: &Graph<T>, v: &Embedding<T>) -> Result<Vec<T>> {
    maxcut_dual_vars_scaled(graph, v, T::lit(DEFAULT_DUAL_FACTOR))
}

/// `λ_i = c‖Σ_{j∈N(i)} w_ij v_j‖`. With `c = ¼` these are the exact
/// multipliers of a stationary embedding and the bound equals the SDP value.
pub fn maxcut_dual_vars_scaled<T: Scalar>(graph: &Graph<T>, v: &Embedding<T>, factor: T) -> Result<Vec<T>> {
    check_rows(graph, v)?;
    let mut acc = vec![T::zero(); v.rank()];
    Ok((0..graph.num_nodes())
        .map(|i| {
            acc.iter_mut().for_each(|x| *x = T::zero());
            for &(j, w) in graph.neighbors(i) {
                crate::scalar::axpy(w, v.row(j), &mut acc);
            }
            factor * norm(&acc)
        })
        .collect())
}

/// Applies `¼A + diag(λ)` through adjacency lists.
fn maxcut_slack_apply<T: Scalar>(graph: &Graph<T>, lambda: &[T], x: &[T], y: &mut [T]) {
    let quarter = T::lit(0.25);
    for i in 0..graph.num_nodes() {
        let mut s = lambda[i] * x[i];
        for &(j, w) in graph.neighbors(i) {
            s += quarter * w * x[j];
        }
        y[i] = s;
    }
}

/// Upper bound on the maximum cut from an embedding with unit rows.
pub fn maxcut_certificate<T: Scalar>(graph: &Graph<T>, v: &Embedding<T>) -> Result<Certificate<T>> {
    maxcut_certificate_with(graph, v, &CertifyOptions::default())
}

pub const DEFAULT_DUAL_FACTOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions<T> {
    /// Scale `c` in `λ_i = c‖Σ w_ij v_j‖`.
    pub dual_factor: T,
    pub method: EigenMethod,
}

impl<T: Scalar> Default for CertifyOptions<T> {
    fn default() -> Self {
        CertifyOptions {
            dual_factor: T::lit(DEFAULT_DUAL_FACTOR),
            method: EigenMethod::Auto,
        }
    }
}

pub fn maxcut_certificate_with<T: Scalar>(
    graph: &Graph<T>,
    v: &Embedding<T>,
    options: &CertifyOptions<T>,
) -> Result<Certificate<T>> {
    let start = Instant::now();
    let lambda = maxcut_dual_vars_scaled(graph, v, options.dual_factor)?;
    let n = graph.num_nodes();
    let radius = (0..n)
        .map(|i| lambda[i].abs() + T::lit(0.25) * graph.neighbors(i).iter().map(|&(_, w)| w.abs()).sum::<T>())
        .fold(T::zero(), T::max);
    let eig = min_eigenvalue(
        n,
        |x, y| maxcut_slack_apply(graph, &lambda, x, y),
        radius,
        eigen::default_tolerance(radius),
        options.method,
    )?;
    let lambda_min = eig.value();
    let bound = T::lit(0.5) * graph.total_weight() + lambda.iter().copied().sum::<T>()
        - T::from_usize_lossy(n) * lambda_min;
    Ok(Certificate {
        bound,
        lambda,
        lambda_min,
        residual: eig.residual,
        n,
        edges: graph.num_edges(),
        wall_time: start.elapsed(),
    })
}

/// Three-term duality bound for a minimization problem:
/// `F(X̃) − ⟨∇F, X̃⟩ + λ_min · trace`.
pub fn dual_lower_bound<T: Scalar>(f_value: T, grad: &SymMatrix<T>, x: &SymMatrix<T>, lambda_min: T, trace: T) -> Result<T> {
    if grad.dim() != x.dim() {
        return Err(Error::Shape("gradient and point differ in size".into()));
    }
    Ok(f_value - grad.frobenius_inner(x) + lambda_min * trace)
}

/// Gram matrix `VVᵀ` as a [`SymMatrix`].
pub fn gram_matrix<T: Scalar>(v: &Embedding<T>) -> SymMatrix<T> {
    SymMatrix::from_row_major(v.rows(), v.gram()).expect("gram is square")
}

/// Max-Cut bound computed from the three-term duality bound with dense matrices,
/// without the closed-form simplification.
pub fn maxcut_bound_via_duality<T: Scalar>(graph: &Graph<T>, v: &Embedding<T>) -> Result<T> {
    let lambda = maxcut_dual_vars(graph, v)?;
    let n = graph.num_nodes();
    let x = gram_matrix(v);
    let mut grad = SymMatrix::zeros(n);
    for e in graph.edges() {
        grad.add_sym(e.u, e.v, T::lit(0.25) * e.w);
    }
    for (i, &l) in lambda.iter().enumerate() {
        grad.add_sym(i, i, l);
    }
    let f = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let c = if i == j { T::zero() } else { grad.get(i, j) };
            c * x.get(i, j)
        })
        .sum::<T>()
        + (0..n).map(|i| lambda[i] * (x.get(i, i) - T::one())).sum::<T>();
    let radius = grad.gershgorin_radius();
    let eig = min_eigenvalue(n, |a, b| grad.apply(a, b), radius, eigen::default_tolerance(radius), EigenMethod::Auto)?;
    let lower = dual_lower_bound(f, &grad, &x, eig.value(), T::from_usize_lossy(n))?;
    Ok(T::lit(0.5) * graph.total_weight() - lower)
}

/// Experimental lower bound on the minimum of a penalized loss.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PenalizedBound<T> {
    /// Lower bound on `min L_ρ` over unit-diagonal PSD matrices.
    pub lower_bound: T,
    pub lambda_min: T,
    pub residual: T,
    pub experimental: bool,
}

/// The duality bound applied to `L_ρ` with `∇F = C + Σ 2ρ r_i A_i + diag(η)` and
/// `η_j = ½‖e_jᵀ (C + Σ 2ρ r_i A_i) V‖`. Experimental: nothing beyond the
/// eigen residual guards its soundness.
pub fn penalized_lower_bound<T: Scalar>(problem: &Problem<T>, v: &Embedding<T>) -> Result<PenalizedBound<T>> {
    let program = problem.program();
    if v.rows() != program.rows {
        return Err(Error::Shape(format!(
            "embedding has {} rows, problem needs {}",
            v.rows(),
            program.rows
        )));
    }
    let n = program.rows;
    let mut g = SymMatrix::zeros(n);
    let half = T::lit(0.5);
    let add_term = |g: &mut SymMatrix<T>, a: usize, b: usize, c: T| {
        if a == b {
            g.add_sym(a, a, c);
        } else {
            g.add_sym(a, b, half * c);
        }
    };
    for t in &program.linear {
        add_term(&mut g, t.a, t.b, t.coef * program.scale);
    }
    for p in &program.penalties {
        let r = p.offset + p.terms.iter().map(|t| t.coef * v.ip(t.a, t.b)).sum::<T>();
        let k = T::lit(2.0) * program.rho * r * program.scale;
        for t in &p.terms {
            add_term(&mut g, t.a, t.b, k * t.coef);
        }
    }
    let mut gv = vec![T::zero(); v.rank()];
    let eta: Vec<T> = (0..n)
        .map(|j| {
            gv.iter_mut().for_each(|x| *x = T::zero());
            for k in 0..n {
                crate::scalar::axpy(g.get(j, k), v.row(k), &mut gv);
            }
            half * norm(&gv)
        })
        .collect();
    for (j, &e) in eta.iter().enumerate() {
        g.add_sym(j, j, e);
    }
    let x = gram_matrix(v);
    let f = program.evaluate(v) + (0..n).map(|j| eta[j] * (x.get(j, j) - T::one())).sum::<T>();
    let radius = g.gershgorin_radius();
    let eig = min_eigenvalue(n, |a, b| g.apply(a, b), radius, eigen::default_tolerance(radius), EigenMethod::Auto)?;
    Ok(PenalizedBound {
        lower_bound: dual_lower_bound(f, &g, &x, eig.value(), T::from_usize_lossy(n))?,
        lambda_min: eig.value(),
        residual: eig.residual,
        experimental: true,
    })
}
