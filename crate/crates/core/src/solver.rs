//! Projected gradient descent on products of spheres, with optional Gaussian
//! perturbation when progress stalls.
//!
//! One iteration updates every row simultaneously:
//! `V ← normalize_rows(V − η ∇L_ρ(V))`. The step `η` is either fixed or chosen
//! by Armijo backtracking. Stationarity is measured with the tangent part of
//! the gradient, `g_i − ⟨g_i, v_i⟩ v_i`, because the radial part is absorbed by
//! the projection.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::embed::Embedding;
use crate::lagrangian::Problem;
use crate::rng::tags;
use crate::scalar::dot;
use crate::{Error, Result, Rng, Scalar};

/// First trial step of the line search.
pub const BACKTRACK_INITIAL_STEP: f64 = 0.5;
/// Sufficient-decrease constant.
pub const ARMIJO_C: f64 = 1e-4;
pub const MAX_HALVINGS: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule<T> {
    Fixed(T),
    Backtracking,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub max_iters: usize,
    pub step: StepRule<T>,
    /// Perturb when `‖V_{t+1} − V_t‖_F ≤ noise_threshold`.
    pub noise_threshold: T,
    /// Entrywise standard deviation of the perturbation.
    pub noise_sigma: T,
    /// Stop once `‖tangent grad‖_F ≤ stop_tol · rows`. Ignored while the
    /// perturbation is on, so that exact saddles can still be left.
    pub stop_tol: T,
    pub seed: u64,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            step: StepRule::Backtracking,
            noise_threshold: T::zero(),
            noise_sigma: T::zero(),
            stop_tol: T::lit(1e-6),
            seed: 0,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    /// Turns on the perturbation with `ψ = 1e-6`, `σ = 1e-4`.
    pub fn perturbed(mut self) -> Self {
        self.noise_threshold = T::lit(1e-6);
        self.noise_sigma = T::lit(1e-4);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if let StepRule::Fixed(eta) = self.step {
            if !eta.is_finite() || eta < T::zero() {
                return bad("fixed step must be finite and >= 0");
            }
        }
        for x in [self.noise_threshold, self.noise_sigma, self.stop_tol] {
            if !x.is_finite() || x < T::zero() {
                return bad("noise threshold, noise sigma and stop_tol must be finite and >= 0");
            }
        }
        if self.noise_sigma > T::zero() && self.noise_threshold <= T::zero() {
            return bad("noise_sigma > 0 requires noise_threshold > 0");
        }
        Ok(())
    }

    /// Uniform-sphere starting point drawn from this config's seed.
    pub fn initial_embedding(&self, problem: &Problem<T>, rank: usize) -> Result<Embedding<T>> {
        let mut rng = Rng::new(self.seed).split(tags::INIT);
        Embedding::init_uniform_sphere(problem.rows(), rank, &mut rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry<T> {
    pub iter: usize,
    pub loss: T,
    pub violation: T,
    /// Frobenius norm of the tangent gradient at this iterate.
    pub grad_norm: T,
    /// Step that produced this iterate (0 for the start point).
    pub eta: T,
    /// False when the line search found no sufficient decrease.
    #[serde(skip)]
    pub accepted: bool,
    #[serde(skip)]
    pub perturbed: bool,
}

impl<T: Scalar> TraceEntry<T> {
    pub fn non_monotone(&self) -> bool {
        !self.accepted
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Converged,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub embedding: Embedding<T>,
    /// One entry for the start point plus one per iteration.
    pub trace: Vec<TraceEntry<T>>,
    pub final_violation: T,
    pub iterations: usize,
    pub wall_time: Duration,
    pub stop: StopReason,
}

impl<T: Scalar> SolveResult<T> {
    pub fn final_loss(&self) -> T {
        self.trace.last().expect("trace holds the start point").loss
    }

    /// Trace as JSON lines `{iter, loss, violation, grad_norm, eta}`.
    pub fn trace_jsonl(&self) -> String {
        trace_jsonl(&self.trace)
    }
}

/// One JSON object per trace entry, newline-terminated.
pub fn trace_jsonl<T: Scalar>(trace: &[TraceEntry<T>]) -> String {
    let mut out = String::new();
    for e in trace {
        out.push_str(&serde_json::to_string(e).expect("trace entry serializes"));
        out.push('\n');
    }
    out
}

/// `‖g_i − ⟨g_i, v_i⟩ v_i‖_F` over all rows.
pub fn tangent_norm<T: Scalar>(grad: &Embedding<T>, v: &Embedding<T>) -> T {
    let mut acc = T::zero();
    for i in 0..v.rows() {
        let (g, x) = (grad.row(i), v.row(i));
        let radial = dot(g, x) / dot(x, x).max(T::min_positive_value());
        for (&gk, &xk) in g.iter().zip(x) {
            let t = gk - radial * xk;
            acc += t * t;
        }
    }
    acc.sqrt()
}

fn check_finite<T: Scalar>(grad: &Embedding<T>) -> Result<()> {
    for i in 0..grad.rows() {
        if grad.row(i).iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                row: i,
                msg: "gradient is not finite".into(),
            });
        }
    }
    Ok(())
}

fn step_with<T: Scalar>(v: &Embedding<T>, grad: &Embedding<T>, eta: T) -> Embedding<T> {
    let mut next = v.clone();
    for (x, &g) in next.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        *x -= eta * g;
    }
    next.normalize_rows();
    next
}

/// One projected gradient step `normalize_rows(V − η ∇L(V))`.
pub fn pgd_step<T: Scalar>(problem: &Problem<T>, v: &Embedding<T>, eta: T) -> Result<Embedding<T>> {
    let grad = problem.grad(v)?;
    check_finite(&grad)?;
    Ok(step_with(v, &grad, eta))
}

#[derive(Clone, Debug)]
pub struct BacktrackOutcome<T> {
    pub embedding: Embedding<T>,
    pub eta: T,
    pub loss: T,
    /// False when no trial satisfied the Armijo condition; `embedding` is
    /// then the last (smallest-step) trial.
    pub accepted: bool,
}

fn backtrack_from<T: Scalar>(
    problem: &Problem<T>,
    v: &Embedding<T>,
    loss: T,
    grad: &Embedding<T>,
    tangent_sq: T,
) -> Result<BacktrackOutcome<T>> {
    let c = T::lit(ARMIJO_C);
    let mut eta = T::lit(BACKTRACK_INITIAL_STEP);
    let mut halvings = 0;
    loop {
        let trial = step_with(v, grad, eta);
        let trial_loss = problem.loss(&trial)?;
        if trial_loss <= loss - c * eta * tangent_sq {
            return Ok(BacktrackOutcome {
                embedding: trial,
                eta,
                loss: trial_loss,
                accepted: true,
            });
        }
        if halvings == MAX_HALVINGS {
            return Ok(BacktrackOutcome {
                embedding: trial,
                eta,
                loss: trial_loss,
                accepted: false,
            });
        }
        eta *= T::lit(0.5);
        halvings += 1;
    }
}

/// Armijo backtracking from `η = 0.5`, halving up to 30 times.
pub fn backtracking_step<T: Scalar>(problem: &Problem<T>, v: &Embedding<T>) -> Result<BacktrackOutcome<T>> {
    let (loss, grad) = problem.loss_and_grad(v)?;
    check_finite(&grad)?;
    let t = tangent_norm(&grad, v);
    backtrack_from(problem, v, loss, &grad, t * t)
}

/// Runs projected gradient descent from `v0`.
pub fn solve<T: Scalar>(problem: &Problem<T>, v0: &Embedding<T>, config: &SolverConfig<T>) -> Result<SolveResult<T>> {
    config.validate()?;
    let start = Instant::now();
    let mut noise = Rng::new(config.seed).split(tags::NOISE);
    let rows_t = T::from_usize_lossy(problem.rows());

    let mut v = v0.clone();
    let (mut loss, mut grad) = problem.loss_and_grad(&v)?;
    check_finite(&grad)?;
    let mut gnorm = tangent_norm(&grad, &v);
    let mut trace = vec![TraceEntry {
        iter: 0,
        loss,
        violation: problem.violation(&v)?,
        grad_norm: gnorm,
        eta: T::zero(),
        accepted: true,
        perturbed: false,
    }];
    let mut stop = StopReason::MaxIters;

    for iter in 1..=config.max_iters {
        if config.noise_sigma == T::zero() && gnorm <= config.stop_tol * rows_t {
            stop = StopReason::Converged;
            break;
        }
        let (mut next, eta, accepted) = match config.step {
            StepRule::Fixed(eta) => (step_with(&v, &grad, eta), eta, true),
            StepRule::Backtracking => {
                let out = backtrack_from(problem, &v, loss, &grad, gnorm * gnorm)?;
                (out.embedding, out.eta, out.accepted)
            }
        };
        let mut perturbed = false;
        if config.noise_sigma > T::zero() && next.frobenius_distance(&v) <= config.noise_threshold {
            for x in next.as_mut_slice() {
                *x += config.noise_sigma * noise.gaussian::<T>();
            }
            next.normalize_rows_with(&mut noise);
            perturbed = true;
        }
        v = next;
        (loss, grad) = problem.loss_and_grad(&v)?;
        check_finite(&grad)?;
        gnorm = tangent_norm(&grad, &v);
        trace.push(TraceEntry {
            iter,
            loss,
            violation: problem.violation(&v)?,
            grad_norm: gnorm,
            eta,
            accepted,
            perturbed,
        });
    }
    let iterations = trace.len() - 1;
    Ok(SolveResult {
        final_violation: trace[iterations].violation,
        embedding: v,
        trace,
        iterations,
        wall_time: start.elapsed(),
        stop,
    })
}
