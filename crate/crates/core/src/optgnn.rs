//! Trainable unrolled solver.
//!
//! Layer `t` holds an `r × 2r` matrix `M_t = [A_t | B_t]` and maps every row
//! as `v_i ← normalize(A_t v_i + B_t (∇L_ρ(V))_i)`. With `A_t = I` and
//! `B_t = −η I` a layer is one fixed-step projected gradient step, so an
//! untrained model starts out as `T` iterations of the solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Mat, Tape};
use crate::embed::Embedding;
use crate::instances::{gen_ba, gen_er, gen_hk, gen_random_3sat, gen_ws};
use crate::lagrangian::{Problem, ProblemKind, DEFAULT_SAT_RHO, DEFAULT_VC_RHO};
use crate::rng::tags;
use crate::rounding::{best_of_rounds, score};
use crate::{Error, Result, Rng, Scalar};

pub const CHECKPOINT_FORMAT: &str = "optgnn";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Step size reproduced by the initial layers.
pub const INIT_STEP: f64 = 0.1;
pub const INIT_NOISE: f64 = 1e-2;
pub const VALIDATION_HYPERPLANES: usize = 100;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub steps: usize,
    pub seed: u64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    rank: usize,
    /// Row-major `r × 2r` matrices.
    matrices: Vec<Vec<T>>,
    kind: Option<ProblemKind>,
    pub metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint<T> {
    format: String,
    version: u32,
    rank: usize,
    layers: usize,
    kind: Option<ProblemKind>,
    matrices: Vec<Vec<T>>,
    metadata: ModelMetadata,
}

impl<T: Scalar> Model<T> {
    /// `[I | −η₀ I]` per layer plus `N(0, noise²)` entries drawn from `seed`.
    pub fn init_with_noise(rank: usize, layers: usize, seed: u64, noise: T) -> Result<Self> {
        if rank == 0 || layers == 0 {
            return Err(Error::InvalidArgument("rank and layers must be positive".into()));
        }
        let mut rng = Rng::new(seed).split(tags::MODEL);
        let eta = T::lit(INIT_STEP);
        let matrices = (0..layers)
            .map(|_| {
                let mut m = vec![T::zero(); 2 * rank * rank];
                for i in 0..rank {
                    m[i * 2 * rank + i] = T::one();
                    m[i * 2 * rank + rank + i] = -eta;
                }
                for x in &mut m {
                    *x += noise * rng.gaussian::<T>();
                }
                m
            })
            .collect();
        Ok(Model {
            rank,
            matrices,
            kind: None,
            metadata: ModelMetadata {
                seed,
                ..Default::default()
            },
        })
    }

    pub fn init(rank: usize, layers: usize, seed: u64) -> Result<Self> {
        Self::init_with_noise(rank, layers, seed, T::lit(INIT_NOISE))
    }

    /// Noise-free initialization: forward equals `layers` fixed PGD steps of
    /// size 0.1.
    pub fn pgd_equivalent(rank: usize, layers: usize) -> Result<Self> {
        Self::init_with_noise(rank, layers, 0, T::zero())
    }

    pub fn from_matrices(rank: usize, matrices: Vec<Vec<T>>) -> Result<Self> {
        if rank == 0 || matrices.is_empty() {
            return Err(Error::InvalidArgument("rank and layers must be positive".into()));
        }
        if let Some(m) = matrices.iter().find(|m| m.len() != 2 * rank * rank) {
            return Err(Error::Shape(format!(
                "layer matrix has {} entries, expected {}",
                m.len(),
                2 * rank * rank
            )));
        }
        if matrices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("layer matrices must be finite".into()));
        }
        Ok(Model {
            rank,
            matrices,
            kind: None,
            metadata: ModelMetadata::default(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn layers(&self) -> usize {
        self.matrices.len()
    }

    pub fn kind(&self) -> Option<ProblemKind> {
        self.kind
    }

    pub fn with_kind(mut self, kind: ProblemKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn matrix(&self, layer: usize) -> &[T] {
        &self.matrices[layer]
    }

    pub fn matrix_mut(&mut self, layer: usize) -> &mut [T] {
        &mut self.matrices[layer]
    }

    fn check(&self, problem: &Problem<T>, v0: &Embedding<T>) -> Result<()> {
        if v0.rank() != self.rank {
            return Err(Error::Shape(format!("embedding rank {} != model rank {}", v0.rank(), self.rank)));
        }
        if v0.rows() != problem.rows() {
            return Err(Error::Shape(format!(
                "embedding has {} rows, problem needs {}",
                v0.rows(),
                problem.rows()
            )));
        }
        Ok(())
    }

    /// `(Aᵀ, Bᵀ)` for one layer, each `r × r`.
    fn split_transposed(&self, layer: usize) -> (Mat<T>, Mat<T>) {
        let r = self.rank;
        let m = &self.matrices[layer];
        let mut at = vec![T::zero(); r * r];
        let mut bt = vec![T::zero(); r * r];
        for i in 0..r {
            for j in 0..r {
                at[j * r + i] = m[i * 2 * r + j];
                bt[j * r + i] = m[i * 2 * r + r + j];
            }
        }
        (
            Mat::from_vec(r, r, at).expect("square"),
            Mat::from_vec(r, r, bt).expect("square"),
        )
    }

    /// Applies every layer to `v0`.
    pub fn forward(&self, problem: &Problem<T>, v0: &Embedding<T>) -> Result<Embedding<T>> {
        Ok(self.forward_trace(problem, v0)?.pop().expect("at least one layer"))
    }

    /// Outputs of each layer, `V_1 … V_T`.
    pub fn forward_trace(&self, problem: &Problem<T>, v0: &Embedding<T>) -> Result<Vec<Embedding<T>>> {
        self.check(problem, v0)?;
        let r = self.rank;
        let mut v = v0.clone();
        let mut out = Vec::with_capacity(self.layers());
        for m in &self.matrices {
            let g = problem.grad(&v)?;
            let mut next = Embedding::zeros(v.rows(), r);
            for i in 0..v.rows() {
                let (vi, gi) = (v.row(i), g.row(i));
                for (k, slot) in next.row_mut(i).iter_mut().enumerate() {
                    let row = &m[k * 2 * r..(k + 1) * 2 * r];
                    *slot = crate::scalar::dot(&row[..r], vi) + crate::scalar::dot(&row[r..], gi);
                }
            }
            next.normalize_rows();
            v = next;
            out.push(v.clone());
        }
        Ok(out)
    }

    /// Final-layer loss and its gradient with respect to every `M_t`.
    pub fn loss_and_grad(&self, problem: &Problem<T>, v0: &Embedding<T>) -> Result<(T, Vec<Vec<T>>)> {
        self.check(problem, v0)?;
        let r = self.rank;
        let program = problem.program();
        let mut tape = Tape::new();
        let mut v = tape.constant(Mat::from_vec(v0.rows(), r, v0.as_slice().to_vec())?);
        let mut leaves = Vec::with_capacity(self.layers());
        for t in 0..self.layers() {
            let (at, bt) = self.split_transposed(t);
            let (at, bt) = (tape.leaf(at), tape.leaf(bt));
            leaves.push((at, bt));
            let g = program.grad_on_tape(&mut tape, v)?;
            let a = tape.matmul(v, at)?;
            let b = tape.matmul(g, bt)?;
            let s = tape.add(a, b)?;
            v = tape.row_normalize(s);
        }
        let loss = program.loss_on_tape(&mut tape, v)?;
        let value = tape.value(loss).get(0, 0);
        let grads = tape.backward(loss)?;
        let per_layer = leaves
            .iter()
            .map(|&(at, bt)| {
                let (ga, gb) = (grads.wrt(at), grads.wrt(bt));
                let mut m = vec![T::zero(); 2 * r * r];
                for i in 0..r {
                    for j in 0..r {
                        m[i * 2 * r + j] = ga.get(j, i);
                        m[i * 2 * r + r + j] = gb.get(j, i);
                    }
                }
                m
            })
            .collect();
        Ok((value, per_layer))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            rank: self.rank,
            layers: self.layers(),
            kind: self.kind,
            matrices: self.matrices.clone(),
            metadata: self.metadata.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint<T> = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if ck.layers != ck.matrices.len() {
            return Err(Error::Checkpoint(format!(
                "header says {} layers, found {}",
                ck.layers,
                ck.matrices.len()
            )));
        }
        let mut model = Model::from_matrices(ck.rank, ck.matrices).map_err(|e| Error::Checkpoint(e.to_string()))?;
        model.kind = ck.kind;
        model.metadata = ck.metadata;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Random instance family used for training and validation. Node counts are
/// drawn uniformly from `n_min..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Distribution {
    Er { n_min: usize, n_max: usize, p: f64 },
    Ba { n_min: usize, n_max: usize, m: usize },
    Ws { n_min: usize, n_max: usize, k: usize, p: f64 },
    Hk { n_min: usize, n_max: usize, m: usize, p: f64 },
    Sat { vars: usize, clauses: usize },
}

impl Distribution {
    pub fn validate(&self, kind: ProblemKind) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match (self, kind) {
            (Distribution::Sat { .. }, ProblemKind::Max3Sat) => {}
            (Distribution::Sat { .. }, _) | (_, ProblemKind::Max3Sat) => {
                return bad(format!("distribution {self:?} does not produce {kind} instances"));
            }
            _ => {}
        }
        match *self {
            Distribution::Er { n_min, n_max, .. }
            | Distribution::Ba { n_min, n_max, .. }
            | Distribution::Ws { n_min, n_max, .. }
            | Distribution::Hk { n_min, n_max, .. }
                if n_min == 0 || n_min > n_max =>
            {
                bad(format!("need 1 <= n_min <= n_max (got {n_min}..={n_max})"))
            }
            _ => Ok(()),
        }
    }

    /// Draws one instance from `seed` and wraps it as a problem.
    pub fn sample<T: Scalar>(&self, kind: ProblemKind, rho: T, seed: u64) -> Result<Problem<T>> {
        let mut rng = Rng::new(seed).split(tags::DATA);
        let graph = match *self {
            Distribution::Sat { vars, clauses } => {
                return Problem::max3sat(gen_random_3sat(vars, clauses, &mut rng)?, rho);
            }
            Distribution::Er { n_min, n_max, p } => gen_er(rng.between(n_min, n_max), p, &mut rng)?,
            Distribution::Ba { n_min, n_max, m } => gen_ba(rng.between(n_min, n_max), m, &mut rng)?,
            Distribution::Ws { n_min, n_max, k, p } => gen_ws(rng.between(n_min, n_max), k, p, &mut rng)?,
            Distribution::Hk { n_min, n_max, m, p } => gen_hk(rng.between(n_min, n_max), m, p, &mut rng)?,
        };
        match kind {
            ProblemKind::MaxCut => Ok(Problem::max_cut(graph)),
            ProblemKind::VertexCover => Problem::vertex_cover(graph, rho),
            ProblemKind::Max3Sat => Err(Error::InvalidArgument("graph distribution for max3sat".into())),
        }
    }
}

/// Penalty used when none is given.
pub fn default_rho(kind: ProblemKind) -> f64 {
    match kind {
        ProblemKind::MaxCut => 0.0,
        ProblemKind::VertexCover => DEFAULT_VC_RHO,
        ProblemKind::Max3Sat => DEFAULT_SAT_RHO,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<T> {
    pub lr: T,
    pub batch_size: usize,
    pub steps: usize,
    /// Validate every this many steps (and at the start and end).
    pub val_every: usize,
    pub val_size: usize,
    pub distribution: Distribution,
    pub kind: ProblemKind,
    pub rho: T,
    pub seed: u64,
}

impl<T: Scalar> TrainConfig<T> {
    pub fn new(kind: ProblemKind, distribution: Distribution) -> Self {
        TrainConfig {
            lr: T::lit(1e-3),
            batch_size: 16,
            steps: 2000,
            val_every: 100,
            val_size: 32,
            distribution,
            kind,
            rho: T::lit(default_rho(kind)),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= T::zero()) {
            return Err(Error::InvalidArgument("learning rate must be finite and >= 0".into()));
        }
        if self.batch_size == 0 || self.val_every == 0 || self.val_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size, validation interval and validation size must be positive".into(),
            ));
        }
        if !(self.rho.is_finite() && self.rho >= T::zero()) {
            return Err(Error::InvalidArgument("rho must be finite and >= 0".into()));
        }
        self.distribution.validate(self.kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryEntry<T> {
    pub step: usize,
    pub train_loss: T,
    /// Mean rounded score on the validation set (higher is better), when
    /// validation ran at this step.
    pub val_score: Option<T>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Model with the best validation score.
    pub model: Model<T>,
    pub final_model: Model<T>,
    pub history: Vec<HistoryEntry<T>>,
    pub best_step: usize,
    pub best_score: T,
}

impl<T: Scalar> TrainOutcome<T> {
    /// History as JSON lines `{step, train_loss, val_score}`.
    pub fn history_jsonl(&self) -> String {
        self.history
            .iter()
            .map(|e| serde_json::to_string(e).expect("history serializes") + "\n")
            .collect()
    }
}

/// A problem with its fixed starting embedding.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub problem: Problem<T>,
    pub v0: Embedding<T>,
    pub seed: u64,
}

impl<T: Scalar> Sample<T> {
    pub fn draw(dist: &Distribution, kind: ProblemKind, rho: T, rank: usize, seed: u64) -> Result<Self> {
        let problem = dist.sample(kind, rho, seed)?;
        let v0 = Embedding::init_uniform_sphere(problem.rows(), rank, &mut Rng::new(seed).split(tags::INIT))?;
        Ok(Sample { problem, v0, seed })
    }
}

/// Held-out instances drawn from the config's validation stream.
pub fn validation_set<T: Scalar>(config: &TrainConfig<T>, rank: usize) -> Result<Vec<Sample<T>>> {
    let mut rng = Rng::new(config.seed).split(tags::VALIDATION);
    (0..config.val_size)
        .map(|_| Sample::draw(&config.distribution, config.kind, config.rho, rank, rng.next_u64()))
        .collect()
}

/// Mean final-layer loss over `samples`.
pub fn mean_loss<T: Scalar>(model: &Model<T>, samples: &[Sample<T>]) -> Result<T> {
    let losses = samples
        .par_iter()
        .map(|s| s.problem.loss(&model.forward(&s.problem, &s.v0)?))
        .collect::<Result<Vec<T>>>()?;
    Ok(losses.into_iter().sum::<T>() / T::from_usize_lossy(samples.len()))
}

/// Mean best-of-`k` rounded score (cut, `−cover`, `−unsat`).
pub fn mean_score<T: Scalar>(model: &Model<T>, samples: &[Sample<T>], hyperplanes: usize) -> Result<T> {
    let scores = samples
        .par_iter()
        .map(|s| {
            let v = model.forward(&s.problem, &s.v0)?;
            let r = best_of_rounds(&s.problem, &v, hyperplanes, &Rng::new(s.seed).split(tags::HYPERPLANES))?;
            Ok(score(s.problem.kind(), r.value))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(scores.into_iter().sum::<T>() / T::from_usize_lossy(samples.len()))
}

/// Averaged final-layer loss and gradient over a batch, reduced in order.
pub fn batch_loss_and_grad<T: Scalar>(model: &Model<T>, batch: &[Sample<T>], step: usize) -> Result<(T, Vec<Vec<T>>)> {
    let parts = batch
        .par_iter()
        .map(|s| {
            let out = model.loss_and_grad(&s.problem, &s.v0)?;
            if !out.0.is_finite() || out.1.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    step,
                    instance_seed: s.seed,
                    msg: "non-finite loss or gradient".into(),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = T::one() / T::from_usize_lossy(batch.len());
    let mut loss = T::zero();
    let mut grad: Vec<Vec<T>> = model.matrices.iter().map(|m| vec![T::zero(); m.len()]).collect();
    for (l, g) in parts {
        loss += l * scale;
        for (acc, layer) in grad.iter_mut().zip(g) {
            for (a, x) in acc.iter_mut().zip(layer) {
                *a += x * scale;
            }
        }
    }
    Ok((loss, grad))
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &Model<T>) -> Self {
        let zeros: Vec<Vec<T>> = model.matrices.iter().map(|m| vec![T::zero(); m.len()]).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, model: &mut Model<T>, grad: &[Vec<T>], lr: T) {
        self.t += 1;
        let (b1, b2) = (T::lit(Self::BETA1), T::lit(Self::BETA2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for (l, g) in grad.iter().enumerate() {
            for (k, &gk) in g.iter().enumerate() {
                let m = &mut self.m[l][k];
                let v = &mut self.v[l][k];
                *m = b1 * *m + (T::one() - b1) * gk;
                *v = b2 * *v + (T::one() - b2) * gk * gk;
                let mhat = *m / c1;
                let vhat = *v / c2;
                model.matrices[l][k] -= lr * mhat / (vhat.sqrt() + T::lit(Self::EPS));
            }
        }
    }
}

/// Trains with Adam on fresh batches, keeping the model with the best
/// validation score.
pub fn train<T: Scalar>(model: &Model<T>, config: &TrainConfig<T>) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let mut model = model.clone().with_kind(config.kind);
    model.metadata.rho = config.rho.as_f64();
    model.metadata.seed = config.seed;
    let val = validation_set(config, model.rank)?;
    let mut data = Rng::new(config.seed).split(tags::DATA);
    let mut adam = Adam::new(&model);
    let mut history = Vec::with_capacity(config.steps + 1);

    let mut best = model.clone();
    let mut best_score = mean_score(&model, &val, VALIDATION_HYPERPLANES)?;
    let mut best_step = 0;
    history.push(HistoryEntry {
        step: 0,
        train_loss: mean_loss(&model, &val)?,
        val_score: Some(best_score),
    });

    for step in 1..=config.steps {
        let batch = (0..config.batch_size)
            .map(|_| Sample::draw(&config.distribution, config.kind, config.rho, model.rank, data.next_u64()))
            .collect::<Result<Vec<_>>>()?;
        let (loss, grad) = batch_loss_and_grad(&model, &batch, step)?;
        adam.step(&mut model, &grad, config.lr);
        model.metadata.steps = step;
        let val_score = if step % config.val_every == 0 || step == config.steps {
            let s = mean_score(&model, &val, VALIDATION_HYPERPLANES)?;
            if s > best_score {
                best_score = s;
                best_step = step;
                best = model.clone();
            }
            Some(s)
        } else {
            None
        };
        history.push(HistoryEntry {
            step,
            train_loss: loss,
            val_score,
        });
    }
    Ok(TrainOutcome {
        model: best,
        final_model: model,
        history,
        best_step,
        best_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_er, Graph};
    use crate::solver::pgd_step;

    fn er_sample(n: usize, seed: u64, rank: usize) -> Sample<f64> {
        Sample::draw(
            &Distribution::Er { n_min: n, n_max: n, p: 0.4 },
            ProblemKind::MaxCut,
            0.0,
            rank,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_model_is_pgd() {
        let cnf = crate::instances::gen_random_3sat(8, 20, &mut Rng::new(1)).unwrap();
        let problems = vec![
            Problem::max_cut(gen_er(12, 0.3, &mut Rng::new(2)).unwrap()),
            Problem::vertex_cover(gen_er(10, 0.3, &mut Rng::new(3)).unwrap(), 1.0).unwrap(),
            Problem::max3sat(cnf, 0.05).unwrap(),
        ];
        for p in problems {
            let model = Model::<f64>::pgd_equivalent(4, 6).unwrap();
            let v0 = Embedding::init_uniform_sphere(p.rows(), 4, &mut Rng::new(4)).unwrap();
            let mut v = v0.clone();
            for out in model.forward_trace(&p, &v0).unwrap() {
                v = pgd_step(&p, &v, INIT_STEP).unwrap();
                assert!(out.frobenius_distance(&v) < 1e-9);
            }
        }
    }

    #[test]
    fn identity_layers_only_normalize() {
        let r = 3;
        let mut m = vec![0.0; 2 * r * r];
        for i in 0..r {
            m[i * 2 * r + i] = 1.0;
        }
        let model = Model::from_matrices(r, vec![m.clone(), m]).unwrap();
        let s = er_sample(7, 5, r);
        let out = model.forward(&s.problem, &s.v0).unwrap();
        assert!(out.frobenius_distance(&s.v0) < 1e-12);
    }

    #[test]
    fn isolated_node_sees_no_messages() {
        let r = 2;
        let model = Model::<f64>::init(r, 1, 3).unwrap();
        let p = Problem::max_cut(Graph::unweighted(2, &[]).unwrap());
        let v0 = Embedding::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = model.forward(&p, &v0).unwrap();
        let m = model.matrix(0);
        let expect = [m[0], m[2 * r]];
        let n = (expect[0] * expect[0] + expect[1] * expect[1]).sqrt();
        assert!((out.row(0)[0] - expect[0] / n).abs() < 1e-12);
        assert!((out.row(0)[1] - expect[1] / n).abs() < 1e-12);
    }

    #[test]
    fn deeper_pgd_model_lowers_k3_loss() {
        let p = Problem::max_cut(Graph::complete(3).unwrap());
        let v0 = Embedding::init_uniform_sphere(3, 3, &mut Rng::new(6)).unwrap();
        let model = Model::<f64>::pgd_equivalent(3, 20).unwrap();
        let losses: Vec<f64> = model
            .forward_trace(&p, &v0)
            .unwrap()
            .iter()
            .map(|v| p.loss(v).unwrap())
            .collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(losses[19] < p.loss(&v0).unwrap());
    }

    #[test]
    fn rank_mismatch_is_shape_error() {
        let model = Model::<f64>::init(3, 2, 0).unwrap();
        let s = er_sample(5, 1, 4);
        assert!(matches!(model.forward(&s.problem, &s.v0), Err(Error::Shape(_))));
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(Model::<f64>::init(4, 3, 9).unwrap(), Model::<f64>::init(4, 3, 9).unwrap());
        assert_ne!(Model::<f64>::init(4, 3, 9).unwrap(), Model::<f64>::init(4, 3, 10).unwrap());
        assert_eq!(Model::<f64>::init(4, 1, 9).unwrap().layers(), 1);
    }

    #[test]
    fn tape_loss_matches_direct_forward() {
        let model = Model::<f64>::init(3, 4, 2).unwrap();
        let s = er_sample(9, 7, 3);
        let (loss, _) = model.loss_and_grad(&s.problem, &s.v0).unwrap();
        let direct = s.problem.loss(&model.forward(&s.problem, &s.v0).unwrap()).unwrap();
        assert!((loss - direct).abs() < 1e-10);
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let model = Model::<f64>::init(3, 3, 4).unwrap();
        let batch: Vec<_> = (0..3).map(|k| er_sample(6, 20 + k, 3)).collect();
        let (_, grad) = batch_loss_and_grad(&model, &batch, 0).unwrap();
        let h = 1e-6;
        for (layer, entry) in [(0, 0), (0, 4), (1, 7), (2, 2), (2, 17)] {
            let mut plus = model.clone();
            plus.matrix_mut(layer)[entry] += h;
            let mut minus = model.clone();
            minus.matrix_mut(layer)[entry] -= h;
            let fp = batch_loss_and_grad(&plus, &batch, 0).unwrap().0;
            let fm = batch_loss_and_grad(&minus, &batch, 0).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - grad[layer][entry]).abs() < 1e-4, "layer {layer} entry {entry}: {fd} vs {}", grad[layer][entry]);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let model = Model::<f64>::init(5, 3, 11).unwrap().with_kind(ProblemKind::VertexCover);
        let back = Model::<f64>::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        let text = model.to_json();
        assert!(matches!(
            Model::<f64>::from_json(&text[..text.len() / 2]),
            Err(Error::Checkpoint(_))
        ));
        let wrong = text.replace("\"version\":1", "\"version\":99");
        assert!(matches!(Model::<f64>::from_json(&wrong), Err(Error::Checkpoint(_))));
    }

    fn tiny_config(lr: f64) -> TrainConfig<f64> {
        TrainConfig {
            lr,
            batch_size: 4,
            steps: 6,
            val_every: 3,
            val_size: 4,
            seed: 5,
            ..TrainConfig::new(ProblemKind::MaxCut, Distribution::Er { n_min: 8, n_max: 10, p: 0.3 })
        }
    }

    #[test]
    fn zero_learning_rate_keeps_model() {
        let model = Model::<f64>::init(3, 2, 1).unwrap();
        let out = train(&model, &tiny_config(0.0)).unwrap();
        assert_eq!(out.final_model.matrix(0), model.matrix(0));
        let scores: Vec<f64> = out.history.iter().filter_map(|e| e.val_score).collect();
        assert!(scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn training_is_deterministic() {
        let model = Model::<f64>::init(3, 2, 1).unwrap();
        let a = train(&model, &tiny_config(0.01)).unwrap();
        let b = train(&model, &tiny_config(0.01)).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        assert_eq!(a.history.len(), 7);
        assert!(a.history_jsonl().lines().count() == 7);
    }

    #[test]
    fn distribution_kind_mismatch() {
        let cfg = TrainConfig::<f64>::new(ProblemKind::Max3Sat, Distribution::Er { n_min: 5, n_max: 6, p: 0.2 });
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig::<f64>::new(ProblemKind::MaxCut, Distribution::Er { n_min: 6, n_max: 5, p: 0.2 });
        assert!(cfg.validate().is_err());
    }
}
