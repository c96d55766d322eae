//! Penalized Lagrangians of the three relaxations behind one [`Problem`] type.
//!
//! Every loss is a function of the Gram matrix of an [`Embedding`] only:
//!
//! * Max-Cut: `−Σ_{ij∈E} w_ij (1 − ⟨v_i, v_j⟩) / 2`
//! * Vertex cover: `Σ_i (1 + ⟨v_i, v_∅⟩) / 2 + ρ Σ_{ij∈E} (1 − ⟨v_i, v_∅⟩ − ⟨v_j, v_∅⟩ + ⟨v_i, v_j⟩)²`
//! * Max-3-SAT: negated lifted clause payoff plus `ρ` times the squared
//!   residuals of the pair, triplet, triplet-to-single and quad constraint
//!   families of every clause (see [`sat`]).
//!
//! Unit norms are enforced by projection in the solver, not by penalty.
//! Gradients are accumulated as per-edge / per-clause messages.

mod program;
pub mod sat;

use std::collections::BTreeMap;

pub use program::{InnerProductProgram, PenaltyTerm, ProductTerm};

use crate::embed::Embedding;
use crate::instances::{CnfInstance, Graph};
use crate::scalar::axpy;
use crate::{Error, Result, Scalar};
use sat::LiftedClause;

/// Default penalty for Max-3-SAT.
pub const DEFAULT_SAT_RHO: f64 = 0.003;
/// Default penalty for vertex cover.
pub const DEFAULT_VC_RHO: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    MaxCut,
    VertexCover,
    Max3Sat,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::MaxCut => "maxcut",
            ProblemKind::VertexCover => "vc",
            ProblemKind::Max3Sat => "max3sat",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maxcut" | "max-cut" => Ok(ProblemKind::MaxCut),
            "vc" | "vertexcover" | "vertex-cover" => Ok(ProblemKind::VertexCover),
            "max3sat" | "sat" | "3sat" | "max-3-sat" => Ok(ProblemKind::Max3Sat),
            other => Err(Error::InvalidArgument(format!("unknown problem {other:?}"))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What each embedding row stands for.
///
/// Max-Cut has one row per node. Vertex cover and Max-3-SAT reserve row 0 for
/// `v_∅`, then one row per node/variable; Max-3-SAT appends one row per
/// unordered variable pair that occurs together in some clause.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingLayout {
    rows: usize,
    null_row: Option<usize>,
    first_decision_row: usize,
    num_decision: usize,
    pairs: BTreeMap<(usize, usize), usize>,
}

impl EmbeddingLayout {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Row of `v_∅`, if the problem has one.
    pub fn null_row(&self) -> Option<usize> {
        self.null_row
    }

    pub fn num_decision(&self) -> usize {
        self.num_decision
    }

    /// Row of node / variable `i`.
    #[inline]
    pub fn var_row(&self, i: usize) -> usize {
        self.first_decision_row + i
    }

    /// Row of the pair `{a, b}`, if that pair occurs in some clause.
    pub fn pair_row(&self, a: usize, b: usize) -> Option<usize> {
        self.pairs.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        self.pairs.iter().map(|(&k, &v)| (k, v))
    }
}

#[derive(Clone, Debug)]
enum Instance<T> {
    Graph(Graph<T>),
    Cnf {
        cnf: CnfInstance,
        lifted: Vec<LiftedClause>,
    },
}

/// Objective of a ±1 assignment under the combinatorial problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveReport<T> {
    /// Cut weight, cover size, or number of unsatisfied clauses.
    pub value: T,
    pub feasible: bool,
}

/// One relaxed instance: the instance, its penalty and its row layout.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    kind: ProblemKind,
    instance: Instance<T>,
    rho: T,
    layout: EmbeddingLayout,
    normalized: bool,
}

impl<T: Scalar> Problem<T> {
    pub fn max_cut(graph: Graph<T>) -> Self {
        let n = graph.num_nodes();
        Problem {
            kind: ProblemKind::MaxCut,
            instance: Instance::Graph(graph),
            rho: T::zero(),
            layout: EmbeddingLayout {
                rows: n,
                null_row: None,
                first_decision_row: 0,
                num_decision: n,
                pairs: BTreeMap::new(),
            },
            normalized: false,
        }
    }

    pub fn vertex_cover(graph: Graph<T>, rho: T) -> Result<Self> {
        check_rho(rho)?;
        let n = graph.num_nodes();
        Ok(Problem {
            kind: ProblemKind::VertexCover,
            instance: Instance::Graph(graph),
            rho,
            layout: EmbeddingLayout {
                rows: n + 1,
                null_row: Some(0),
                first_decision_row: 1,
                num_decision: n,
                pairs: BTreeMap::new(),
            },
            normalized: false,
        })
    }

    pub fn max3sat(cnf: CnfInstance, rho: T) -> Result<Self> {
        check_rho(rho)?;
        let n = cnf.num_vars();
        let mut pairs = BTreeMap::new();
        let mut next = 1 + n;
        for clause in cnf.clauses() {
            let mut vars = clause.0.map(|l| l.var);
            vars.sort_unstable();
            for (a, b) in [(vars[0], vars[1]), (vars[0], vars[2]), (vars[1], vars[2])] {
                pairs.entry((a, b)).or_insert_with(|| {
                    next += 1;
                    next - 1
                });
            }
        }
        let layout = EmbeddingLayout {
            rows: next,
            null_row: Some(0),
            first_decision_row: 1,
            num_decision: n,
            pairs,
        };
        let lifted = cnf
            .clauses()
            .iter()
            .map(|c| LiftedClause::new(c, &layout))
            .collect();
        Ok(Problem {
            kind: ProblemKind::Max3Sat,
            instance: Instance::Cnf { cnf, lifted },
            rho,
            layout,
            normalized: false,
        })
    }

    /// Divide loss and gradient by the number of edges / clauses.
    pub fn normalized(mut self, on: bool) -> Self {
        self.normalized = on;
        self
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn layout(&self) -> &EmbeddingLayout {
        &self.layout
    }

    pub fn rows(&self) -> usize {
        self.layout.rows
    }

    /// Number of ±1 decision variables (nodes or CNF variables).
    pub fn num_vars(&self) -> usize {
        self.layout.num_decision
    }

    pub fn graph(&self) -> Option<&Graph<T>> {
        match &self.instance {
            Instance::Graph(g) => Some(g),
            Instance::Cnf { .. } => None,
        }
    }

    pub fn cnf(&self) -> Option<&CnfInstance> {
        match &self.instance {
            Instance::Cnf { cnf, .. } => Some(cnf),
            Instance::Graph(_) => None,
        }
    }

    pub(crate) fn lifted_clauses(&self) -> &[LiftedClause] {
        match &self.instance {
            Instance::Cnf { lifted, .. } => lifted,
            Instance::Graph(_) => &[],
        }
    }

    /// Factor applied to loss and gradient: 1, or 1 / (#edges | #clauses).
    pub fn scale(&self) -> T {
        if !self.normalized {
            return T::one();
        }
        let count = match &self.instance {
            Instance::Graph(g) => g.num_edges(),
            Instance::Cnf { cnf, .. } => cnf.num_clauses(),
        };
        T::one() / T::from_usize_lossy(count.max(1))
    }

    fn check_shape(&self, v: &Embedding<T>) -> Result<()> {
        if v.rows() != self.layout.rows {
            return Err(Error::Shape(format!(
                "{} problem needs {} embedding rows, got {}",
                self.kind,
                self.layout.rows,
                v.rows()
            )));
        }
        Ok(())
    }

    fn check_assignment(&self, x: &[i8]) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::Shape(format!(
                "assignment has {} entries, problem has {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        if x.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("assignment entries must be ±1".into()));
        }
        Ok(())
    }

    /// Penalized loss `L_ρ(V)`.
    pub fn loss(&self, v: &Embedding<T>) -> Result<T> {
        self.check_shape(v)?;
        let half = T::lit(0.5);
        let value = match (&self.instance, self.kind) {
            (Instance::Graph(g), ProblemKind::MaxCut) => -g
                .edges()
                .iter()
                .map(|e| e.w * (T::one() - v.ip(e.u, e.v)) * half)
                .sum::<T>(),
            (Instance::Graph(g), _) => {
                let null = 0;
                let objective: T = (0..g.num_nodes())
                    .map(|i| (T::one() + v.ip(1 + i, null)) * half)
                    .sum();
                let penalty: T = g
                    .edges()
                    .iter()
                    .map(|e| {
                        let r = vc_residual(v, 1 + e.u, 1 + e.v);
                        r * r
                    })
                    .sum();
                objective + self.rho * penalty
            }
            (Instance::Cnf { lifted, .. }, _) => lifted
                .iter()
                .map(|c| {
                    let gram = c.local_gram(v);
                    c.payoff_loss::<T>(&gram) + self.rho * c.penalty::<T>(&gram)
                })
                .sum(),
        };
        Ok(value * self.scale())
    }

    /// Analytic gradient `∇L_ρ(V)`, accumulated as messages over the
    /// constraint graph.
    pub fn grad(&self, v: &Embedding<T>) -> Result<Embedding<T>> {
        self.check_shape(v)?;
        let mut g = Embedding::zeros(v.rows(), v.rank());
        let half = T::lit(0.5);
        let two_rho = T::lit(2.0) * self.rho;
        match (&self.instance, self.kind) {
            (Instance::Graph(graph), ProblemKind::MaxCut) => {
                // MESSAGE[v_j → v_i] = w_ij v_j / 2
                for i in 0..graph.num_nodes() {
                    let gi = g.row_mut(i);
                    for &(j, w) in graph.neighbors(i) {
                        axpy(w * half, v.row(j), gi);
                    }
                }
            }
            (Instance::Graph(graph), _) => {
                let null = 0;
                for i in 0..graph.num_nodes() {
                    axpy(half, v.row(null), g.row_mut(1 + i));
                    axpy(half, v.row(1 + i), g.row_mut(null));
                }
                // MESSAGE[v_j → v_i] = 2ρ r_ij (v_j − v_∅)
                for e in graph.edges() {
                    let (a, b) = (1 + e.u, 1 + e.v);
                    let c = two_rho * vc_residual(v, a, b);
                    axpy(c, v.row(b), g.row_mut(a));
                    axpy(-c, v.row(null), g.row_mut(a));
                    axpy(c, v.row(a), g.row_mut(b));
                    axpy(-c, v.row(null), g.row_mut(b));
                    axpy(-c, v.row(a), g.row_mut(null));
                    axpy(-c, v.row(b), g.row_mut(null));
                }
            }
            (Instance::Cnf { lifted, .. }, _) => {
                for clause in lifted {
                    let gram = clause.local_gram(v);
                    let coef = clause.inner_product_derivatives(&gram, self.rho);
                    let rows = clause.rows();
                    for (a, b, c) in coef.iter() {
                        if c != T::zero() {
                            axpy(c, v.row(rows[b]), g.row_mut(rows[a]));
                            axpy(c, v.row(rows[a]), g.row_mut(rows[b]));
                        }
                    }
                }
            }
        }
        let s = self.scale();
        if s != T::one() {
            g.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        }
        Ok(g)
    }

    /// Mean squared violation of the equality constraints (0 for Max-Cut).
    pub fn violation(&self, v: &Embedding<T>) -> Result<T> {
        self.check_shape(v)?;
        let (sum, count) = match (&self.instance, self.kind) {
            (Instance::Graph(_), ProblemKind::MaxCut) => (T::zero(), 0),
            (Instance::Graph(g), _) => (
                g.edges()
                    .iter()
                    .map(|e| {
                        let r = vc_residual(v, 1 + e.u, 1 + e.v);
                        r * r
                    })
                    .sum(),
                g.num_edges(),
            ),
            (Instance::Cnf { lifted, .. }, _) => (
                lifted.iter().map(|c| c.penalty::<T>(&c.local_gram(v))).sum(),
                lifted.len() * sat::RESIDUALS.len(),
            ),
        };
        if count == 0 {
            Ok(T::zero())
        } else {
            Ok(sum / T::from_usize_lossy(count))
        }
    }

    /// Rank-`rank` embedding of a ±1 assignment: `v_∅ = e₁`, `v_i = x_i e₁`,
    /// `v_ij = x_i x_j e₁`. It satisfies every constraint exactly.
    pub fn integral_embed(&self, x: &[i8], rank: usize) -> Result<Embedding<T>> {
        self.check_assignment(x)?;
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be positive".into()));
        }
        let mut e = Embedding::zeros(self.layout.rows, rank);
        let s = |x: i8| if x > 0 { T::one() } else { -T::one() };
        if let Some(null) = self.layout.null_row {
            e.row_mut(null)[0] = T::one();
        }
        for (i, &xi) in x.iter().enumerate() {
            e.row_mut(self.layout.var_row(i))[0] = s(xi);
        }
        for ((a, b), row) in self.layout.pairs() {
            e.row_mut(row)[0] = s(x[a] * x[b]);
        }
        Ok(e)
    }

    /// Combinatorial objective of an assignment. For vertex cover `+1` means
    /// "in the cover"; for Max-3-SAT `+1` means true.
    pub fn evaluate(&self, x: &[i8]) -> Result<ObjectiveReport<T>> {
        self.check_assignment(x)?;
        Ok(match (&self.instance, self.kind) {
            (Instance::Graph(g), ProblemKind::MaxCut) => ObjectiveReport {
                value: g.cut_value(x),
                feasible: true,
            },
            (Instance::Graph(g), _) => ObjectiveReport {
                value: T::from_usize_lossy(x.iter().filter(|&&s| s > 0).count()),
                feasible: g.edges().iter().all(|e| x[e.u] > 0 || x[e.v] > 0),
            },
            (Instance::Cnf { cnf, .. }, _) => ObjectiveReport {
                value: T::from_usize_lossy(cnf.count_unsatisfied(x)),
                feasible: true,
            },
        })
    }

    /// The value `L_ρ` takes on the integral embedding of `x`:
    /// `−cut(x)`, `|cover(x)| + 16ρ·#uncovered`, or `−#satisfied`
    /// (times [`scale`](Self::scale)).
    pub fn discrete_objective(&self, x: &[i8]) -> Result<T> {
        let report = self.evaluate(x)?;
        let value = match (&self.instance, self.kind) {
            (_, ProblemKind::MaxCut) => -report.value,
            (Instance::Graph(g), _) => {
                let uncovered = g.edges().iter().filter(|e| x[e.u] < 0 && x[e.v] < 0).count();
                report.value + T::lit(16.0) * self.rho * T::from_usize_lossy(uncovered)
            }
            (Instance::Cnf { cnf, .. }, _) => {
                report.value - T::from_usize_lossy(cnf.num_clauses())
            }
        };
        Ok(value * self.scale())
    }

    /// Loss and gradient together.
    pub fn loss_and_grad(&self, v: &Embedding<T>) -> Result<(T, Embedding<T>)> {
        Ok((self.loss(v)?, self.grad(v)?))
    }
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if !rho.is_finite() || rho < T::zero() {
        return Err(Error::InvalidArgument(format!("penalty rho must be finite and >= 0, got {rho}")));
    }
    Ok(())
}

/// `1 − ⟨v_a, v_∅⟩ − ⟨v_b, v_∅⟩ + ⟨v_a, v_b⟩`, zero iff the edge is covered
/// (on integral embeddings).
#[inline]
fn vc_residual<T: Scalar>(v: &Embedding<T>, a: usize, b: usize) -> T {
    T::one() - v.ip(a, 0) - v.ip(b, 0) + v.ip(a, b)
}

#[cfg(test)]
mod tests;
