//! Flat inner-product form of a penalized loss:
//!
//! `L(V) = scale · (constant + Σ c⟨v_a, v_b⟩ + ρ Σ_q (offset_q + Σ s⟨v_a, v_b⟩)²)`
//!
//! All three problems compile to this form. It is what gets recorded on the
//! autodiff tape, and it doubles as the constraint data for certificates.

use super::{sat, Problem, ProblemKind};
use crate::autodiff::{Mat, Tape, Var};
use crate::embed::Embedding;
use crate::{Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductTerm<T> {
    pub a: usize,
    pub b: usize,
    pub coef: T,
}

/// One equality constraint `offset + Σ coef⟨v_a, v_b⟩ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyTerm<T> {
    pub offset: T,
    pub terms: Vec<ProductTerm<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerProductProgram<T> {
    pub rows: usize,
    pub constant: T,
    pub linear: Vec<ProductTerm<T>>,
    pub penalties: Vec<PenaltyTerm<T>>,
    pub rho: T,
    pub scale: T,
}

impl<T: Scalar> Problem<T> {
    pub fn program(&self) -> InnerProductProgram<T> {
        let half = T::lit(0.5);
        let mut constant = T::zero();
        let mut linear = Vec::new();
        let mut penalties = Vec::new();
        let term = |a, b, coef| ProductTerm { a, b, coef };
        match self.kind() {
            ProblemKind::MaxCut => {
                let g = self.graph().expect("graph problem");
                for e in g.edges() {
                    constant -= e.w * half;
                    linear.push(term(e.u, e.v, e.w * half));
                }
            }
            ProblemKind::VertexCover => {
                let g = self.graph().expect("graph problem");
                for i in 0..g.num_nodes() {
                    constant += half;
                    linear.push(term(1 + i, 0, half));
                }
                for e in g.edges() {
                    penalties.push(PenaltyTerm {
                        offset: T::one(),
                        terms: vec![
                            term(1 + e.u, 0, -T::one()),
                            term(1 + e.v, 0, -T::one()),
                            term(1 + e.u, 1 + e.v, T::one()),
                        ],
                    });
                }
            }
            ProblemKind::Max3Sat => {
                for clause in self.lifted_clauses() {
                    let rows = clause.rows();
                    constant += T::lit(sat::PAYOFF_CONSTANT);
                    for (a, b, c) in clause.payoff_terms() {
                        linear.push(term(rows[a], rows[b], T::lit(c)));
                    }
                    for &((a, b), (c, d)) in sat::RESIDUALS.iter() {
                        penalties.push(PenaltyTerm {
                            offset: T::zero(),
                            terms: vec![term(rows[a], rows[b], T::one()), term(rows[c], rows[d], -T::one())],
                        });
                    }
                }
            }
        }
        InnerProductProgram {
            rows: self.rows(),
            constant,
            linear,
            penalties,
            rho: self.rho(),
            scale: self.scale(),
        }
    }
}

/// Index and coefficient columns for a batch of `⟨v_a, v_b⟩` terms.
struct TermColumns<T> {
    a: Vec<usize>,
    b: Vec<usize>,
    coef: Vec<T>,
    /// Constraint each term belongs to (penalty terms only).
    owner: Vec<usize>,
}

impl<T: Scalar> TermColumns<T> {
    fn linear(p: &InnerProductProgram<T>) -> Self {
        TermColumns {
            a: p.linear.iter().map(|t| t.a).collect(),
            b: p.linear.iter().map(|t| t.b).collect(),
            coef: p.linear.iter().map(|t| t.coef).collect(),
            owner: Vec::new(),
        }
    }

    fn penalty(p: &InnerProductProgram<T>) -> Self {
        let mut out = TermColumns {
            a: Vec::new(),
            b: Vec::new(),
            coef: Vec::new(),
            owner: Vec::new(),
        };
        for (q, pen) in p.penalties.iter().enumerate() {
            for t in &pen.terms {
                out.a.push(t.a);
                out.b.push(t.b);
                out.coef.push(t.coef);
                out.owner.push(q);
            }
        }
        out
    }

    fn len(&self) -> usize {
        self.a.len()
    }
}

impl<T: Scalar> InnerProductProgram<T> {
    /// Direct evaluation of the loss.
    pub fn evaluate(&self, v: &Embedding<T>) -> T {
        let lin: T = self.linear.iter().map(|t| t.coef * v.ip(t.a, t.b)).sum();
        let pen: T = self
            .penalties
            .iter()
            .map(|q| {
                let r = q.terms.iter().fold(q.offset, |acc, t| acc + t.coef * v.ip(t.a, t.b));
                r * r
            })
            .sum();
        self.scale * (self.constant + lin + self.rho * pen)
    }

    fn residuals_on_tape(&self, tape: &mut Tape<T>, v: Var, cols: &TermColumns<T>) -> Result<Var> {
        let nq = self.penalties.len();
        let va = tape.gather_rows(v, &cols.a)?;
        let vb = tape.gather_rows(v, &cols.b)?;
        let dots = tape.row_dot(va, vb)?;
        let coef = tape.constant(Mat::column(cols.coef.clone()));
        let weighted = tape.hadamard(dots, coef)?;
        let sums = tape.scatter_add(weighted, &cols.owner, nq)?;
        let offsets = tape.constant(Mat::column(self.penalties.iter().map(|q| q.offset).collect()));
        tape.add(sums, offsets)
    }

    /// Records `L(V)` on the tape and returns the scalar output.
    pub fn loss_on_tape(&self, tape: &mut Tape<T>, v: Var) -> Result<Var> {
        let mut total = tape.constant(Mat::scalar(self.constant));
        if !self.linear.is_empty() {
            let lin = TermColumns::linear(self);
            let va = tape.gather_rows(v, &lin.a)?;
            let vb = tape.gather_rows(v, &lin.b)?;
            let dots = tape.row_dot(va, vb)?;
            let coef = tape.constant(Mat::column(lin.coef));
            let weighted = tape.hadamard(dots, coef)?;
            let s = tape.sum(weighted);
            total = tape.add(total, s)?;
        }
        if !self.penalties.is_empty() && self.rho != T::zero() {
            let pen = TermColumns::penalty(self);
            let r = self.residuals_on_tape(tape, v, &pen)?;
            let sq = tape.square(r);
            let s = tape.sum(sq);
            let s = tape.scale(s, self.rho);
            total = tape.add(total, s)?;
        }
        Ok(tape.scale(total, self.scale))
    }

    /// Records `∇L(V)` (a `rows × rank` matrix) on the tape, so that it can
    /// itself be differentiated.
    pub fn grad_on_tape(&self, tape: &mut Tape<T>, v: Var) -> Result<Var> {
        let (rows, rank) = tape.shape(v);
        let mut grad = tape.constant(Mat::zeros(rows, rank));
        // Σ c (e_a v_bᵀ + e_b v_aᵀ) with the coefficient column broadcast across the rank
        let messages = |tape: &mut Tape<T>, cols: &TermColumns<T>, weights: Var, grad: Var| -> Result<Var> {
            let ones = tape.constant(Mat::from_vec(1, rank, vec![T::one(); rank])?);
            let wide = tape.matmul(weights, ones)?;
            let va = tape.gather_rows(v, &cols.a)?;
            let vb = tape.gather_rows(v, &cols.b)?;
            let to_a = tape.hadamard(wide, vb)?;
            let to_b = tape.hadamard(wide, va)?;
            let ga = tape.scatter_add(to_a, &cols.a, rows)?;
            let gb = tape.scatter_add(to_b, &cols.b, rows)?;
            let g = tape.add(grad, ga)?;
            tape.add(g, gb)
        };
        if !self.linear.is_empty() {
            let lin = TermColumns::linear(self);
            let w = tape.constant(Mat::column(lin.coef.clone()));
            grad = messages(tape, &lin, w, grad)?;
        }
        if !self.penalties.is_empty() && self.rho != T::zero() {
            let pen = TermColumns::penalty(self);
            let r = self.residuals_on_tape(tape, v, &pen)?;
            let r_per_term = tape.gather_rows(r, &pen.owner)?;
            let two_rho = T::lit(2.0) * self.rho;
            let c = tape.constant(Mat::column(pen.coef.iter().map(|&c| two_rho * c).collect()));
            let w = tape.hadamard(r_per_term, c)?;
            debug_assert_eq!(tape.shape(w).0, pen.len());
            grad = messages(tape, &pen, w, grad)?;
        }
        Ok(tape.scale(grad, self.scale))
    }
}
