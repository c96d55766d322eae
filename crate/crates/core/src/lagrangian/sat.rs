//! Lifted Max-3-SAT clauses.
//!
//! Each clause over variables `i < j < k` touches seven embedding rows, indexed
//! locally as `[∅, i, j, k, ij, ik, jk]`. With `+1` meaning true, the clause is
//! violated exactly when `(1/8)∏(1 + τ_i x_i) = 1`, so the token is `τ = −1`
//! for a positive literal and `τ = +1` for a negated one.

use super::EmbeddingLayout;
use crate::embed::Embedding;
use crate::instances::Clause;
use crate::Scalar;

pub const NULL: usize = 0;
pub const I: usize = 1;
pub const J: usize = 2;
pub const K: usize = 3;
pub const IJ: usize = 4;
pub const IK: usize = 5;
pub const JK: usize = 6;

/// Constant part of the negated clause payoff.
pub const PAYOFF_CONSTANT: f64 = -7.0 / 8.0;

/// Equality constraints of one clause as `⟨a, b⟩ − ⟨c, d⟩ = 0`, in local
/// indices: pair-to-pair, triplet-to-triplet (cyclic differences), quad-to-pair
/// and triplet-to-single.
pub const RESIDUALS: [((usize, usize), (usize, usize)); 15] = [
    ((I, J), (IJ, NULL)),
    ((I, K), (IK, NULL)),
    ((J, K), (JK, NULL)),
    ((IJ, K), (IK, J)),
    ((IK, J), (JK, I)),
    ((JK, I), (IJ, K)),
    ((IJ, JK), (I, K)),
    ((IJ, IK), (J, K)),
    ((IK, JK), (I, J)),
    ((I, IJ), (J, NULL)),
    ((J, IJ), (I, NULL)),
    ((J, JK), (K, NULL)),
    ((K, JK), (J, NULL)),
    ((I, IK), (K, NULL)),
    ((K, IK), (I, NULL)),
];

/// Local Gram matrix of a clause's seven rows.
pub type LocalGram<T> = [[T; 7]; 7];

/// Symmetric coefficients `∂L/∂⟨v_a, v_b⟩` for `a < b`.
#[derive(Clone, Debug)]
pub struct LocalCoefficients<T>([[T; 7]; 7]);

impl<T: Scalar> LocalCoefficients<T> {
    fn zero() -> Self {
        LocalCoefficients([[T::zero(); 7]; 7])
    }

    fn add(&mut self, a: usize, b: usize, c: T) {
        let (a, b) = (a.min(b), a.max(b));
        self.0[a][b] += c;
    }

    /// `(a, b, coefficient)` for every local pair `a < b`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..7).flat_map(move |a| (a + 1..7).map(move |b| (a, b, self.0[a][b])))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedClause {
    vars: [usize; 3],
    tokens: [f64; 3],
    rows: [usize; 7],
}

impl LiftedClause {
    pub(super) fn new(clause: &Clause, layout: &EmbeddingLayout) -> Self {
        let mut lits = clause.0;
        lits.sort_unstable_by_key(|l| l.var);
        let vars = lits.map(|l| l.var);
        let tokens = lits.map(|l| if l.negated { 1.0 } else { -1.0 });
        let pair = |a, b| layout.pair_row(a, b).expect("pair rows exist for every clause");
        let rows = [
            layout.null_row().expect("sat layout has v_∅"),
            layout.var_row(vars[0]),
            layout.var_row(vars[1]),
            layout.var_row(vars[2]),
            pair(vars[0], vars[1]),
            pair(vars[0], vars[2]),
            pair(vars[1], vars[2]),
        ];
        LiftedClause { vars, tokens, rows }
    }

    pub fn vars(&self) -> [usize; 3] {
        self.vars
    }

    /// `τ` per variable in sorted-variable order.
    pub fn tokens(&self) -> [f64; 3] {
        self.tokens
    }

    /// Global embedding rows for local indices `[∅, i, j, k, ij, ik, jk]`.
    pub fn rows(&self) -> [usize; 7] {
        self.rows
    }

    /// Linear part of the negated clause payoff as `(a, b, c)` with
    /// `payoff = PAYOFF_CONSTANT + Σ c⟨v_a, v_b⟩`.
    pub fn payoff_terms(&self) -> [(usize, usize, f64); 12] {
        let [ti, tj, tk] = self.tokens;
        let t3 = ti * tj * tk / 24.0;
        [
            (I, JK, t3),
            (J, IK, t3),
            (K, IJ, t3),
            (I, J, ti * tj / 16.0),
            (IJ, NULL, ti * tj / 16.0),
            (I, K, ti * tk / 16.0),
            (IK, NULL, ti * tk / 16.0),
            (J, K, tj * tk / 16.0),
            (JK, NULL, tj * tk / 16.0),
            (I, NULL, ti / 8.0),
            (J, NULL, tj / 8.0),
            (K, NULL, tk / 8.0),
        ]
    }

    pub fn local_gram<T: Scalar>(&self, v: &Embedding<T>) -> LocalGram<T> {
        let mut g = [[T::zero(); 7]; 7];
        for a in 0..7 {
            for b in a..7 {
                let x = v.ip(self.rows[a], self.rows[b]);
                g[a][b] = x;
                g[b][a] = x;
            }
        }
        g
    }

    pub fn payoff_loss<T: Scalar>(&self, g: &LocalGram<T>) -> T {
        self.payoff_terms()
            .iter()
            .fold(T::lit(PAYOFF_CONSTANT), |acc, &(a, b, c)| acc + T::lit(c) * g[a][b])
    }

    pub fn residual<T: Scalar>(g: &LocalGram<T>, k: usize) -> T {
        let ((a, b), (c, d)) = RESIDUALS[k];
        g[a][b] - g[c][d]
    }

    /// Sum of squared constraint residuals (without `ρ`).
    pub fn penalty<T: Scalar>(&self, g: &LocalGram<T>) -> T {
        (0..RESIDUALS.len())
            .map(|k| {
                let r = Self::residual(g, k);
                r * r
            })
            .sum()
    }

    /// Messages of this clause, as derivatives of its loss with respect to each
    /// local inner product.
    pub fn inner_product_derivatives<T: Scalar>(&self, g: &LocalGram<T>, rho: T) -> LocalCoefficients<T> {
        let mut out = LocalCoefficients::zero();
        for (a, b, c) in self.payoff_terms() {
            out.add(a, b, T::lit(c));
        }
        let two_rho = T::lit(2.0) * rho;
        for (k, &((a, b), (c, d))) in RESIDUALS.iter().enumerate() {
            let r = two_rho * Self::residual(g, k);
            out.add(a, b, r);
            out.add(c, d, -r);
        }
        out
    }
}
