use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, negated: true }
    }

    /// Truth value of the literal under a ±1 assignment (+1 = true).
    pub fn holds(&self, assignment: &[i8]) -> bool {
        (assignment[self.var] > 0) != self.negated
    }

    /// DIMACS integer (1-based, sign = polarity).
    pub fn to_dimacs(&self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Clause(pub [Literal; 3]);

impl Clause {
    pub fn literals(&self) -> &[Literal; 3] {
        &self.0
    }

    pub fn satisfied(&self, assignment: &[i8]) -> bool {
        self.0.iter().any(|l| l.holds(assignment))
    }
}

/// 3-CNF formula with unit clause weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfInstance {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfInstance {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::InvalidInstance("formula needs at least one variable".into()));
        }
        for (c, clause) in clauses.iter().enumerate() {
            let [a, b, d] = clause.0;
            if a.var >= num_vars || b.var >= num_vars || d.var >= num_vars {
                return Err(Error::InvalidInstance(format!(
                    "clause {c} references a variable outside 0..{num_vars}"
                )));
            }
            if a.var == b.var || a.var == d.var || b.var == d.var {
                return Err(Error::InvalidInstance(format!(
                    "clause {c} repeats a variable"
                )));
            }
        }
        Ok(CnfInstance { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn count_unsatisfied(&self, assignment: &[i8]) -> usize {
        self.clauses.iter().filter(|c| !c.satisfied(assignment)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clause_truth_table() {
        // (x1 ∨ ¬x2 ∨ x3) is violated only by x = (F, T, F)
        let c = Clause([Literal::pos(0), Literal::neg(1), Literal::pos(2)]);
        for bits in 0..8u8 {
            let x: Vec<i8> = (0..3).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            assert_eq!(c.satisfied(&x), x != [-1, 1, -1]);
        }
    }

    #[test]
    fn rejects_repeated_variable() {
        let c = Clause([Literal::pos(0), Literal::neg(0), Literal::pos(2)]);
        assert!(CnfInstance::new(3, vec![c]).is_err());
    }
}
