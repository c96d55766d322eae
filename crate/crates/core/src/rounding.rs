//! Hyperplane rounding, feasibility repair, greedy baselines and an
//! exhaustive oracle.
//!
//! Assignments are `±1` per decision variable. For vertex cover `+1` means
//! the node is in the cover; for Max-3-SAT `+1` means true.

use rayon::prelude::*;
use serde::Serialize;

use crate::embed::Embedding;
use crate::instances::Graph;
use crate::lagrangian::{Problem, ProblemKind};
use crate::scalar::dot;
use crate::{Error, Result, Rng, Scalar};

pub type Assignment = Vec<i8>;

/// Largest variable count accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Best of `k` hyperplanes together with a summary of all of them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundingReport<T> {
    pub assignment: Assignment,
    /// Cut weight, cover size, or number of unsatisfied clauses.
    pub value: T,
    pub feasible: bool,
    pub min: T,
    pub mean: T,
    pub max: T,
    pub hyperplanes: usize,
    /// Index of the hyperplane that produced `assignment`.
    pub best_hyperplane: usize,
    pub seed: u64,
}

/// Whether `a` is a strictly better objective value than `b`.
pub fn improves<T: Scalar>(kind: ProblemKind, a: T, b: T) -> bool {
    match kind {
        ProblemKind::MaxCut => a > b,
        ProblemKind::VertexCover | ProblemKind::Max3Sat => a < b,
    }
}

/// Objective mapped so that larger is better: cut, `−cover`, `−unsat`.
pub fn score<T: Scalar>(kind: ProblemKind, value: T) -> T {
    match kind {
        ProblemKind::MaxCut => value,
        _ => -value,
    }
}

/// Rounds against a given hyperplane normal `y`.
pub fn round_with<T: Scalar>(problem: &Problem<T>, v: &Embedding<T>, y: &[T]) -> Result<Assignment> {
    let layout = problem.layout();
    if v.rows() != layout.rows() || v.rank() != y.len() {
        return Err(Error::Shape(format!(
            "embedding is {}x{}, expected {} rows and rank {}",
            v.rows(),
            v.rank(),
            layout.rows(),
            y.len()
        )));
    }
    let sign = |x: T| if x < T::zero() { -1i8 } else { 1 };
    let reference = layout.null_row().map_or(1, |r| sign(dot(v.row(r), y)));
    Ok((0..layout.num_decision())
        .map(|i| sign(dot(v.row(layout.var_row(i)), y)) * reference)
        .collect())
}

/// `x_i = sign(⟨v_i, y⟩)` for a standard Gaussian `y`; signs are taken
/// relative to `v_∅` when the layout has one.
pub fn hyperplane_round<T: Scalar>(problem: &Problem<T>, v: &Embedding<T>, rng: &mut Rng) -> Result<Assignment> {
    let mut y = vec![T::zero(); v.rank()];
    rng.fill_gaussian(&mut y);
    round_with(problem, v, &y)
}

/// Evaluates `k` hyperplanes; hyperplane `h` is drawn from `rng.split(h)`.
/// Vertex-cover roundings are repaired before they are scored.
pub fn best_of_rounds<T: Scalar>(problem: &Problem<T>, v: &Embedding<T>, k: usize, rng: &Rng) -> Result<RoundingReport<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one hyperplane".into()));
    }
    let kind = problem.kind();
    let rounds: Vec<(Assignment, T, bool)> = (0..k)
        .into_par_iter()
        .map(|h| {
            let mut x = hyperplane_round(problem, v, &mut rng.split(h as u64))?;
            if let Some(g) = problem.graph().filter(|_| kind == ProblemKind::VertexCover) {
                x = repair_vc(g, &x);
            }
            let report = problem.evaluate(&x)?;
            Ok((x, report.value, report.feasible))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (h, r) in rounds.iter().enumerate().skip(1) {
        if improves(kind, r.1, rounds[best].1) {
            best = h;
        }
    }
    let values = rounds.iter().map(|r| r.1);
    let min = values.clone().fold(T::infinity(), T::min);
    let max = values.clone().fold(T::neg_infinity(), T::max);
    let mean = values.sum::<T>() / T::from_usize_lossy(k);
    let (assignment, value, feasible) = rounds.into_iter().nth(best).expect("k >= 1");
    Ok(RoundingReport {
        assignment,
        value,
        feasible,
        min,
        mean,
        max,
        hyperplanes: k,
        best_hyperplane: best,
        seed: rng.seed(),
    })
}

fn covered<T: Scalar>(graph: &Graph<T>, x: &[i8]) -> bool {
    graph.edges().iter().all(|e| x[e.u] > 0 || x[e.v] > 0)
}

/// Two-phase cover repair. Phase 1 adds the higher-degree endpoint of each
/// uncovered edge (lower index on ties); phase 2 drops cover nodes,
/// lowest degree first, while the cover stays valid.
pub fn repair_vc<T: Scalar>(graph: &Graph<T>, assignment: &[i8]) -> Assignment {
    let mut x = assignment.to_vec();
    for e in graph.edges() {
        if x[e.u] < 0 && x[e.v] < 0 {
            let (du, dv) = (graph.degree(e.u), graph.degree(e.v));
            let pick = if du > dv || (du == dv && e.u < e.v) { e.u } else { e.v };
            x[pick] = 1;
        }
    }
    let mut order: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0).collect();
    order.sort_by_key(|&i| (graph.degree(i), i));
    for i in order {
        if graph.neighbors(i).iter().all(|&(j, _)| x[j] > 0) {
            x[i] = -1;
        }
    }
    debug_assert!(covered(graph, &x));
    x
}

/// Change in cut weight from flipping node `i`.
fn flip_gain<T: Scalar>(graph: &Graph<T>, x: &[i8], i: usize) -> T {
    graph
        .neighbors(i)
        .iter()
        .filter(|&&(j, _)| j != i)
        .map(|&(j, w)| if x[i] == x[j] { w } else { -w })
        .sum()
}

/// Flips single nodes that strictly increase the cut, scanning in index
/// order, until no such node remains.
pub fn local_search_cut<T: Scalar>(graph: &Graph<T>, assignment: &[i8]) -> Assignment {
    let mut x = assignment.to_vec();
    loop {
        let mut changed = false;
        for i in 0..x.len() {
            if flip_gain(graph, &x, i) > T::zero() {
                x[i] = -x[i];
                changed = true;
            }
        }
        if !changed {
            return x;
        }
    }
}

/// One-exchange local search from a uniformly random assignment.
pub fn greedy_maxcut<T: Scalar>(graph: &Graph<T>, rng: &mut Rng) -> Assignment {
    let start: Assignment = (0..graph.num_nodes())
        .map(|_| if rng.bernoulli(0.5) { 1 } else { -1 })
        .collect();
    local_search_cut(graph, &start)
}

/// Matching-based 2-approximation: both endpoints of every edge that is
/// still uncovered, in edge order.
pub fn greedy_vc<T: Scalar>(graph: &Graph<T>) -> Assignment {
    let mut x = vec![-1i8; graph.num_nodes()];
    for e in graph.edges() {
        if x[e.u] < 0 && x[e.v] < 0 {
            x[e.u] = 1;
            x[e.v] = 1;
        }
    }
    x
}

fn decode(mask: u64, n: usize, out: &mut [i8]) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = if mask >> (n - 1 - i) & 1 == 1 { 1 } else { -1 };
    }
}

/// Exact optimum by enumeration, lexicographically smallest among ties
/// (with `−1 < +1`). For vertex cover only feasible covers count.
pub fn brute_force<T: Scalar>(problem: &Problem<T>) -> Result<(Assignment, T)> {
    let n = problem.num_vars();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let kind = problem.kind();
    let total = 1u64 << n;
    let chunk = 1u64 << n.saturating_sub(6);
    let best = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut x = vec![0i8; n];
            let mut best: Option<(u64, T)> = None;
            for mask in c * chunk..((c + 1) * chunk).min(total) {
                decode(mask, n, &mut x);
                let report = problem.evaluate(&x)?;
                if report.feasible && best.is_none_or(|(_, b)| improves(kind, report.value, b)) {
                    best = Some((mask, report.value));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .reduce(|a, b| if improves(kind, b.1, a.1) { b } else { a })
        .expect("all-ones is always feasible");
    let mut x = vec![0i8; n];
    decode(best.0, n, &mut x);
    Ok((x, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_er, gen_random_3sat, Clause, CnfInstance, Literal};
    use proptest::prelude::{prop_assert, proptest};

    fn cut_problem(g: Graph<f64>) -> Problem<f64> {
        Problem::max_cut(g)
    }

    #[test]
    fn opposite_rows_get_opposite_signs() {
        let p = cut_problem(Graph::unweighted(2, &[(0, 1)]).unwrap());
        let v = Embedding::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        for y in [[0.3, 2.0], [-1.0, 0.1]] {
            let x = round_with(&p, &v, &y).unwrap();
            assert_eq!(x[0], -x[1]);
        }
    }

    #[test]
    fn negated_normal_flips_everything() {
        let g: Graph<f64> = gen_er(9, 0.5, &mut Rng::new(1)).unwrap();
        let p = cut_problem(g.clone());
        let v = Embedding::init_uniform_sphere(9, 4, &mut Rng::new(2)).unwrap();
        let y = [0.4, -1.1, 0.7, 0.2];
        let neg: Vec<f64> = y.iter().map(|t| -t).collect();
        let a = round_with(&p, &v, &y).unwrap();
        let b = round_with(&p, &v, &neg).unwrap();
        assert!(a.iter().zip(&b).all(|(s, t)| s == &-t));
        assert_eq!(g.cut_value(&a), g.cut_value(&b));
    }

    #[test]
    fn ties_break_to_plus_one() {
        let p = cut_problem(Graph::unweighted(2, &[(0, 1)]).unwrap());
        let v = Embedding::from_rows(&[vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(round_with(&p, &v, &[1.0, 0.0]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn integral_embeddings_round_back() {
        let g: Graph<f64> = gen_er(8, 0.4, &mut Rng::new(3)).unwrap();
        let x: Assignment = vec![1, -1, -1, 1, 1, -1, 1, 1];
        let cut = cut_problem(g.clone());
        let v = cut.integral_embed(&x, 3).unwrap();
        let r = hyperplane_round(&cut, &v, &mut Rng::new(4)).unwrap();
        assert!(r == x || r.iter().zip(&x).all(|(a, b)| a == &-b));

        let vc = Problem::vertex_cover(g, 1.0).unwrap();
        let v = vc.integral_embed(&x, 3).unwrap();
        assert_eq!(hyperplane_round(&vc, &v, &mut Rng::new(5)).unwrap(), x);

        let cnf = gen_random_3sat(8, 20, &mut Rng::new(6)).unwrap();
        let sat = Problem::max3sat(cnf, 0.1).unwrap();
        let v = sat.integral_embed(&x, 3).unwrap();
        assert_eq!(hyperplane_round(&sat, &v, &mut Rng::new(7)).unwrap(), x);

        let report = best_of_rounds(&sat, &v, 5, &Rng::new(8)).unwrap();
        assert_eq!(report.value, sat.evaluate(&x).unwrap().value);
        assert_eq!(report.min, report.max);
    }

    #[test]
    fn single_hyperplane_matches_direct_rounding() {
        let g: Graph<f64> = gen_er(10, 0.3, &mut Rng::new(9)).unwrap();
        let p = cut_problem(g.clone());
        let v = Embedding::init_uniform_sphere(10, 5, &mut Rng::new(10)).unwrap();
        let base = Rng::new(11);
        let report = best_of_rounds(&p, &v, 1, &base).unwrap();
        let x = hyperplane_round(&p, &v, &mut base.split(0)).unwrap();
        assert_eq!(report.assignment, x);
        assert_eq!(report.value, g.cut_value(&x));
        assert_eq!(report.best_hyperplane, 0);
    }

    #[test]
    fn more_hyperplanes_never_hurt() {
        let g: Graph<f64> = gen_er(15, 0.3, &mut Rng::new(12)).unwrap();
        let p = cut_problem(g);
        let v = Embedding::init_uniform_sphere(15, 6, &mut Rng::new(13)).unwrap();
        let base = Rng::new(14);
        let mut last = f64::NEG_INFINITY;
        for k in [1, 5, 20, 100] {
            let r = best_of_rounds(&p, &v, k, &base).unwrap();
            assert!(r.value >= last);
            last = r.value;
        }
    }

    #[test]
    fn k3_optimum_rounds_to_cut_two() {
        let s = 3f64.sqrt() / 2.0;
        let v = Embedding::from_rows(&[vec![1.0, 0.0], vec![-0.5, s], vec![-0.5, -s]]).unwrap();
        let p = cut_problem(Graph::complete(3).unwrap());
        let r = best_of_rounds(&p, &v, 1000, &Rng::new(15)).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.min, 2.0);
    }

    #[test]
    fn repair_examples() {
        let edge = Graph::<f64>::unweighted(2, &[(0, 1)]).unwrap();
        assert_eq!(repair_vc(&edge, &[-1, -1]).iter().filter(|&&s| s > 0).count(), 1);

        let star = Graph::<f64>::unweighted(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        assert_eq!(repair_vc(&star, &[1; 6]), vec![1, -1, -1, -1, -1, -1]);

        let path = Graph::<f64>::unweighted(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let minimal = vec![-1, 1, 1, -1];
        assert_eq!(repair_vc(&path, &minimal), minimal);
    }

    #[test]
    fn greedy_vc_examples() {
        let edge = Graph::<f64>::unweighted(2, &[(0, 1)]).unwrap();
        assert_eq!(greedy_vc(&edge), vec![1, 1]);
        let matching = Graph::<f64>::unweighted(8, &[(0, 1), (2, 3), (4, 5), (6, 7)]).unwrap();
        assert_eq!(greedy_vc(&matching).iter().filter(|&&s| s > 0).count(), 8);
    }

    #[test]
    fn local_search_examples() {
        let p3 = Graph::<f64>::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
        let x = local_search_cut(&p3, &[1, 1, 1]);
        assert_eq!(p3.cut_value(&x), 2.0);
        assert_eq!(local_search_cut(&p3, &x), x);

        let k4 = Graph::<f64>::complete(4).unwrap();
        for seed in 0..20 {
            let x = greedy_maxcut(&k4, &mut Rng::new(seed));
            assert_eq!(k4.cut_value(&x), 4.0);
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let c5 = Graph::<f64>::cycle(5).unwrap();
        assert_eq!(brute_force(&cut_problem(c5.clone())).unwrap().1, 4.0);
        let (x, size) = brute_force(&Problem::vertex_cover(c5, 1.0).unwrap()).unwrap();
        assert_eq!(size, 3.0);
        assert_eq!(x, vec![-1, 1, -1, 1, 1]);

        let cnf = CnfInstance::new(
            3,
            vec![
                Clause([Literal::pos(0), Literal::pos(1), Literal::pos(2)]),
                Clause([Literal::neg(0), Literal::pos(1), Literal::neg(2)]),
            ],
        )
        .unwrap();
        assert_eq!(brute_force(&Problem::max3sat(cnf, 0.0).unwrap()).unwrap().1, 0.0);

        let big = cut_problem(Graph::<f64>::unweighted(25, &[]).unwrap());
        assert!(matches!(brute_force(&big), Err(Error::TooLarge { n: 25, .. })));
    }

    #[test]
    fn brute_force_breaks_ties_lexicographically() {
        // any single node cuts the one edge; the smallest such assignment starts with -1
        let p = cut_problem(Graph::<f64>::unweighted(2, &[(0, 1)]).unwrap());
        assert_eq!(brute_force(&p).unwrap().0, vec![-1, 1]);
    }

    fn random_graph(n: usize, seed: u64) -> Graph<f64> {
        gen_er(n, 0.35, &mut Rng::new(seed)).unwrap()
    }

    proptest! {
        #[test]
        fn repair_always_covers(n in 2usize..14, seed in 0u64..1000, bits in 0u32..(1 << 14)) {
            let g = random_graph(n, seed);
            let x: Assignment = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let fixed = repair_vc(&g, &x);
            prop_assert!(covered(&g, &fixed));
            // no single node can be dropped after pruning
            for i in (0..n).filter(|&i| fixed[i] > 0) {
                let mut y = fixed.clone();
                y[i] = -1;
                prop_assert!(!covered(&g, &y));
            }
        }

        #[test]
        fn local_search_reaches_one_flip_optimum(n in 2usize..14, seed in 0u64..1000, bits in 0u32..(1 << 14)) {
            let g = random_graph(n, seed);
            let x: Assignment = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let y = local_search_cut(&g, &x);
            prop_assert!(g.cut_value(&y) >= g.cut_value(&x));
            for i in 0..n {
                let mut z = y.clone();
                z[i] = -z[i];
                prop_assert!(g.cut_value(&z) <= g.cut_value(&y));
            }
        }

        #[test]
        fn brute_force_beats_every_assignment(n in 1usize..9, seed in 0u64..1000, bits in 0u32..(1 << 9)) {
            let g = random_graph(n, seed);
            let x: Assignment = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let (_, best) = brute_force(&cut_problem(g.clone())).unwrap();
            prop_assert!(best >= g.cut_value(&x));
            let vc = Problem::vertex_cover(g.clone(), 1.0).unwrap();
            let (cover, size) = brute_force(&vc).unwrap();
            prop_assert!(covered(&g, &cover));
            if covered(&g, &x) {
                prop_assert!(size <= x.iter().filter(|&&s| s > 0).count() as f64);
            }
        }
    }
}
