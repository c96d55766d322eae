use super::*;
use crate::instances::{gen_er, gen_random_3sat, Clause, Literal};
use crate::Rng;

fn k3_planar() -> Embedding<f64> {
    let s = 3f64.sqrt() / 2.0;
    Embedding::from_rows(&[vec![1.0, 0.0], vec![-0.5, s], vec![-0.5, -s]]).unwrap()
}

fn all_assignments(n: usize) -> impl Iterator<Item = Vec<i8>> {
    (0u32..1 << n).map(move |bits| (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect())
}

fn random_embedding(p: &Problem<f64>, rank: usize, seed: u64) -> Embedding<f64> {
    Embedding::init_uniform_sphere(p.rows(), rank, &mut Rng::new(seed)).unwrap()
}

/// Central-difference gradient of `p.loss`.
fn fd_grad(p: &Problem<f64>, v: &Embedding<f64>) -> Vec<f64> {
    let h = 1e-5;
    (0..v.as_slice().len())
        .map(|k| {
            let mut plus = v.clone();
            let mut minus = v.clone();
            plus.as_mut_slice()[k] += h;
            minus.as_mut_slice()[k] -= h;
            (p.loss(&plus).unwrap() - p.loss(&minus).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    num / den
}

#[test]
fn maxcut_k3_values() {
    let p = Problem::max_cut(Graph::<f64>::complete(3).unwrap());
    let same = Embedding::from_rows(&vec![vec![1.0, 0.0]; 3]).unwrap();
    assert_eq!(p.loss(&same).unwrap(), 0.0);
    assert!((p.loss(&k3_planar()).unwrap() + 2.25).abs() < 1e-12);
    assert_eq!(p.violation(&k3_planar()).unwrap(), 0.0);
}

#[test]
fn maxcut_isolated_node_has_zero_gradient() {
    let g = Graph::<f64>::unweighted(3, &[(0, 1)]).unwrap();
    let p = Problem::max_cut(g);
    let v = random_embedding(&p, 4, 1);
    let grad = p.grad(&v).unwrap();
    assert!(grad.row(2).iter().all(|&x| x == 0.0));
}

#[test]
fn vc_without_penalty_pulls_toward_null() {
    let g = Graph::<f64>::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
    let p = Problem::vertex_cover(g, 0.0).unwrap();
    let v = random_embedding(&p, 3, 2);
    let grad = p.grad(&v).unwrap();
    for i in 1..4 {
        for k in 0..3 {
            assert!((grad.row(i)[k] - 0.5 * v.row(0)[k]).abs() < 1e-15);
        }
    }
}

#[test]
fn integral_examples() {
    let path = Graph::<f64>::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
    let p = Problem::max_cut(path);
    let v = p.integral_embed(&[1, -1, 1], 1).unwrap();
    assert_eq!(p.loss(&v).unwrap(), -2.0);

    let edge = Graph::<f64>::unweighted(2, &[(0, 1)]).unwrap();
    let p = Problem::vertex_cover(edge, 1.0).unwrap();
    let v = p.integral_embed(&[1, 1], 2).unwrap();
    assert_eq!(p.loss(&v).unwrap(), 2.0);
    assert_eq!(p.violation(&v).unwrap(), 0.0);
    let r = p.evaluate(&[-1, -1]).unwrap();
    assert_eq!((r.value, r.feasible), (0.0, false));

    // (x1 ∨ ¬x2 ∨ x3) at all-false is satisfied through ¬x2
    let cnf = CnfInstance::new(3, vec![Clause([Literal::pos(0), Literal::neg(1), Literal::pos(2)])]).unwrap();
    let p = Problem::max3sat(cnf, DEFAULT_SAT_RHO).unwrap();
    let v = p.integral_embed(&[-1, -1, -1], 4).unwrap();
    assert!((p.loss(&v).unwrap() + 1.0).abs() < 1e-15);
    assert_eq!(p.evaluate(&[-1, 1, -1]).unwrap().value, 1.0);
}

#[test]
fn evaluate_k4() {
    let p = Problem::max_cut(Graph::<f64>::complete(4).unwrap());
    assert_eq!(p.evaluate(&[1, 1, -1, -1]).unwrap().value, 4.0);
    assert!(p.evaluate(&[1, 1]).is_err());
}

#[test]
fn shape_mismatch_is_reported() {
    let p = Problem::max_cut(Graph::<f64>::complete(4).unwrap());
    let v = Embedding::<f64>::init_uniform_sphere(3, 2, &mut Rng::new(0)).unwrap();
    assert!(matches!(p.loss(&v), Err(Error::Shape(_))));
    assert!(matches!(p.grad(&v), Err(Error::Shape(_))));
}

#[test]
fn sat_layout_pairs() {
    let cnf = CnfInstance::new(
        4,
        vec![
            Clause([Literal::pos(2), Literal::neg(0), Literal::pos(1)]),
            Clause([Literal::pos(1), Literal::pos(2), Literal::neg(3)]),
        ],
    )
    .unwrap();
    let p = Problem::max3sat(cnf, 0.5).unwrap();
    let l = p.layout();
    assert_eq!(l.null_row(), Some(0));
    // pairs {0,1} {0,2} {1,2} {1,3} {2,3}
    assert_eq!(l.pairs().count(), 5);
    assert_eq!(p.rows(), 1 + 4 + 5);
    assert!(l.pair_row(0, 3).is_none());
    assert_eq!(l.pair_row(2, 1), l.pair_row(1, 2));
}

#[test]
fn sat_violation_positive_for_random_embedding() {
    let cnf = gen_random_3sat(8, 20, &mut Rng::new(3)).unwrap();
    let p = Problem::max3sat(cnf, 0.003).unwrap();
    let v = random_embedding(&p, 8, 4);
    assert!(p.violation(&v).unwrap() > 0.0);
}

fn problems(seed: u64) -> Vec<Problem<f64>> {
    let mut rng = Rng::new(seed);
    let g: Graph<f64> = gen_er(8, 0.5, &mut rng).unwrap();
    let cnf = gen_random_3sat(5, 10, &mut rng).unwrap();
    vec![
        Problem::max_cut(g.clone()),
        Problem::vertex_cover(g.clone(), 0.3).unwrap(),
        Problem::vertex_cover(g, 1.0).unwrap(),
        Problem::max3sat(cnf.clone(), 0.003).unwrap(),
        Problem::max3sat(cnf, 2.0).unwrap().normalized(true),
    ]
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..4 {
        for p in problems(seed) {
            let v = random_embedding(&p, 5, seed + 100);
            let g = p.grad(&v).unwrap();
            let err = rel_err(g.as_slice(), &fd_grad(&p, &v));
            assert!(err <= 1e-5, "{} seed {seed}: {err}", p.kind());
        }
    }
}

#[test]
fn program_evaluates_to_same_loss() {
    for seed in 0..4 {
        for p in problems(seed) {
            let v = random_embedding(&p, 4, seed);
            let a = p.loss(&v).unwrap();
            let b = p.program().evaluate(&v);
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{}: {a} vs {b}", p.kind());
        }
    }
}

#[test]
fn integral_embedding_matches_brute_force_objective() {
    for seed in 0..3 {
        for p in problems(seed) {
            for x in all_assignments(p.num_vars()) {
                let v = p.integral_embed(&x, 3).unwrap();
                let want = p.discrete_objective(&x).unwrap();
                assert!((p.loss(&v).unwrap() - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn loss_is_rotation_invariant() {
    let mut rng = Rng::new(8);
    for p in problems(8) {
        let v = random_embedding(&p, 3, 9);
        // random orthogonal 3x3 from Gram–Schmidt
        let mut q = vec![0.0f64; 9];
        rng.fill_gaussian(&mut q);
        for i in 0..3 {
            for j in 0..i {
                let d: f64 = (0..3).map(|k| q[i * 3 + k] * q[j * 3 + k]).sum();
                for k in 0..3 {
                    q[i * 3 + k] -= d * q[j * 3 + k];
                }
            }
            let n: f64 = (0..3).map(|k| q[i * 3 + k].powi(2)).sum::<f64>().sqrt();
            (0..3).for_each(|k| q[i * 3 + k] /= n);
        }
        let mut rotated = v.clone();
        for r in 0..v.rows() {
            for i in 0..3 {
                rotated.row_mut(r)[i] = (0..3).map(|k| q[i * 3 + k] * v.row(r)[k]).sum();
            }
        }
        let (a, b) = (p.loss(&v).unwrap(), p.loss(&rotated).unwrap());
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn f32_agrees_with_f64() {
    let g64: Graph<f64> = gen_er(8, 0.5, &mut Rng::new(2)).unwrap();
    let pairs: Vec<_> = g64.edges().iter().map(|e| (e.u, e.v)).collect();
    let g32 = Graph::<f32>::unweighted(8, &pairs).unwrap();
    let v64 = Embedding::<f64>::init_uniform_sphere(9, 4, &mut Rng::new(3)).unwrap();
    let v32 = Embedding::<f32>::from_vec(9, 4, v64.as_slice().iter().map(|&x| x as f32).collect()).unwrap();
    let a = Problem::vertex_cover(g64, 1.0).unwrap().loss(&v64).unwrap();
    let b = Problem::vertex_cover(g32, 1.0).unwrap().loss(&v32).unwrap();
    assert!((a - b as f64).abs() < 1e-4 * a.abs().max(1.0));
}
