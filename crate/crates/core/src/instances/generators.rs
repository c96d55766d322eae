//! Random instance generators. Every generator is a pure function of its
//! parameters and the supplied [`Rng`] state.

use std::collections::HashSet;

use super::{Clause, CnfInstance, Edge, Graph, Literal};
use crate::{Error, Rng, Result, Scalar};

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

fn finish<T: Scalar>(n: usize, pairs: Vec<(usize, usize)>) -> Result<Graph<T>> {
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge { u, v, w: T::one() })
        .collect();
    Graph::new(n, edges)
}

/// Erdős–Rényi `G(n, p)`: each unordered pair independently with probability `p`.
pub fn gen_er<T: Scalar>(n: usize, p: f64, rng: &mut Rng) -> Result<Graph<T>> {
    if n == 0 {
        return Err(Error::InvalidInstance("G(n, p) needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInstance(format!("edge probability {p} outside [0, 1]")));
    }
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.bernoulli(p) {
                pairs.push((u, v));
            }
        }
    }
    finish(n, pairs)
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a complete graph on the first `m` nodes, so the result has
/// `m(m-1)/2 + (n-m)m` edges. Each new node draws `m` distinct targets with
/// probability proportional to degree; repeated targets are redrawn.
pub fn gen_ba<T: Scalar>(n: usize, m: usize, rng: &mut Rng) -> Result<Graph<T>> {
    if m == 0 || n <= m {
        return Err(Error::InvalidInstance(format!(
            "Barabási–Albert needs n > m >= 1 (got n = {n}, m = {m})"
        )));
    }
    let mut pairs = Vec::with_capacity(m * (m - 1) / 2 + (n - m) * m);
    // each node appears once per incident edge
    let mut endpoints: Vec<usize> = Vec::new();
    for u in 0..m {
        for v in u + 1..m {
            pairs.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    for source in m..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.below(source)
            } else {
                endpoints[rng.below(endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            pairs.push((t, source));
            endpoints.push(t);
            endpoints.push(source);
        }
    }
    finish(n, pairs)
}

/// Watts–Strogatz small world: ring lattice of even degree `k`, then each
/// lattice edge `(u, u + j)` has its far endpoint rewired with probability `p`
/// to a uniformly chosen node that keeps the graph simple.
pub fn gen_ws<T: Scalar>(n: usize, k: usize, p: f64, rng: &mut Rng) -> Result<Graph<T>> {
    if k % 2 != 0 || k >= n {
        return Err(Error::InvalidInstance(format!(
            "Watts–Strogatz needs even k < n (got n = {n}, k = {k})"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInstance(format!("rewiring probability {p} outside [0, 1]")));
    }
    let mut present: HashSet<(usize, usize)> = HashSet::new();
    let mut order = Vec::new();
    for j in 1..=k / 2 {
        for u in 0..n {
            let e = key(u, (u + j) % n);
            present.insert(e);
            order.push((u, (u + j) % n));
        }
    }
    let mut degree = vec![k; n];
    let mut out = Vec::with_capacity(order.len());
    for (u, v) in order {
        if rng.bernoulli(p) && degree[u] < n - 1 {
            // rejection sample a new endpoint; u has at least one free slot
            let w = loop {
                let w = rng.below(n);
                if w != u && !present.contains(&key(u, w)) {
                    break w;
                }
            };
            present.remove(&key(u, v));
            present.insert(key(u, w));
            degree[v] -= 1;
            degree[w] += 1;
            out.push((u, w));
        } else {
            out.push((u, v));
        }
    }
    // the list may hold an edge that was later rewired away; rebuild from the set
    let mut pairs: Vec<_> = out.into_iter().filter(|&(u, v)| present.remove(&key(u, v))).collect();
    pairs.sort_unstable_by_key(|&(u, v)| key(u, v));
    finish(n, pairs)
}

/// Holme–Kim power-law graph with tunable clustering. After each preferential
/// attachment step a triad-formation step (probability `p`) links the new node
/// to a random neighbour of the last target instead.
pub fn gen_hk<T: Scalar>(n: usize, m: usize, p: f64, rng: &mut Rng) -> Result<Graph<T>> {
    if m == 0 || n <= m {
        return Err(Error::InvalidInstance(format!(
            "Holme–Kim needs n > m >= 1 (got n = {n}, m = {m})"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInstance(format!("triad probability {p} outside [0, 1]")));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pairs = Vec::new();
    let mut add = |adj: &mut Vec<Vec<usize>>, u: usize, v: usize| -> bool {
        if u == v || adj[u].contains(&v) {
            return false;
        }
        adj[u].push(v);
        adj[v].push(u);
        pairs.push((u, v));
        true
    };
    let mut repeated: Vec<usize> = (0..m).collect();
    for source in m..n {
        // m distinct preferential targets
        let mut candidates: Vec<usize> = Vec::with_capacity(m);
        while candidates.len() < m {
            let t = repeated[rng.below(repeated.len())];
            if !candidates.contains(&t) {
                candidates.push(t);
            }
        }
        let mut target = candidates.pop().expect("m >= 1");
        add(&mut adj, source, target);
        repeated.push(target);
        let mut count = 1;
        while count < m {
            if rng.bernoulli(p) {
                let triad: Vec<usize> = adj[target]
                    .iter()
                    .copied()
                    .filter(|&w| w != source && !adj[source].contains(&w))
                    .collect();
                if !triad.is_empty() {
                    let w = triad[rng.below(triad.len())];
                    add(&mut adj, source, w);
                    repeated.push(w);
                    count += 1;
                    continue;
                }
            }
            target = candidates.pop().expect("one candidate per remaining slot");
            add(&mut adj, source, target);
            repeated.push(target);
            count += 1;
        }
        repeated.extend(std::iter::repeat_n(source, m));
    }
    finish(n, pairs)
}

/// Uniform random 3-SAT: three distinct variables per clause, each negated
/// with probability 1/2.
pub fn gen_random_3sat(num_vars: usize, num_clauses: usize, rng: &mut Rng) -> Result<CnfInstance> {
    if num_vars < 3 {
        return Err(Error::InvalidInstance(format!(
            "3-SAT needs at least 3 variables (got {num_vars})"
        )));
    }
    let mut clauses = Vec::with_capacity(num_clauses);
    for _ in 0..num_clauses {
        let mut vars = [0usize; 3];
        let mut filled = 0;
        while filled < 3 {
            let v = rng.below(num_vars);
            if !vars[..filled].contains(&v) {
                vars[filled] = v;
                filled += 1;
            }
        }
        let lits = vars.map(|var| Literal {
            var,
            negated: rng.bernoulli(0.5),
        });
        clauses.push(Clause(lits));
    }
    CnfInstance::new(num_vars, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_simple(g: &Graph<f64>) {
        let mut seen = HashSet::new();
        for e in g.edges() {
            assert_ne!(e.u, e.v);
            assert!(seen.insert(key(e.u, e.v)));
        }
    }

    #[test]
    fn er_extremes() {
        let mut r = Rng::new(3);
        assert_eq!(gen_er::<f64>(10, 0.0, &mut r).unwrap().num_edges(), 0);
        assert_eq!(gen_er::<f64>(10, 1.0, &mut r).unwrap().num_edges(), 45);
        assert!(gen_er::<f64>(0, 0.5, &mut r).is_err());
    }

    #[test]
    fn er_edge_count_concentrates() {
        let g = gen_er::<f64>(400, 0.15, &mut Rng::new(11)).unwrap();
        let pairs = 400.0 * 399.0 / 2.0;
        let mean = 0.15 * pairs;
        let sd = (pairs * 0.15 * 0.85_f64).sqrt();
        assert!((g.num_edges() as f64 - mean).abs() <= 4.0 * sd, "{}", g.num_edges());
        assert_simple(&g);
    }

    #[test]
    fn ba_edge_counts() {
        let g = gen_ba::<f64>(100, 4, &mut Rng::new(1)).unwrap();
        assert_eq!(g.num_edges(), 6 + 96 * 4);
        assert_simple(&g);

        let g = gen_ba::<f64>(5, 4, &mut Rng::new(1)).unwrap();
        assert_eq!(g.num_edges(), 10);
        assert!((0..5).all(|i| g.degree(i) > 0));

        // seed clique K9 plus a node attached to all of it is K10
        let g = gen_ba::<f64>(10, 9, &mut Rng::new(1)).unwrap();
        assert_eq!(g.num_edges(), 45);

        let g = gen_ba::<f64>(20, 1, &mut Rng::new(1)).unwrap();
        assert_eq!(g.num_edges(), 19);
        assert!(gen_ba::<f64>(4, 4, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn ws_ring_and_rewired() {
        let ring = gen_ws::<f64>(10, 4, 0.0, &mut Rng::new(5)).unwrap();
        assert_eq!(ring.num_edges(), 20);
        assert!((0..10).all(|i| ring.degree(i) == 4));

        let g = gen_ws::<f64>(10, 4, 1.0, &mut Rng::new(5)).unwrap();
        assert_eq!(g.num_edges(), 20);
        assert!((0..10).any(|i| g.degree(i) != 4));
        assert_simple(&g);

        assert!(gen_ws::<f64>(10, 3, 0.1, &mut Rng::new(5)).is_err());
        assert!(gen_ws::<f64>(4, 4, 0.1, &mut Rng::new(5)).is_err());
    }

    #[test]
    fn hk_is_simple() {
        let g = gen_hk::<f64>(50, 4, 0.25, &mut Rng::new(9)).unwrap();
        assert_eq!(g.num_nodes(), 50);
        assert_simple(&g);
        assert!(gen_hk::<f64>(4, 4, 0.25, &mut Rng::new(9)).is_err());
    }

    #[test]
    fn random_3sat_shapes() {
        let f = gen_random_3sat(3, 1, &mut Rng::new(2)).unwrap();
        let mut vars: Vec<_> = f.clauses()[0].0.iter().map(|l| l.var).collect();
        vars.sort();
        assert_eq!(vars, vec![0, 1, 2]);

        let f = gen_random_3sat(100, 415, &mut Rng::new(2)).unwrap();
        assert_eq!(f.num_clauses(), 415);
        let again = gen_random_3sat(100, 415, &mut Rng::new(2)).unwrap();
        assert_eq!(f, again);
        assert!(gen_random_3sat(2, 1, &mut Rng::new(2)).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        for seed in 0..5 {
            let a = gen_hk::<f64>(40, 3, 0.5, &mut Rng::new(seed)).unwrap();
            let b = gen_hk::<f64>(40, 3, 0.5, &mut Rng::new(seed)).unwrap();
            assert_eq!(a, b);
            let a = gen_ws::<f64>(40, 6, 0.3, &mut Rng::new(seed)).unwrap();
            let b = gen_ws::<f64>(40, 6, 0.3, &mut Rng::new(seed)).unwrap();
            assert_eq!(a, b);
        }
    }
}
