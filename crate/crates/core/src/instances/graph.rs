use std::collections::HashSet;

use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<T> {
    pub u: usize,
    pub v: usize,
    pub w: T,
}

/// Simple weighted undirected graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph<T> {
    num_nodes: usize,
    edges: Vec<Edge<T>>,
    adjacency: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> Graph<T> {
    /// Validates and builds a graph. Rejects self-loops, duplicate pairs,
    /// out-of-range endpoints and non-finite weights.
    pub fn new(num_nodes: usize, edges: Vec<Edge<T>>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidInstance("graph needs at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); num_nodes];
        for (k, e) in edges.iter().enumerate() {
            if e.u >= num_nodes || e.v >= num_nodes {
                return Err(Error::InvalidInstance(format!(
                    "edge {k} ({}, {}) out of range for {num_nodes} nodes",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::InvalidInstance(format!("edge {k} is a self-loop on {}", e.u)));
            }
            if !e.w.is_finite() {
                return Err(Error::InvalidInstance(format!("edge {k} has non-finite weight")));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate edge ({}, {})",
                    e.u, e.v
                )));
            }
            adjacency[e.u].push((e.v, e.w));
            adjacency[e.v].push((e.u, e.w));
        }
        Ok(Graph {
            num_nodes,
            edges,
            adjacency,
        })
    }

    /// Unit-weight graph from endpoint pairs.
    pub fn unweighted(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(u, v)| Edge { u, v, w: T::one() })
            .collect();
        Graph::new(num_nodes, edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                pairs.push((u, v));
            }
        }
        Graph::unweighted(n, &pairs)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::unweighted(n, &pairs)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, T)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn total_weight(&self) -> T {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].iter().any(|&(x, _)| x == v)
    }

    /// Weighted adjacency matrix, row-major `n × n`.
    pub fn adjacency_matrix(&self) -> Vec<T> {
        let n = self.num_nodes;
        let mut a = vec![T::zero(); n * n];
        for e in &self.edges {
            a[e.u * n + e.v] += e.w;
            a[e.v * n + e.u] += e.w;
        }
        a
    }

    /// Total weight of edges whose endpoints get different signs.
    pub fn cut_value(&self, assignment: &[i8]) -> T {
        self.edges
            .iter()
            .filter(|e| assignment[e.u] != assignment[e.v])
            .map(|e| e.w)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::<f64>::unweighted(3, &[(0, 0)]).is_err());
        assert!(Graph::<f64>::unweighted(3, &[(0, 3)]).is_err());
        assert!(Graph::<f64>::unweighted(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::<f64>::unweighted(0, &[]).is_err());
        let bad = vec![Edge { u: 0, v: 1, w: f64::NAN }];
        assert!(Graph::new(2, bad).is_err());
    }

    #[test]
    fn k4_bipartition_cuts_four() {
        let g = Graph::<f64>::complete(4).unwrap();
        assert_eq!(g.cut_value(&[1, 1, -1, -1]), 4.0);
        assert_eq!(g.num_edges(), 6);
    }
}
