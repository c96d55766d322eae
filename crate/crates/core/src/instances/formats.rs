//! Edge-list (GSET-style) and DIMACS CNF text formats.
//!
//! Edge list: first non-comment line `n m`, then `m` lines `u v [w]` with
//! 1-based endpoints; `#` starts a comment. DIMACS: `p cnf V C` header, then
//! clauses as 1-based signed integers terminated by `0`; lines starting with
//! `c` are comments.

use std::fmt::Write;

use super::{Clause, CnfInstance, Edge, Graph, Literal};
use crate::{Error, Result, Scalar};

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected {what}, found {tok:?}")))
}

pub fn parse_edge_list<T: Scalar>(text: &str) -> Result<Graph<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing `n m` header"))?;
    let mut toks = header.split_whitespace();
    let n = parse_usize(toks.next().unwrap_or(""), hline, "node count")?;
    let m = parse_usize(
        toks.next().ok_or_else(|| Error::parse(hline, "header needs `n m`"))?,
        hline,
        "edge count",
    )?;
    if toks.next().is_some() {
        return Err(Error::parse(hline, "header has trailing tokens"));
    }
    if n == 0 {
        return Err(Error::parse(hline, "graph needs at least one node"));
    }

    let mut edges = Vec::with_capacity(m);
    let mut seen = std::collections::HashSet::with_capacity(m);
    for (lno, line) in lines {
        if edges.len() == m {
            return Err(Error::parse(lno, format!("more than the {m} edges declared")));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 && toks.len() != 3 {
            return Err(Error::parse(lno, "expected `u v [w]`"));
        }
        let u = parse_usize(toks[0], lno, "node index")?;
        let v = parse_usize(toks[1], lno, "node index")?;
        if u == 0 || v == 0 || u > n || v > n {
            return Err(Error::parse(lno, format!("node index out of range 1..={n}")));
        }
        if u == v {
            return Err(Error::parse(lno, format!("self-loop on node {u}")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::parse(lno, format!("duplicate edge {u} {v}")));
        }
        let w = match toks.get(2) {
            Some(t) => t
                .parse::<T>()
                .ok()
                .filter(|w| w.is_finite())
                .ok_or_else(|| Error::parse(lno, format!("bad weight {t:?}")))?,
            None => T::one(),
        };
        edges.push(Edge {
            u: u - 1,
            v: v - 1,
            w,
        });
    }
    if edges.len() != m {
        let last = text.lines().count().max(1);
        return Err(Error::parse(
            last,
            format!("header declares {m} edges, found {}", edges.len()),
        ));
    }
    Graph::new(n, edges)
}

/// Canonical edge-list text: unit weights are omitted, other weights use the
/// shortest representation that parses back to the same value.
pub fn serialize_edge_list<T: Scalar>(graph: &Graph<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", graph.num_nodes(), graph.num_edges());
    for e in graph.edges() {
        if e.w == T::one() {
            let _ = writeln!(out, "{} {}", e.u + 1, e.v + 1);
        } else {
            let _ = writeln!(out, "{} {} {}", e.u + 1, e.v + 1, e.w);
        }
    }
    out
}

pub fn parse_dimacs_cnf(text: &str) -> Result<CnfInstance> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<(i64, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(Error::parse(lno, "second `p` header"));
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "p" || toks[1] != "cnf" {
                return Err(Error::parse(lno, "expected `p cnf V C`"));
            }
            let v = parse_usize(toks[2], lno, "variable count")?;
            let c = parse_usize(toks[3], lno, "clause count")?;
            header = Some((v, c));
            continue;
        }
        let (num_vars, _) = header.ok_or_else(|| Error::parse(lno, "clause before `p cnf` header"))?;
        for tok in line.split_whitespace() {
            let x: i64 = tok
                .parse()
                .map_err(|_| Error::parse(lno, format!("expected integer literal, found {tok:?}")))?;
            if x == 0 {
                if pending.len() != 3 {
                    return Err(Error::UnsupportedArity {
                        line: lno,
                        arity: pending.len(),
                    });
                }
                let lits = [0, 1, 2].map(|k| {
                    let (x, _) = pending[k];
                    Literal {
                        var: (x.unsigned_abs() - 1) as usize,
                        negated: x < 0,
                    }
                });
                if lits[0].var == lits[1].var || lits[0].var == lits[2].var || lits[1].var == lits[2].var {
                    return Err(Error::parse(lno, "clause repeats a variable"));
                }
                clauses.push(Clause(lits));
                pending.clear();
            } else {
                if x.unsigned_abs() as usize > num_vars {
                    return Err(Error::parse(
                        lno,
                        format!("literal {x} out of range for {num_vars} variables"),
                    ));
                }
                pending.push((x, lno));
            }
        }
    }
    let last = text.lines().count().max(1);
    let (num_vars, num_clauses) = header.ok_or_else(|| Error::parse(last, "missing `p cnf` header"))?;
    if !pending.is_empty() {
        return Err(Error::parse(pending[0].1, "clause not terminated by 0"));
    }
    if clauses.len() != num_clauses {
        return Err(Error::parse(
            last,
            format!("header declares {num_clauses} clauses, found {}", clauses.len()),
        ));
    }
    CnfInstance::new(num_vars, clauses).map_err(|e| Error::parse(last, e.to_string()))
}

pub fn serialize_dimacs(cnf: &CnfInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", cnf.num_vars(), cnf.num_clauses());
    for c in cnf.clauses() {
        let [a, b, d] = c.0;
        let _ = writeln!(out, "{} {} {} 0", a.to_dimacs(), b.to_dimacs(), d.to_dimacs());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_er, gen_random_3sat};
    use crate::Rng;
    use proptest::prelude::{any, prop_assert_eq, proptest};

    #[test]
    fn parses_path() {
        let g: Graph<f64> = parse_edge_list("3 2\n1 2\n2 3").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges()[0], Edge { u: 0, v: 1, w: 1.0 });
        assert_eq!(g.edges()[1], Edge { u: 1, v: 2, w: 1.0 });
    }

    #[test]
    fn parses_weight_and_comments() {
        let g: Graph<f64> = parse_edge_list("# header next\n2 1 # two nodes\n\n1 2 2.5\n").unwrap();
        assert_eq!(g.edges()[0].w, 2.5);
    }

    #[test]
    fn edge_list_errors_carry_line() {
        let cases = [
            ("3 1\n1 4\n", 2),
            ("3 1\n2 2\n", 2),
            ("3 2\n1 2\n2 1\n", 3),
            ("3 1\n1 x\n", 2),
            ("3 1\n1 2 3 4\n", 2),
            ("3 1\n1 2\n2 3\n", 3),
        ];
        for (text, want) in cases {
            match parse_edge_list::<f64>(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn canonical_text_round_trips() {
        let t = "4 3\n1 2\n2 3 0.5\n3 4 -1.25\n";
        let g: Graph<f64> = parse_edge_list(t).unwrap();
        assert_eq!(serialize_edge_list(&g), t);
    }

    #[test]
    fn parses_dimacs() {
        let f = parse_dimacs_cnf("c demo\np cnf 3 1\n1 -2 3 0\nc trailing\n").unwrap();
        assert_eq!(
            f.clauses()[0],
            Clause([Literal::pos(0), Literal::neg(1), Literal::pos(2)])
        );
        // clauses may span lines
        let f = parse_dimacs_cnf("p cnf 4 2\n1 -2\n 3 0 2 3\n4 0\n").unwrap();
        assert_eq!(f.num_clauses(), 2);
    }

    #[test]
    fn dimacs_errors() {
        assert!(matches!(
            parse_dimacs_cnf("p cnf 3 1\n1 2 0\n"),
            Err(Error::UnsupportedArity { arity: 2, .. })
        ));
        assert!(matches!(
            parse_dimacs_cnf("p cnf 3 2\n1 2 3 0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_dimacs_cnf("p cnf 3 1\n1 2 4 0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_dimacs_cnf("1 2 3 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_dimacs_cnf("p cnf 3 1\n1 2 3\n"),
            Err(Error::Parse { .. })
        ));
    }

    proptest! {
        #[test]
        fn edge_list_round_trip(seed in any::<u64>(), n in 1usize..30, p in 0.0f64..1.0) {
            let g: Graph<f64> = gen_er(n, p, &mut Rng::new(seed)).unwrap();
            let back: Graph<f64> = parse_edge_list(&serialize_edge_list(&g)).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn dimacs_round_trip(seed in any::<u64>(), vars in 3usize..40, clauses in 0usize..120) {
            let f = gen_random_3sat(vars, clauses, &mut Rng::new(seed)).unwrap();
            let back = parse_dimacs_cnf(&serialize_dimacs(&f)).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
