//! Problem instances: weighted graphs, 3-CNF formulas, random generators and
//! the text formats used to exchange them.
//!
//! Node and variable indices are 0-based in memory and 1-based on disk.

mod cnf;
mod formats;
mod generators;
mod graph;

pub use cnf::{Clause, CnfInstance, Literal};
pub use formats::{parse_dimacs_cnf, parse_edge_list, serialize_dimacs, serialize_edge_list};
pub use generators::{gen_ba, gen_er, gen_hk, gen_random_3sat, gen_ws};
pub use graph::{Edge, Graph};
