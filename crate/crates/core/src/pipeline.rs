//! End-to-end runs: solve or forward, round, post-process, report.
//!
//! Every record is reproducible from the run's seed. Wall times are the only
//! non-deterministic field; they can be switched off for byte-identical
//! reports.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::instances::{parse_dimacs_cnf, parse_edge_list};
use crate::lagrangian::ProblemKind;
use crate::optgnn::default_rho;
use crate::rng::tags;
use crate::rounding::{best_of_rounds, brute_force, greedy_maxcut, greedy_vc, local_search_cut, Assignment, BRUTE_FORCE_LIMIT};
use crate::solver::{solve, StepRule, TraceEntry};
use crate::{Embedding, Error, Model, Problem, Real, Result, Rng, SolverConfig};

pub const DEFAULT_RANK: usize = 16;
pub const DEFAULT_HYPERPLANES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pgd,
    Model,
    Greedy,
    Brute,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pgd => "pgd",
            Method::Model => "model",
            Method::Greedy => "greedy",
            Method::Brute => "brute",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgd" => Ok(Method::Pgd),
            "model" => Ok(Method::Model),
            "greedy" => Ok(Method::Greedy),
            "brute" => Ok(Method::Brute),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected pgd, model, greedy or brute)"
            ))),
        }
    }
}

/// Reads an instance file: edge list for graph problems, DIMACS otherwise.
pub fn load_problem(kind: ProblemKind, path: &Path, rho: Option<Real>) -> Result<Problem> {
    let text = std::fs::read_to_string(path)?;
    let rho = rho.unwrap_or_else(|| default_rho(kind));
    match kind {
        ProblemKind::MaxCut => Ok(Problem::max_cut(parse_edge_list(&text)?)),
        ProblemKind::VertexCover => Problem::vertex_cover(parse_edge_list(&text)?, rho),
        ProblemKind::Max3Sat => Problem::max3sat(parse_dimacs_cnf(&text)?, rho),
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub rank: usize,
    pub iters: usize,
    pub step: StepRule<Real>,
    pub perturbed: bool,
    pub hyperplanes: usize,
    pub seed: u64,
    pub model: Option<Model>,
    /// Record wall-clock times; off gives byte-identical reports.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            rank: DEFAULT_RANK,
            iters: SolverConfig::default().max_iters,
            step: StepRule::Backtracking,
            perturbed: false,
            hyperplanes: DEFAULT_HYPERPLANES,
            seed: 0,
            model: None,
            timing: true,
        }
    }
}

impl RunOptions {
    fn solver_config(&self) -> SolverConfig {
        let cfg = SolverConfig {
            max_iters: self.iters,
            step: self.step,
            seed: self.seed,
            ..Default::default()
        };
        if self.perturbed {
            cfg.perturbed()
        } else {
            cfg
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub method: Method,
    /// Cut weight, cover size, or number of unsatisfied clauses.
    pub objective: Real,
    pub feasible: bool,
    /// Mean squared constraint violation of the embedding (none for
    /// combinatorial methods).
    pub violation: Option<Real>,
    /// `objective / brute-force objective` when brute force ran.
    pub ratio: Option<Real>,
    pub wall_ms: Real,
    pub seed: u64,
}

/// Outcome of one method on one instance.
#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub record: RunRecord,
    pub assignment: Assignment,
    pub embedding: Option<Embedding>,
    /// Solver trace; empty unless the solver ran.
    pub trace: Vec<TraceEntry<Real>>,
}

fn check_compatible(kind: ProblemKind, method: Method, options: &RunOptions) -> Result<()> {
    match method {
        Method::Greedy if kind == ProblemKind::Max3Sat => Err(Error::InvalidArgument(
            "the greedy baseline is defined for maxcut and vc only".into(),
        )),
        Method::Model => match &options.model {
            None => Err(Error::InvalidArgument("method model needs a checkpoint".into())),
            Some(m) if m.kind().is_some_and(|k| k != kind) => Err(Error::InvalidArgument(format!(
                "checkpoint was trained for {}, not {kind}",
                m.kind().expect("checked")
            ))),
            Some(_) => Ok(()),
        },
        _ => Ok(()),
    }
}

/// Fractional embedding from the solver or the model.
pub fn relax(problem: &Problem, options: &RunOptions, method: Method) -> Result<Embedding> {
    Ok(relax_traced(problem, options, method)?.0)
}

fn relax_traced(problem: &Problem, options: &RunOptions, method: Method) -> Result<(Embedding, Vec<TraceEntry<Real>>)> {
    let rank = match (method, &options.model) {
        (Method::Model, Some(m)) => m.rank(),
        _ => options.rank,
    };
    let cfg = options.solver_config();
    let v0 = cfg.initial_embedding(problem, rank)?;
    match (method, &options.model) {
        (Method::Model, Some(model)) => Ok((model.forward(problem, &v0)?, Vec::new())),
        _ => {
            let r = solve(problem, &v0, &cfg)?;
            Ok((r.embedding, r.trace))
        }
    }
}

/// Rounds with the configured hyperplanes, then improves or repairs.
pub fn round_and_improve(problem: &Problem, v: &Embedding, options: &RunOptions) -> Result<Assignment> {
    let report = best_of_rounds(problem, v, options.hyperplanes, &Rng::new(options.seed).split(tags::HYPERPLANES))?;
    Ok(match (problem.kind(), problem.graph()) {
        (ProblemKind::MaxCut, Some(g)) => local_search_cut(g, &report.assignment),
        _ => report.assignment,
    })
}

/// Runs one method on one instance.
pub fn run_method(id: &str, problem: &Problem, method: Method, options: &RunOptions) -> Result<MethodOutcome> {
    check_compatible(problem.kind(), method, options)?;
    let start = Instant::now();
    let mut trace = Vec::new();
    let (assignment, embedding) = match method {
        Method::Pgd | Method::Model => {
            let (v, t) = relax_traced(problem, options, method)?;
            trace = t;
            (round_and_improve(problem, &v, options)?, Some(v))
        }
        Method::Greedy => {
            let g = problem.graph().expect("graph problem");
            let x = match problem.kind() {
                ProblemKind::MaxCut => greedy_maxcut(g, &mut Rng::new(options.seed).split(tags::GREEDY)),
                _ => greedy_vc(g),
            };
            (x, None)
        }
        Method::Brute => (brute_force(problem)?.0, None),
    };
    let wall_ms = if options.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let report = problem.evaluate(&assignment)?;
    if !report.feasible {
        return Err(Error::InvalidInstance(format!(
            "{id}: {method} produced an infeasible assignment"
        )));
    }
    let violation = embedding.as_ref().map(|v| problem.violation(v)).transpose()?;
    Ok(MethodOutcome {
        record: RunRecord {
            instance: id.to_string(),
            method,
            objective: report.value,
            feasible: report.feasible,
            violation,
            ratio: None,
            wall_ms,
            seed: options.seed,
        },
        assignment,
        embedding,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: Method,
    pub count: usize,
    pub mean: Real,
    /// Population standard deviation.
    pub std: Real,
    pub mean_ratio: Option<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub problem: ProblemKind,
    pub methods: Vec<Method>,
    pub rank: usize,
    pub iters: usize,
    pub step: String,
    pub perturbed: bool,
    pub rho: Option<Real>,
    pub hyperplanes: usize,
    pub seed: u64,
    pub model_layers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl RunReport {
    pub fn new(config: ConfigEcho, records: Vec<RunRecord>) -> Self {
        let aggregates = aggregate(&config.methods, &records);
        RunReport {
            config,
            records,
            aggregates,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text rendering of the records and aggregates.
    pub fn to_table(&self) -> String {
        let fmt_opt = |x: Option<Real>, prec: usize| x.map_or("-".to_string(), |v| format!("{v:.prec$}"));
        let mut rows: Vec<[String; 7]> = vec![[
            "instance".into(),
            "method".into(),
            "objective".into(),
            "feasible".into(),
            "violation".into(),
            "ratio".into(),
            "wall_ms".into(),
        ]];
        for r in &self.records {
            rows.push([
                r.instance.clone(),
                r.method.to_string(),
                format!("{}", r.objective),
                r.feasible.to_string(),
                fmt_opt(r.violation, 6),
                fmt_opt(r.ratio, 4),
                format!("{:.1}", r.wall_ms),
            ]);
        }
        for a in &self.aggregates {
            rows.push([
                format!("mean (n={})", a.count),
                a.method.to_string(),
                format!("{:.4} ± {:.4}", a.mean, a.std),
                String::new(),
                String::new(),
                fmt_opt(a.mean_ratio, 4),
                String::new(),
            ]);
        }
        let widths: Vec<usize> = (0..7)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let line: Vec<String> = row.iter().zip(&widths).map(|(cell, &w)| format!("{cell:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

/// Per-method mean and population standard deviation of the objective.
pub fn aggregate(methods: &[Method], records: &[RunRecord]) -> Vec<Aggregate> {
    methods
        .iter()
        .filter_map(|&method| {
            let values: Vec<Real> = records.iter().filter(|r| r.method == method).map(|r| r.objective).collect();
            if values.is_empty() {
                return None;
            }
            let n = values.len() as Real;
            let mean = values.iter().sum::<Real>() / n;
            let std = (values.iter().map(|x| (x - mean).powi(2)).sum::<Real>() / n).sqrt();
            let ratios: Vec<Real> = records
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| r.ratio)
                .collect();
            let mean_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<Real>() / ratios.len() as Real);
            Some(Aggregate {
                method,
                count: values.len(),
                mean,
                std,
                mean_ratio,
            })
        })
        .collect()
}

pub fn config_echo(kind: ProblemKind, methods: &[Method], options: &RunOptions, rho: Option<Real>) -> ConfigEcho {
    ConfigEcho {
        problem: kind,
        methods: methods.to_vec(),
        rank: options.model.as_ref().map_or(options.rank, |m| m.rank()),
        iters: options.iters,
        step: match options.step {
            StepRule::Backtracking => "backtracking".into(),
            StepRule::Fixed(eta) => format!("fixed:{eta}"),
        },
        perturbed: options.perturbed,
        rho,
        hyperplanes: options.hyperplanes,
        seed: options.seed,
        model_layers: options.model.as_ref().map(|m| m.layers()),
    }
}

/// Runs every method on every instance. Brute force is skipped above
/// [`BRUTE_FORCE_LIMIT`] variables; when it runs, the other methods get a
/// ratio to its optimum. Records keep instance order.
pub fn bench(instances: &[(String, Problem)], methods: &[Method], options: &RunOptions, jobs: usize) -> Result<RunReport> {
    let kind = instances
        .first()
        .map(|(_, p)| p.kind())
        .ok_or_else(|| Error::InvalidArgument("no instances to benchmark".into()))?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods selected".into()));
    }
    for &m in methods {
        check_compatible(kind, m, options)?;
    }
    let run_all = || -> Result<Vec<Vec<RunRecord>>> {
        instances
            .par_iter()
            .map(|(id, problem)| {
                let mut recs = Vec::with_capacity(methods.len());
                for &m in methods {
                    if m == Method::Brute && problem.num_vars() > BRUTE_FORCE_LIMIT {
                        continue;
                    }
                    recs.push(run_method(id, problem, m, options)?.record);
                }
                if let Some(best) = recs.iter().find(|r| r.method == Method::Brute).map(|r| r.objective) {
                    for r in &mut recs {
                        r.ratio = Some(if best == 0.0 {
                            if r.objective == 0.0 { 1.0 } else { Real::INFINITY }
                        } else {
                            r.objective / best
                        });
                    }
                }
                Ok(recs)
            })
            .collect()
    };
    let per_instance = if jobs == 0 {
        run_all()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run_all)?
    };
    let rho = (kind != ProblemKind::MaxCut).then(|| instances[0].1.rho());
    Ok(RunReport::new(
        config_echo(kind, methods, options, rho),
        per_instance.into_iter().flatten().collect(),
    ))
}
