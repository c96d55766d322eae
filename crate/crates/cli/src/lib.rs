//! Command-line front end for `maxcsp`.
//!
//! Exit codes: 0 on success, 1 on runtime or numeric failure, 2 on usage or
//! input errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxcsp::certify::{maxcut_certificate_with, CertifyOptions};
use maxcsp::instances::{gen_ba, gen_er, gen_hk, gen_random_3sat, gen_ws, parse_edge_list, serialize_dimacs, serialize_edge_list};
use maxcsp::lagrangian::ProblemKind;
use maxcsp::optgnn::{default_rho, train, Distribution};
use maxcsp::pipeline::{self, bench, config_echo, load_problem, run_method, Method, RunOptions, RunReport};
use maxcsp::rng::tags;
use maxcsp::solver::{trace_jsonl, StepRule};
use maxcsp::{Embedding, Error, Graph, Model, Problem, Real, Rng, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "maxcsp", version, about = "Low-rank SDP solvers for Max-Cut, vertex cover and Max-3-SAT")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate random instances.
    Gen(GenArgs),
    /// Solve one instance and print a run report.
    Solve(SolveArgs),
    /// Compute a Max-Cut upper bound from embeddings.
    Certify(CertifyArgs),
    /// Train an OptGNN model.
    Train(TrainArgs),
    /// Compare methods over a directory of instances.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenModel {
    Er,
    Ba,
    Ws,
    Hk,
    #[value(name = "3sat")]
    Sat,
}

#[derive(Args, Debug)]
struct GenArgs {
    model: GenModel,
    /// Number of nodes.
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability (er), rewiring probability (ws) or triad probability (hk).
    #[arg(long)]
    p: Option<f64>,
    /// Edges per new node (ba, hk).
    #[arg(long)]
    m: Option<usize>,
    /// Ring degree (ws).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    vars: Option<usize>,
    #[arg(long)]
    clauses: Option<usize>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = pipeline::DEFAULT_RANK)]
    rank: usize,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Fixed step size; backtracking line search when omitted.
    #[arg(long)]
    eta: Option<Real>,
    /// Enable Gaussian perturbation when progress stalls.
    #[arg(long)]
    perturbed: bool,
    #[arg(long)]
    rho: Option<Real>,
    #[arg(long, default_value_t = pipeline::DEFAULT_HYPERPLANES)]
    hyperplanes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report zero wall times so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

impl SolverFlags {
    fn options(&self, model: Option<Model>) -> RunOptions {
        RunOptions {
            rank: self.rank,
            iters: self.iters,
            step: self.eta.map_or(StepRule::Backtracking, StepRule::Fixed),
            perturbed: self.perturbed,
            hyperplanes: self.hyperplanes,
            seed: self.seed,
            model,
            timing: !self.no_timing,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(value_parser = parse_kind)]
    problem: ProblemKind,
    instance: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    /// Use a trained model's forward pass instead of the solver.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the final embedding as JSON.
    #[arg(long)]
    embedding_out: Option<PathBuf>,
    /// Write the solver trace as JSON lines.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    graph: PathBuf,
    /// Embedding JSON `{rows, rank, data}`.
    #[arg(required_unless_present = "solve_first")]
    embeddings: Option<PathBuf>,
    /// Solve and round first, then report cut, bound and gap.
    #[arg(long)]
    solve_first: bool,
    #[arg(long, default_value_t = maxcsp::certify::DEFAULT_DUAL_FACTOR)]
    dual_factor: Real,
    #[command(flatten)]
    flags: SolverFlags,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(value_parser = parse_kind)]
    problem: ProblemKind,
    /// Erdős–Rényi graphs: N_MIN N_MAX P.
    #[arg(long, num_args = 3, value_names = ["N_MIN", "N_MAX", "P"], group = "dist")]
    er: Option<Vec<String>>,
    /// Barabási–Albert graphs: N_MIN N_MAX M.
    #[arg(long, num_args = 3, value_names = ["N_MIN", "N_MAX", "M"], group = "dist")]
    ba: Option<Vec<String>>,
    /// Watts–Strogatz graphs: N_MIN N_MAX K P.
    #[arg(long, num_args = 4, value_names = ["N_MIN", "N_MAX", "K", "P"], group = "dist")]
    ws: Option<Vec<String>>,
    /// Holme–Kim graphs: N_MIN N_MAX M P.
    #[arg(long, num_args = 4, value_names = ["N_MIN", "N_MAX", "M", "P"], group = "dist")]
    hk: Option<Vec<String>>,
    /// Random 3-SAT: VARS CLAUSES.
    #[arg(long, num_args = 2, value_names = ["VARS", "CLAUSES"], group = "dist")]
    sat: Option<Vec<String>>,
    #[arg(long, default_value_t = 8)]
    rank: usize,
    #[arg(long, default_value_t = 8)]
    layers: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: Real,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    val_every: usize,
    #[arg(long, default_value_t = 32)]
    val_size: usize,
    #[arg(long)]
    rho: Option<Real>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// History JSON lines; defaults to `<out>.history.jsonl`.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(value_parser = parse_kind)]
    problem: ProblemKind,
    dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "pgd,greedy", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    flags: SolverFlags,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also print the aligned text table to stderr.
    #[arg(long)]
    table: bool,
}

fn parse_kind(s: &str) -> Result<ProblemKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInstance(_)
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::UnsupportedArity { .. }
            | Error::Shape(_)
            | Error::TooLarge { .. }
            | Error::Checkpoint(_) => 2,
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_problem(kind: ProblemKind, path: &Path, rho: Option<Real>) -> CliResult<Problem> {
    load_problem(kind, path, rho).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_model(path: &Path) -> CliResult<Model> {
    Model::load(path).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn need<T>(value: Option<T>, flag: &str, model: &str) -> CliResult<T> {
    value.ok_or_else(|| Failure::usage(format!("gen {model} needs --{flag}")))
}

fn cmd_gen(args: GenArgs, out: &mut dyn Write) -> CliResult<()> {
    std::fs::create_dir_all(&args.out).map_err(Error::from)?;
    let base = Rng::new(args.seed).split(tags::DATA);
    let name = match args.model {
        GenModel::Er => "er",
        GenModel::Ba => "ba",
        GenModel::Ws => "ws",
        GenModel::Hk => "hk",
        GenModel::Sat => "3sat",
    };
    for i in 0..args.count {
        let mut rng = base.split(i as u64);
        let (text, ext) = match args.model {
            GenModel::Sat => {
                let vars = need(args.vars, "vars", name)?;
                let clauses = need(args.clauses, "clauses", name)?;
                (serialize_dimacs(&gen_random_3sat(vars, clauses, &mut rng)?), "cnf")
            }
            model => {
                let n = need(args.n, "n", name)?;
                let g: Graph = match model {
                    GenModel::Er => gen_er(n, need(args.p, "p", name)?, &mut rng)?,
                    GenModel::Ba => gen_ba(n, need(args.m, "m", name)?, &mut rng)?,
                    GenModel::Ws => gen_ws(n, need(args.k, "k", name)?, need(args.p, "p", name)?, &mut rng)?,
                    GenModel::Hk => gen_hk(n, need(args.m, "m", name)?, need(args.p, "p", name)?, &mut rng)?,
                    GenModel::Sat => unreachable!(),
                };
                (serialize_edge_list(&g), "txt")
            }
        };
        let path = args.out.join(format!("{name}_{i:04}.{ext}"));
        std::fs::write(&path, text).map_err(Error::from)?;
        writeln!(out, "{}", path.display()).map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs, out: &mut dyn Write) -> CliResult<()> {
    let problem = read_problem(args.problem, &args.instance, args.flags.rho)?;
    let model = args.model.as_deref().map(load_model).transpose()?;
    let method = if model.is_some() { Method::Model } else { Method::Pgd };
    let options = args.flags.options(model);
    let outcome = run_method(&instance_id(&args.instance), &problem, method, &options).map_err(|e| match e {
        Error::InvalidInstance(msg) => Failure { code: 1, message: msg },
        other => other.into(),
    })?;
    if let (Some(path), Some(v)) = (&args.embedding_out, &outcome.embedding) {
        std::fs::write(path, v.to_json()).map_err(Error::from)?;
    }
    if let Some(path) = &args.trace_out {
        std::fs::write(path, trace_jsonl(&outcome.trace)).map_err(Error::from)?;
    }
    let rho = (args.problem != ProblemKind::MaxCut).then(|| problem.rho());
    let report = RunReport::new(config_echo(args.problem, &[method], &options, rho), vec![outcome.record]);
    writeln!(out, "{}", report.to_json()).map_err(Error::from)?;
    Ok(())
}

fn cmd_certify(args: CertifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.graph).map_err(Error::from)?;
    let graph: Graph = parse_edge_list(&text)?;
    let options = CertifyOptions {
        dual_factor: args.dual_factor,
        ..Default::default()
    };
    let mut json: serde_json::Value;
    if args.solve_first {
        let problem = Problem::max_cut(graph.clone());
        let outcome = run_method(&instance_id(&args.graph), &problem, Method::Pgd, &args.flags.options(None))?;
        let v = outcome.embedding.expect("pgd returns an embedding");
        let cert = maxcut_certificate_with(&graph, &v, &options)?;
        let cut = outcome.record.objective;
        if cert.bound < cut {
            return Err(Failure {
                code: 1,
                message: format!("certificate {} is below the cut {cut}", cert.bound),
            });
        }
        json = serde_json::from_str(&cert.to_json(!args.flags.no_timing)).expect("valid json");
        json["best_cut"] = cut.into();
        json["gap"] = (if cut > 0.0 { (cert.bound - cut) / cut } else { cert.bound }).into();
    } else {
        let path = args.embeddings.expect("required unless --solve-first");
        let text = std::fs::read_to_string(&path).map_err(|e| {
            let mut f = Failure::from(Error::from(e));
            f.code = 2;
            f.message = format!("{}: {}", path.display(), f.message);
            f
        })?;
        let v = Embedding::from_json(&text)?;
        let cert = maxcut_certificate_with(&graph, &v, &options)?;
        json = serde_json::from_str(&cert.to_json(!args.flags.no_timing)).expect("valid json");
    }
    writeln!(out, "{json}").map_err(Error::from)?;
    Ok(())
}

fn nums<T: std::str::FromStr>(values: &[String], flag: &str) -> CliResult<Vec<T>> {
    values
        .iter()
        .map(|v| v.parse().map_err(|_| Failure::usage(format!("--{flag}: cannot parse {v:?}"))))
        .collect()
}

fn distribution(args: &TrainArgs) -> CliResult<Distribution> {
    if let Some(v) = &args.er {
        let n: Vec<usize> = nums(&v[..2], "er")?;
        return Ok(Distribution::Er { n_min: n[0], n_max: n[1], p: nums(&v[2..], "er")?[0] });
    }
    if let Some(v) = &args.ba {
        let n: Vec<usize> = nums(v, "ba")?;
        return Ok(Distribution::Ba { n_min: n[0], n_max: n[1], m: n[2] });
    }
    if let Some(v) = &args.ws {
        let n: Vec<usize> = nums(&v[..3], "ws")?;
        return Ok(Distribution::Ws { n_min: n[0], n_max: n[1], k: n[2], p: nums(&v[3..], "ws")?[0] });
    }
    if let Some(v) = &args.hk {
        let n: Vec<usize> = nums(&v[..3], "hk")?;
        return Ok(Distribution::Hk { n_min: n[0], n_max: n[1], m: n[2], p: nums(&v[3..], "hk")?[0] });
    }
    if let Some(v) = &args.sat {
        let n: Vec<usize> = nums(v, "sat")?;
        return Ok(Distribution::Sat { vars: n[0], clauses: n[1] });
    }
    Err(Failure::usage("train needs one of --er, --ba, --ws, --hk, --sat"))
}

fn cmd_train(args: TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let config = TrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        steps: args.steps,
        val_every: args.val_every,
        val_size: args.val_size,
        distribution: distribution(&args)?,
        kind: args.problem,
        rho: args.rho.unwrap_or_else(|| default_rho(args.problem)),
        seed: args.seed,
    };
    let model = Model::init(args.rank, args.layers, args.seed)?;
    let outcome = train(&model, &config)?;
    outcome.model.save(&args.out)?;
    let history = args.history.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".history.jsonl");
        PathBuf::from(p)
    });
    std::fs::write(&history, outcome.history_jsonl()).map_err(Error::from)?;
    let summary = serde_json::json!({
        "checkpoint": args.out.display().to_string(),
        "history": history.display().to_string(),
        "best_step": outcome.best_step,
        "best_score": outcome.best_score,
        "steps": config.steps,
    });
    writeln!(out, "{summary}").map_err(Error::from)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::usage(format!("{}: no instance files", args.dir.display())));
    }
    let instances = files
        .iter()
        .map(|p| Ok((instance_id(p), read_problem(args.problem, p, args.flags.rho)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let model = args.model.as_deref().map(load_model).transpose()?;
    let report = bench(&instances, &args.methods, &args.flags.options(model), args.jobs)?;
    writeln!(out, "{}", report.to_json()).map_err(Error::from)?;
    if args.table {
        write!(err, "{}", report.to_table()).map_err(Error::from)?;
    }
    Ok(())
}

/// Parses `argv` and runs the selected command, returning the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{}", e.render());
            return 2;
        }
        Err(e) => {
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Certify(a) => cmd_certify(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Bench(a) => cmd_bench(a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
