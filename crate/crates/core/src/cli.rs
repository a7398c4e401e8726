//! Command-line front end: run configuration, the `solve`, `convergence` and
//! `bench` commands, and their output formats.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::HpsError;
use crate::geometry::{build_tree, uniform_node_count};
use crate::problem::{catalogue, ManufacturedCase, Params};
use crate::solver::{
    build, estimate_memory, evaluate_at, solve, BuildOptions, MemoryPolicy, OperatorCache, Solution,
};

/// Fixed header of every CSV table.
pub const CSV_HEADER: &str = "N,q,L,build_s,solve_s,err_gauss,err_random";

/// Number of random evaluation points per run.
pub const RANDOM_POINTS: usize = 100;

/// Side of the uniform lattice written to the field dump.
pub const LATTICE_SIDE: usize = 33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: String,
    pub params: Params,
    pub leaves_x: usize,
    pub leaves_y: usize,
    pub q: usize,
    /// Chebyshev points per leaf side; `q + 1` when absent.
    pub p: Option<usize>,
    pub body: bool,
    pub memory: MemoryPolicy,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Refuse runs whose operator estimate exceeds this many bytes.
    pub memory_cap_bytes: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: "laplace_harmonic".into(),
            params: Params::new(),
            leaves_x: 4,
            leaves_y: 4,
            q: 16,
            p: None,
            body: false,
            memory: MemoryPolicy::Many,
            out: None,
            seed: 0,
            threads: None,
            memory_cap_bytes: None,
        }
    }
}

impl RunConfig {
    pub fn p(&self) -> usize {
        self.p.unwrap_or(self.q + 1)
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions::for_q(self.q)
            .p(self.p())
            .with_body(self.body)
            .memory(self.memory)
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<ManufacturedCase, CliError> {
        let case = catalogue(&self.case, &self.params)
            .map_err(|e| CliError::config("case", e.to_string()))?;
        for (field, v) in [("leaves_x", self.leaves_x), ("leaves_y", self.leaves_y)] {
            if v == 0 || !v.is_power_of_two() {
                return Err(CliError::config(
                    field,
                    format!("{v} is not a positive power of two"),
                ));
            }
        }
        if self.q < 2 {
            return Err(CliError::config(
                "q",
                format!("{} is below the minimum of 2", self.q),
            ));
        }
        if self.p() < 4 {
            return Err(CliError::config(
                "p",
                format!("{} is below the minimum of 4", self.p()),
            ));
        }
        if let Some(dir) = &self.out {
            if !dir.is_dir() {
                return Err(CliError::config(
                    "out",
                    format!("directory {} does not exist", dir.display()),
                ));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        Ok(case)
    }
}

/// Failure of a command, mapped onto the process exit status.
#[derive(Debug)]
pub enum CliError {
    Config { field: String, message: String },
    Solver(HpsError),
    Resource { needed: u64, cap: u64 },
    Io(String),
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
            CliError::Resource { .. } => 4,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config-invalid",
            CliError::Solver(e) => e.code(),
            CliError::Resource { .. } => "memory-cap-exceeded",
            CliError::Io(_) => "io-error",
        }
    }
}

impl fmt::Display for CliError {
    /// Single line: machine-parsable code, then context.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, message } => {
                write!(f, "{}: field `{field}`: {message}", self.code())
            }
            CliError::Solver(e) => write!(f, "{}: {e}", self.code()),
            CliError::Resource { needed, cap } => write!(
                f,
                "{}: operators need an estimated {needed} bytes, cap is {cap}",
                self.code()
            ),
            CliError::Io(msg) => write!(f, "{}: {msg}", self.code()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<HpsError> for CliError {
    fn from(e: HpsError) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub build_seconds: f64,
    pub solve_seconds: f64,
    /// Max error at the Gauss nodes, relative to the exact solution's max.
    pub max_error_gauss: f64,
    /// Same, over random interior points.
    pub max_error_random_points: f64,
    pub memory_bytes_estimate: u64,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e}",
            self.n,
            self.q,
            self.l,
            self.build_seconds,
            self.solve_seconds,
            self.max_error_gauss,
            self.max_error_random_points
        )
    }
}

/// Result of one configured run, with everything needed for output.
pub struct RunOutcome {
    pub row: ReportRow,
    pub case: ManufacturedCase,
    pub cache: OperatorCache,
    pub solution: Solution,
}

/// Uniform random points in the domain, reproducible from `seed`.
pub fn random_points(case: &ManufacturedCase, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let d = case.problem.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.gen_range(d.x0..d.x1), rng.gen_range(d.y0..d.y1)])
        .collect()
}

fn check_memory(cfg: &RunConfig, estimate: u64) -> Result<(), CliError> {
    match cfg.memory_cap_bytes {
        Some(cap) if estimate > cap => Err(CliError::Resource {
            needed: estimate,
            cap,
        }),
        _ => Ok(()),
    }
}

/// Builds and solves the configured case, timing each stage `repeats` times
/// and keeping the fastest.
pub fn run_case(cfg: &RunConfig, repeats: usize) -> Result<RunOutcome, CliError> {
    let case = cfg.validate()?;
    let opts = cfg.build_options();
    let (tree, grid) = build_tree(case.problem.domain, cfg.leaves_x, cfg.leaves_y, cfg.q)?;
    let estimate = estimate_memory(&tree, &opts) as u64;
    check_memory(cfg, estimate)?;

    let mut build_seconds = f64::INFINITY;
    let mut cache = None;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        let c = build(&case.problem, tree.clone(), grid.clone(), opts)?;
        build_seconds = build_seconds.min(t0.elapsed().as_secs_f64());
        cache = Some(c);
    }
    let cache = cache.expect("at least one build");

    let mut solve_seconds = f64::INFINITY;
    let mut solution = None;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        let s = solve(&cache, &case.problem.f, &case.problem.g)?;
        solve_seconds = solve_seconds.min(t0.elapsed().as_secs_f64());
        solution = Some(s);
    }
    let solution = solution.expect("at least one solve");

    let mut scale: f64 = 0.0;
    let mut err_gauss: f64 = 0.0;
    for (k, &[x, y]) in cache.grid().points().iter().enumerate() {
        let exact = case.exact_value(x, y);
        scale = scale.max(exact.abs());
        err_gauss = err_gauss.max((solution.u[k] - exact).abs());
    }
    let points = random_points(&case, RANDOM_POINTS, cfg.seed);
    let values = evaluate_at(&cache, &solution, &points)?;
    let err_random = points
        .iter()
        .zip(&values)
        .map(|(&[x, y], v)| (v - case.exact_value(x, y)).abs())
        .fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let row = ReportRow {
        n: cache.grid().len(),
        q: cfg.q,
        l: cache.tree().depth_l(),
        build_seconds,
        solve_seconds,
        max_error_gauss: err_gauss / scale,
        max_error_random_points: err_random / scale,
        memory_bytes_estimate: estimate,
    };
    Ok(RunOutcome {
        row,
        case,
        cache,
        solution,
    })
}

/// `x,y,u` lines: Gauss nodes first, then a uniform lattice.
pub fn field_dump(outcome: &RunOutcome) -> Result<String, CliError> {
    let mut s = String::from("x,y,u\n");
    for (&[x, y], u) in outcome
        .cache
        .grid()
        .points()
        .iter()
        .zip(&outcome.solution.u)
    {
        s.push_str(&format!("{x:.16e},{y:.16e},{u:.16e}\n"));
    }
    let d = outcome.case.problem.domain;
    let n = LATTICE_SIDE;
    let lattice: Vec<[f64; 2]> = (0..n * n)
        .map(|i| {
            let (ix, iy) = (i % n, i / n);
            [
                d.x0 + d.width() * ix as f64 / (n - 1) as f64,
                d.y0 + d.height() * iy as f64 / (n - 1) as f64,
            ]
        })
        .collect();
    let values = evaluate_at(&outcome.cache, &outcome.solution, &lattice)?;
    for ([x, y], u) in lattice.iter().zip(values) {
        s.push_str(&format!("{x:.16e},{y:.16e},{u:.16e}\n"));
    }
    Ok(s)
}

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    case: &'a str,
    params: &'a Params,
    leaves_x: usize,
    leaves_y: usize,
    p: usize,
    body: bool,
    memory: MemoryPolicy,
    level_seconds: &'a [f64],
    memory_bytes: usize,
    row: &'a ReportRow,
}

/// `solve`: one run, field dump and JSON report.
pub fn cmd_solve(cfg: &RunConfig) -> Result<ReportRow, CliError> {
    let outcome = run_case(cfg, 1)?;
    if let Some(dir) = &cfg.out {
        fs::write(dir.join("field.txt"), field_dump(&outcome)?)?;
        let stats = outcome.cache.stats();
        let report = SolveReport {
            case: &cfg.case,
            params: &cfg.params,
            leaves_x: cfg.leaves_x,
            leaves_y: cfg.leaves_y,
            p: cfg.p(),
            body: cfg.body,
            memory: cfg.memory,
            level_seconds: &stats.level_seconds,
            memory_bytes: stats.memory_bytes,
            row: &outcome.row,
        };
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join("report.json"), json + "\n")?;
    }
    Ok(outcome.row)
}

/// One table row: a finished run or a failure marker.
#[derive(Debug)]
pub enum TableRow {
    Done(ReportRow),
    Failed {
        n: usize,
        q: usize,
        l: usize,
        error: String,
    },
}

impl TableRow {
    pub fn csv_line(&self) -> String {
        match self {
            TableRow::Done(r) => r.csv_line(),
            TableRow::Failed { n, q, l, .. } => format!("{n},{q},{l},failed,failed,failed,failed"),
        }
    }

    pub fn row(&self) -> Option<&ReportRow> {
        match self {
            TableRow::Done(r) => Some(r),
            TableRow::Failed { .. } => None,
        }
    }
}

pub fn csv_table(rows: &[TableRow]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

fn check_ascending(field: &str, list: &[usize]) -> Result<(), CliError> {
    if list.is_empty() {
        return Err(CliError::config(field, "list is empty"));
    }
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::config(field, "list must be strictly ascending"));
    }
    Ok(())
}

fn failed_row(cfg: &RunConfig, error: &CliError) -> TableRow {
    let l = cfg.leaves_x.max(cfg.leaves_y).trailing_zeros() as usize;
    let n = cfg.q * (cfg.leaves_x * (cfg.leaves_y + 1) + cfg.leaves_y * (cfg.leaves_x + 1));
    TableRow::Failed {
        n,
        q: cfg.q,
        l,
        error: error.to_string(),
    }
}

/// `convergence`: one row per `q` at a fixed leaf grid. Solver failures mark
/// the row and the sweep continues.
pub fn cmd_convergence(cfg: &RunConfig, q_list: &[usize]) -> Result<Vec<TableRow>, CliError> {
    check_ascending("q_list", q_list)?;
    let mut rows = Vec::with_capacity(q_list.len());
    for &q in q_list {
        let c = RunConfig { q, ..cfg.clone() };
        match run_case(&c, 1) {
            Ok(o) => rows.push(TableRow::Done(o.row)),
            Err(e @ CliError::Solver(_)) => {
                log::warn!("q = {q}: {e}");
                rows.push(failed_row(&c, &e));
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(dir) = &cfg.out {
        fs::write(dir.join("convergence.csv"), csv_table(&rows))?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub build_slope: Option<f64>,
    pub solve_slope: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Repeats per timed stage: up to three at small sizes.
fn repeats_for(n: usize) -> usize {
    if n <= 20_000 {
        3
    } else {
        1
    }
}

/// `bench`: `2^L x 2^L` leaves per level in `levels`, timing build and solve
/// and fitting log-log slopes against `N`.
pub fn cmd_bench(
    cfg: &RunConfig,
    levels: &[usize],
) -> Result<(Vec<TableRow>, BenchSummary), CliError> {
    check_ascending("levels", levels)?;
    let mut rows = Vec::with_capacity(levels.len());
    for &l in levels {
        let side = 1usize << l;
        let c = RunConfig {
            leaves_x: side,
            leaves_y: side,
            ..cfg.clone()
        };
        match run_case(&c, repeats_for(uniform_node_count(l, cfg.q))) {
            Ok(o) => rows.push(TableRow::Done(o.row)),
            Err(e @ CliError::Resource { .. }) => {
                eprintln!("notice: skipping L = {l}: {e}");
            }
            Err(e @ CliError::Solver(_)) => {
                log::warn!("L = {l}: {e}");
                rows.push(failed_row(&c, &e));
            }
            Err(e) => return Err(e),
        }
    }
    let done: Vec<&ReportRow> = rows.iter().filter_map(TableRow::row).collect();
    let ns: Vec<f64> = done.iter().map(|r| r.n as f64).collect();
    let summary = BenchSummary {
        build_slope: loglog_slope(
            &ns,
            &done.iter().map(|r| r.build_seconds).collect::<Vec<_>>(),
        ),
        solve_slope: loglog_slope(
            &ns,
            &done.iter().map(|r| r.solve_seconds).collect::<Vec<_>>(),
        ),
    };
    if let Some(dir) = &cfg.out {
        fs::write(dir.join("bench.csv"), csv_table(&rows))?;
        let json =
            serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join("bench_summary.json"), json + "\n")?;
    }
    Ok((rows, summary))
}

/// Restricts dense kernels and tree sweeps to `threads` workers and runs `f`.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    let Some(n) = threads else {
        return Ok(f());
    };
    let par = if n == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(n)
    };
    faer::set_global_parallelism(par);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    Ok(pool.install(f))
}

#[derive(Debug, Parser)]
#[command(
    name = "hps",
    version,
    about = "Direct solver for elliptic boundary value problems on rectangles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one case; writes field.txt and report.json into --out.
    Solve {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Error table over a list of q at a fixed leaf grid.
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        q_list: Vec<usize>,
    },
    /// Build and solve timings over tree depths, with fitted slopes.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "levels", value_delimiter = ',', num_args = 1.., required = true)]
        levels: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with a full run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub case: Option<String>,
    /// Case parameter, `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    pub leaves: Option<Vec<usize>>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Build body-load operators.
    #[arg(long)]
    pub body: bool,
    #[arg(long, value_parser = parse_memory)]
    pub memory: Option<MemoryPolicy>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Operator memory cap in MiB.
    #[arg(long)]
    pub memory_cap_mb: Option<u64>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_memory(s: &str) -> Result<MemoryPolicy, String> {
    match s {
        "many" => Ok(MemoryPolicy::Many),
        "minimal" => Ok(MemoryPolicy::Minimal),
        _ => Err(format!("expected `many` or `minimal`, got `{s}`")),
    }
}

impl RunArgs {
    /// Config file (if any) overlaid with explicit flags.
    pub fn to_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(case) = &self.case {
            cfg.case = case.clone();
        }
        for (k, v) in &self.params {
            cfg.params.insert(k.clone(), *v);
        }
        if let Some(l) = &self.leaves {
            cfg.leaves_x = l[0];
            cfg.leaves_y = l[1];
        }
        if let Some(q) = self.q {
            cfg.q = q;
        }
        if self.p.is_some() {
            cfg.p = self.p;
        }
        if self.body {
            cfg.body = true;
        }
        if let Some(m) = self.memory {
            cfg.memory = m;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(mb) = self.memory_cap_mb {
            cfg.memory_cap_bytes = Some(mb << 20);
        }
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
}

/// Runs a parsed command, writing tables to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let run_args = match &cli.command {
        Command::Solve { run } | Command::Convergence { run, .. } | Command::Bench { run, .. } => {
            run
        }
    };
    let cfg = run_args.to_config()?;
    cfg.validate()?;
    with_threads(cfg.threads, move || {
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        match &cli.command {
            Command::Solve { .. } => {
                let row = cmd_solve(&cfg)?;
                writeln!(out, "{CSV_HEADER}\n{}", row.csv_line())?;
            }
            Command::Convergence { q_list, .. } => {
                let rows = cmd_convergence(&cfg, q_list)?;
                write!(out, "{}", csv_table(&rows))?;
            }
            Command::Bench { levels, .. } => {
                let (rows, summary) = cmd_bench(&cfg, levels)?;
                write!(out, "{}", csv_table(&rows))?;
                let json =
                    serde_json::to_string(&summary).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(out, "{json}")?;
            }
        }
        Ok(())
    })?
}
