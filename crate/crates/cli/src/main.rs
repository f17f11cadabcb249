//! `tdcount`: exact and projected model counting on tree decompositions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde::Serialize;

use tdcount_core::counting_dp::{model_count, purge_marks, run_dp, DEFAULT_ROW_BUDGET};
use tdcount_core::decompose::{
    decompose, heuristic_order, make_nice, parse_pace, td_from_order, validate_td, Heuristic, TdError,
    TreeDecomposition,
};
use tdcount_core::dump::{dump_nested, dump_proj, dump_sat};
use tdcount_core::error::SolveError;
use tdcount_core::formula::{parse_dimacs, CnfFormula, PmcInstance, Var};
use tdcount_core::graphs::{nested_primal_graph, primal_graph, Graph};
use tdcount_core::hybrid::{count as hybrid_count, run_nested_hybrid, RunStats, SolverCommand, SolverConfig};
use tdcount_core::oracle::{brute_pmc, pmc_by_projection_enumeration};
use tdcount_core::projected_dp::run_proj;

#[derive(Parser, Debug)]
#[command(
    name = "tdcount",
    version,
    about = "Exact and projected model counting on tree decompositions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count all models over the declared variables.
    Count { file: PathBuf },
    /// Count models projected onto the `c p show` variables or `--project`.
    Pmc { file: PathBuf },
    /// Decompose the primal graph and print the decomposition; the width is the last line.
    Td { file: PathBuf },
    /// Brute-force reference count (enumerates the projection when the formula is too large).
    Oracle { file: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StatsFormat {
    Json,
    Text,
}

#[derive(Args, Debug)]
struct Opts {
    /// Seed for the decomposition heuristic's tie-breaking.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "min-fill")]
    heuristic: Heuristic,
    /// Default 8 for `pmc`, 38 for `count`.
    #[arg(long, global = true)]
    threshold_abstr: Option<usize>,
    #[arg(long, global = true, default_value_t = 2)]
    threshold_depth: usize,
    #[arg(long, global = true, default_value_t = 1000)]
    threshold_hybrid: usize,
    #[arg(long, global = true)]
    no_cache: bool,
    /// Run the plain SAT and PROJ passes on the primal graph.
    #[arg(long, global = true)]
    no_nesting: bool,
    /// Run one nested pass with these abstraction variables (space separated).
    #[arg(long, global = true, value_name = "VARS")]
    abstraction: Option<String>,
    #[arg(long, global = true, value_name = "CMD")]
    solver_sat: Option<String>,
    #[arg(long, global = true, value_name = "CMD")]
    solver_sharpsat: Option<String>,
    #[arg(long, global = true, value_name = "CMD")]
    solver_pmc: Option<String>,
    /// Seconds before an external solver is abandoned.
    #[arg(long, global = true, default_value_t = 300)]
    solver_timeout: u64,
    /// Fail with exit code 3 instead of falling back when an external solver fails.
    #[arg(long, global = true)]
    strict_solvers: bool,
    /// Print the DP tables before the count.
    #[arg(long, global = true)]
    emit_tables: bool,
    #[arg(long, global = true, value_enum)]
    stats: Option<StatsFormat>,
    /// Include wall time in the statistics.
    #[arg(long, global = true)]
    timing: bool,
    /// Use this PACE decomposition instead of a heuristic one.
    #[arg(long, global = true, value_name = "FILE.td")]
    td_in: Option<PathBuf>,
    /// Worker threads for subformula evaluation (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Projection variables (space separated), overriding `c p show` lines.
    #[arg(long, global = true, value_name = "VARS")]
    project: Option<String>,
    /// Maximum rows per DP table.
    #[arg(long, global = true, default_value_t = DEFAULT_ROW_BUDGET)]
    row_budget: usize,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::Solver(_) => 3,
            e if e.is_resource() => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<TdError> for Failure {
    fn from(e: TdError) -> Self {
        Failure::input(format!("decomposition: {e}"))
    }
}

/// JSON statistics written by `--stats json`.
#[derive(Debug, Serialize)]
struct RunReport {
    mode: &'static str,
    path: &'static str,
    /// Decimal count; null when the run failed.
    count: Option<String>,
    error: Option<String>,
    variables: usize,
    clauses: usize,
    projection: usize,
    stats: RunStats,
    wall_time_ms: Option<u64>,
}

struct Outcome {
    /// Printed before the final line.
    body: String,
    last: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.opts.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let start = Instant::now();
    let mut report = RunReport {
        mode: match cli.command {
            Command::Count { .. } => "count",
            Command::Pmc { .. } => "pmc",
            Command::Td { .. } => "td",
            Command::Oracle { .. } => "oracle",
        },
        path: "hybrid",
        count: None,
        error: None,
        variables: 0,
        clauses: 0,
        projection: 0,
        stats: RunStats::default(),
        wall_time_ms: None,
    };
    let result = run(&cli, &mut report);
    if cli.opts.timing {
        report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    let code = match &result {
        Ok(out) => {
            if report.mode != "td" {
                report.count = Some(out.last.clone());
            }
            0
        }
        Err(f) => {
            report.error = Some(f.message.clone());
            eprintln!("tdcount: {}", f.message);
            f.code
        }
    };
    if let Ok(out) = &result {
        print!("{}", out.body);
    }
    match cli.opts.stats {
        Some(StatsFormat::Json) => println!("{}", serde_json::to_string(&report).expect("report serializes")),
        Some(StatsFormat::Text) => print!("{}", text_report(&report)),
        None => {}
    }
    if let Ok(out) = &result {
        println!("{}", out.last);
    }
    ExitCode::from(code)
}

fn text_report(r: &RunReport) -> String {
    let s = &r.stats;
    let mut lines = vec![
        format!("mode: {}", r.mode),
        format!("path: {}", r.path),
        format!("variables: {}", r.variables),
        format!("clauses: {}", r.clauses),
        format!("projection: {}", r.projection),
        format!("widths: {:?}", s.widths),
        format!("nodes: {}", s.nodes),
        format!("table rows: {} (max {})", s.table_rows, s.max_table_rows),
        format!("max depth: {}", s.max_depth),
        format!("cache hits: {} misses: {}", s.cache_hits, s.cache_misses),
        format!(
            "calls: hybrid {} nested {} standard {} sat {} inline {} fallback {} external {} (failed {})",
            s.hyb_calls,
            s.nested_runs,
            s.standard_calls,
            s.sat_calls,
            s.inline_evals,
            s.fallback_calls,
            s.external_calls,
            s.external_failures
        ),
        format!("abstractions: {}", s.abstractions),
    ];
    if let Some(ms) = r.wall_time_ms {
        lines.push(format!("wall time: {ms} ms"));
    }
    lines.iter().map(|l| format!("c {l}\n")).collect()
}

fn parse_vars(text: &str, f: &CnfFormula, what: &str) -> Result<Vec<Var>, Failure> {
    let mut vs = Vec::new();
    for tok in text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
    {
        let v: Var = tok
            .parse()
            .map_err(|_| Failure::input(format!("{what}: `{tok}` is not a variable")))?;
        if f.universe().binary_search(&v).is_err() {
            return Err(Failure::input(format!("{what}: variable {v} is not declared")));
        }
        vs.push(v);
    }
    vs.sort_unstable();
    vs.dedup();
    Ok(vs)
}

fn load(path: &Path) -> Result<PmcInstance, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    parse_dimacs(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_td(path: &Path, g: &Graph) -> Result<TreeDecomposition, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let td = parse_pace(&text)?;
    let violations = validate_td(&td, g);
    if !violations.is_empty() {
        return Err(TdError::Invalid(violations).into());
    }
    Ok(td)
}

fn config(opts: &Opts, counting: bool) -> SolverConfig {
    let base = if counting {
        SolverConfig::count_defaults()
    } else {
        SolverConfig::pmc_defaults()
    };
    SolverConfig {
        threshold_hybrid: opts.threshold_hybrid,
        threshold_depth: opts.threshold_depth,
        threshold_abstr: opts.threshold_abstr.unwrap_or(base.threshold_abstr),
        heuristic: opts.heuristic,
        td_seed: opts.seed,
        row_budget: opts.row_budget,
        use_cache: !opts.no_cache,
        sat_cmd: opts.solver_sat.as_deref().and_then(SolverCommand::parse),
        sharpsat_cmd: opts.solver_sharpsat.as_deref().and_then(SolverCommand::parse),
        pmc_cmd: opts.solver_pmc.as_deref().and_then(SolverCommand::parse),
        solver_timeout: Duration::from_secs(opts.solver_timeout),
        strict_solvers: opts.strict_solvers,
        parallel: opts.jobs != Some(1),
        ..base
    }
}

fn run(cli: &Cli, report: &mut RunReport) -> Result<Outcome, Failure> {
    let opts = &cli.opts;
    let (file, counting) = match &cli.command {
        Command::Count { file } => (file, true),
        Command::Pmc { file } => (file, false),
        Command::Td { file } => return run_td(file, opts, report),
        Command::Oracle { file } => (file, false),
    };
    let inst = load(file)?;
    let f = &inst.formula;
    let p = if counting {
        f.universe().to_vec()
    } else {
        match &opts.project {
            Some(text) => parse_vars(text, f, "--project")?,
            None => inst.projection.clone(),
        }
    };
    report.variables = f.universe().len();
    report.clauses = f.num_clauses();
    report.projection = p.len();
    if let Command::Oracle { .. } = cli.command {
        report.path = "oracle";
        let c = brute_pmc(f, &p)
            .or_else(|_| pmc_by_projection_enumeration(f, &p))
            .map_err(SolveError::from)?;
        return Ok(Outcome {
            body: String::new(),
            last: c.to_string(),
        });
    }
    let mut body = String::new();
    let cfg = config(opts, counting);
    let count: BigUint = if opts.no_nesting {
        report.path = "plain";
        let g = primal_graph(f);
        let td = match &opts.td_in {
            Some(path) => make_nice(&load_td(path, &g)?)?,
            None => decompose(&g, opts.heuristic, opts.seed),
        };
        report.stats.widths.push(td.width());
        report.stats.nodes = td.num_nodes() as u64;
        if counting {
            if opts.emit_tables {
                let tables = run_dp(f, &td, true, opts.row_budget).map_err(SolveError::from)?;
                let marks = purge_marks(&tables, &td);
                record_rows(&mut report.stats, tables.iter().flatten().map(|t| t.rows.len()));
                body.push_str(&dump_sat(&td, &tables, Some(&marks)));
            }
            model_count(f, &td, opts.row_budget).map_err(SolveError::from)?
        } else {
            let run = run_proj(f, &p, &td, opts.row_budget, opts.emit_tables).map_err(SolveError::from)?;
            if opts.emit_tables {
                let sat = run.sat.iter().flatten().map(|t| t.rows.len());
                record_rows(
                    &mut report.stats,
                    sat.chain(run.proj.iter().flatten().map(|t| t.num_rows())),
                );
                body.push_str(&dump_sat(&td, &run.sat, Some(&run.marks)));
                body.push_str(&dump_proj(&td, &run.purged, &run.proj));
            }
            run.count
        }
    } else if opts.abstraction.is_some() || opts.td_in.is_some() {
        report.path = "nested";
        let a = match &opts.abstraction {
            Some(text) => parse_vars(text, f, "--abstraction")?,
            None => p
                .iter()
                .copied()
                .filter(|v| f.vars().binary_search(v).is_ok())
                .collect(),
        };
        let g = nested_primal_graph(f, &a).map_err(SolveError::from)?;
        let td = match &opts.td_in {
            Some(path) => load_td(path, &g)?,
            None => td_from_order(&g, &heuristic_order(&g, opts.heuristic, opts.seed)),
        };
        let (run, stats) = run_nested_hybrid(f, &p, &a, &td, &cfg)?;
        report.stats = stats;
        if opts.emit_tables {
            body.push_str(&dump_nested(&td, &run.tables));
        }
        run.count
    } else {
        let (c, stats) = hybrid_count(f, &p, &cfg)?;
        report.stats = stats;
        c
    };
    Ok(Outcome {
        body,
        last: count.to_string(),
    })
}

fn record_rows(stats: &mut RunStats, rows: impl Iterator<Item = usize>) {
    for r in rows {
        stats.table_rows += r as u64;
        stats.max_table_rows = stats.max_table_rows.max(r);
    }
}

fn run_td(file: &Path, opts: &Opts, report: &mut RunReport) -> Result<Outcome, Failure> {
    report.path = "decompose";
    let inst = load(file)?;
    let f = &inst.formula;
    report.variables = f.universe().len();
    report.clauses = f.num_clauses();
    let g = primal_graph(f);
    let td = match &opts.td_in {
        Some(path) => make_nice(&load_td(path, &g)?)?,
        None => decompose(&g, opts.heuristic, opts.seed),
    };
    report.stats.widths.push(td.width());
    report.stats.nodes = td.num_nodes() as u64;
    let max_var = f.universe().last().copied().unwrap_or(0) as usize;
    Ok(Outcome {
        body: td.to_pace(max_var),
        last: td.width().to_string(),
    })
}
