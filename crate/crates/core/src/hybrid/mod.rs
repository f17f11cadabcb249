//! Hybrid solving: preprocessing, caching, and dispatch between nested DP and standard
//! solvers.

pub mod cache;
pub mod external;
pub mod fallback;

use std::collections::{BTreeSet, HashMap};
use std::time::Duration;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::counting_dp::{DEFAULT_ROW_BUDGET, MAX_BAG};
use crate::decompose::{heuristic_order, td_from_order, Heuristic, TreeDecomposition};
use crate::error::SolveError;
use crate::formula::{canonical_instance_key, unit_propagate, CnfFormula, PropagationStatus, Var};
use crate::graphs::{nested_primal_graph, primal_graph, Graph};
use crate::nested_dp::{run_nested_dp, CompatTieBreak, NestedRun, SubJob};

pub use cache::{LruCache, Scope};
pub use external::{external_solver_call, SolverCommand, SolverFailure, SolverKind};
pub use fallback::{internal_fallback_count, internal_fallback_count_budgeted, internal_sat};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub threshold_hybrid: usize,
    pub threshold_depth: usize,
    /// `usize::MAX` disables abstraction by width.
    pub threshold_abstr: usize,
    pub max_abstraction_size: usize,
    /// Subformulas with at most this many variables are counted in-process instead of
    /// recursing.
    pub inline_eval_vars: usize,
    pub heuristic: Heuristic,
    pub td_seed: u64,
    pub row_budget: usize,
    pub use_cache: bool,
    pub cache_capacity: usize,
    pub sat_cmd: Option<SolverCommand>,
    pub sharpsat_cmd: Option<SolverCommand>,
    pub pmc_cmd: Option<SolverCommand>,
    pub solver_timeout: Duration,
    /// Report external solver failures instead of falling back.
    pub strict_solvers: bool,
    pub fallback_decisions: u64,
    pub parallel: bool,
}

impl SolverConfig {
    pub fn pmc_defaults() -> Self {
        SolverConfig {
            threshold_hybrid: 1000,
            threshold_depth: 2,
            threshold_abstr: 8,
            max_abstraction_size: 64,
            inline_eval_vars: 40,
            heuristic: Heuristic::MinFill,
            td_seed: 0,
            row_budget: DEFAULT_ROW_BUDGET,
            use_cache: true,
            cache_capacity: 1 << 16,
            sat_cmd: None,
            sharpsat_cmd: None,
            pmc_cmd: None,
            solver_timeout: Duration::from_secs(300),
            strict_solvers: false,
            fallback_decisions: fallback::DEFAULT_DECISIONS,
            parallel: true,
        }
    }

    pub fn count_defaults() -> Self {
        SolverConfig {
            threshold_abstr: 38,
            ..Self::pmc_defaults()
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::pmc_defaults()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub hyb_calls: u64,
    pub max_depth: usize,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub sat_calls: u64,
    pub inline_evals: u64,
    pub standard_calls: u64,
    pub external_calls: u64,
    pub external_failures: u64,
    pub fallback_calls: u64,
    pub nested_runs: u64,
    pub abstractions: u64,
    /// Width of every decomposition a nested run used, in run order.
    pub widths: Vec<usize>,
    pub nodes: u64,
    pub table_rows: u64,
    pub max_table_rows: usize,
}

impl RunStats {
    pub fn merge(&mut self, o: &RunStats) {
        self.hyb_calls += o.hyb_calls;
        self.max_depth = self.max_depth.max(o.max_depth);
        self.cache_hits += o.cache_hits;
        self.cache_misses += o.cache_misses;
        self.sat_calls += o.sat_calls;
        self.inline_evals += o.inline_evals;
        self.standard_calls += o.standard_calls;
        self.external_calls += o.external_calls;
        self.external_failures += o.external_failures;
        self.fallback_calls += o.fallback_calls;
        self.nested_runs += o.nested_runs;
        self.abstractions += o.abstractions;
        self.widths.extend_from_slice(&o.widths);
        self.nodes += o.nodes;
        self.table_rows += o.table_rows;
        self.max_table_rows = self.max_table_rows.max(o.max_table_rows);
    }

    fn record_run(&mut self, td: &TreeDecomposition, run: &NestedRun) {
        self.nested_runs += 1;
        self.widths.push(td.width());
        self.nodes += td.num_nodes() as u64;
        self.table_rows += run.total_rows;
        self.max_table_rows = self.max_table_rows.max(run.max_rows);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    /// Simplified formula; its universe is its occurring variables.
    pub formula: CnfFormula,
    pub projection: Vec<Var>,
    /// Projection variables that became free; each doubles the count.
    pub free_projection: usize,
    pub unsat: bool,
}

impl Preprocessed {
    pub fn multiplier(&self) -> BigUint {
        BigUint::one() << self.free_projection
    }
}

/// Unit propagation and free variable elimination, with pmc(F, P) = multiplier · pmc(F′, P′).
pub fn preprocess(f: &CnfFormula, p: &[Var]) -> Preprocessed {
    let prop = unit_propagate(f);
    if prop.status == PropagationStatus::Unsat {
        return Preprocessed {
            formula: prop.formula,
            projection: Vec::new(),
            free_projection: 0,
            unsat: true,
        };
    }
    let formula = prop.formula.restrict_universe();
    let mut projection = Vec::new();
    let mut free_projection = 0;
    for &v in p {
        if prop.forced.get(v).is_some() {
            continue;
        }
        if formula.vars().binary_search(&v).is_ok() {
            projection.push(v);
        } else {
            free_projection += 1;
        }
    }
    Preprocessed {
        formula,
        projection,
        free_projection,
        unsat: false,
    }
}

fn heuristic_td(g: &Graph, cfg: &SolverConfig) -> TreeDecomposition {
    td_from_order(g, &heuristic_order(g, cfg.heuristic, cfg.td_seed))
}

fn exceeds_rows(td: &TreeDecomposition, cfg: &SolverConfig) -> bool {
    let b = td.max_bag_size();
    b > MAX_BAG || (1u128 << b) > cfg.row_budget as u128
}

/// Greedy abstraction choice: start from the variable of minimum primal degree, then
/// repeatedly add the variable giving the nested primal graph the fewest edges. Stops at
/// `max_abstraction_size`, when `a` is exhausted, or before the nested graph's heuristic
/// width would reach `threshold_abstr`. Ties go to the smaller variable.
pub fn choose_abstraction_vars(a: &[Var], f: &CnfFormula, cfg: &SolverConfig) -> Vec<Var> {
    let primal = primal_graph(f);
    let Some(&seed) = a.iter().min_by_key(|&&v| (primal.degree(v), v)) else {
        return Vec::new();
    };
    let mut chosen = vec![seed];
    let mut remaining: BTreeSet<Var> = a.iter().copied().filter(|&v| v != seed).collect();
    while chosen.len() < cfg.max_abstraction_size && !remaining.is_empty() {
        let with = |v: Var| {
            let mut t = chosen.clone();
            t.push(v);
            t.sort_unstable();
            t
        };
        let cands: Vec<Var> = remaining.iter().copied().collect();
        let (edges, v) = cands
            .par_iter()
            .map(|&v| {
                (
                    nested_primal_graph(f, &with(v)).map_or(usize::MAX, |g| g.num_edges()),
                    v,
                )
            })
            .min()
            .expect("candidates are non-empty");
        if edges == usize::MAX {
            break;
        }
        let g = nested_primal_graph(f, &with(v)).expect("checked above");
        if heuristic_td(&g, cfg).width() >= cfg.threshold_abstr {
            break;
        }
        chosen.push(v);
        remaining.remove(&v);
    }
    chosen.sort_unstable();
    chosen
}

fn sat_call(f: &CnfFormula, cfg: &SolverConfig, stats: &mut RunStats) -> Result<bool, SolveError> {
    stats.sat_calls += 1;
    if let Some(cmd) = &cfg.sat_cmd {
        stats.external_calls += 1;
        match external_solver_call(SolverKind::Sat, Some(cmd), f, &[], cfg.solver_timeout) {
            Ok(c) => return Ok(!c.is_zero()),
            Err(e) => {
                stats.external_failures += 1;
                if cfg.strict_solvers {
                    return Err(e.into());
                }
            }
        }
    }
    stats.fallback_calls += 1;
    Ok(internal_sat(f))
}

/// The standard solver line: #SAT when every variable is projected, PMC otherwise.
fn standard_call(f: &CnfFormula, p: &[Var], cfg: &SolverConfig, stats: &mut RunStats) -> Result<BigUint, SolveError> {
    stats.standard_calls += 1;
    let (kind, cmd) = if f.vars() == p {
        (SolverKind::SharpSat, &cfg.sharpsat_cmd)
    } else {
        (SolverKind::Pmc, &cfg.pmc_cmd)
    };
    let mut failure = None;
    if let Some(cmd) = cmd {
        stats.external_calls += 1;
        match external_solver_call(kind, Some(cmd), f, p, cfg.solver_timeout) {
            Ok(c) => return Ok(c),
            Err(e) => {
                stats.external_failures += 1;
                if cfg.strict_solvers {
                    return Err(e.into());
                }
                failure = Some(e);
            }
        }
    }
    stats.fallback_calls += 1;
    match internal_fallback_count_budgeted(f, p, cfg.fallback_decisions) {
        Err(e) if e.is_resource() => Err(failure.map_or(e, SolveError::Solver)),
        r => r,
    }
}

/// Hybrid projected model count of (F, P) at nesting depth `depth`.
pub fn hyb_dp(
    depth: usize,
    f: &CnfFormula,
    p: &[Var],
    cfg: &SolverConfig,
    scope: &mut Scope<'_>,
    stats: &mut RunStats,
) -> Result<BigUint, SolveError> {
    assert!(
        depth <= cfg.threshold_depth || depth == 0,
        "nesting depth {depth} exceeds threshold"
    );
    stats.hyb_calls += 1;
    stats.max_depth = stats.max_depth.max(depth);
    let pre = preprocess(f, p);
    if pre.unsat {
        return Ok(BigUint::zero());
    }
    let mult = pre.multiplier();
    let (fp, pp) = (&pre.formula, &pre.projection);
    let key = canonical_instance_key(fp, pp);
    if let Some(c) = scope.get(&key) {
        stats.cache_hits += 1;
        return Ok(c * mult);
    }
    if scope.enabled() {
        stats.cache_misses += 1;
    }
    if pp.is_empty() {
        return Ok(if sat_call(fp, cfg, stats)? {
            mult
        } else {
            BigUint::zero()
        });
    }
    let standard = |scope: &mut Scope<'_>, stats: &mut RunStats| -> Result<BigUint, SolveError> {
        let c = standard_call(fp, pp, cfg, stats)?;
        scope.insert(key.clone(), c.clone());
        Ok(c * &mult)
    };
    if depth >= cfg.threshold_depth {
        return standard(scope, stats);
    }
    let mut a = pp.clone();
    let mut td = heuristic_td(&nested_primal_graph(fp, &a)?, cfg);
    if td.width() >= cfg.threshold_hybrid {
        return standard(scope, stats);
    }
    if td.width() >= cfg.threshold_abstr || exceeds_rows(&td, cfg) {
        stats.abstractions += 1;
        a = choose_abstraction_vars(&a, fp, cfg);
        td = heuristic_td(&nested_primal_graph(fp, &a)?, cfg);
        if exceeds_rows(&td, cfg) {
            return standard(scope, stats);
        }
    }
    let run = nested_run(depth, fp, pp, &a, &td, cfg, scope, stats, false)?;
    stats.record_run(&td, &run);
    scope.insert(key, run.count.clone());
    Ok(run.count * mult)
}

#[allow(clippy::too_many_arguments)]
fn nested_run(
    depth: usize,
    f: &CnfFormula,
    p: &[Var],
    a: &[Var],
    td: &TreeDecomposition,
    cfg: &SolverConfig,
    scope: &mut Scope<'_>,
    stats: &mut RunStats,
    keep: bool,
) -> Result<NestedRun, SolveError> {
    let mut subsolve = |d: usize, jobs: Vec<SubJob>| solve_jobs(d + 1, jobs, cfg, scope, stats);
    run_nested_dp(
        depth,
        f,
        p,
        a,
        td,
        cfg.row_budget,
        CompatTieBreak::default(),
        keep,
        &mut subsolve,
    )
}

/// Answers a batch of subformulas at depth `depth`. Equal instances are solved once; each
/// distinct one runs in its own cache scope, and scopes and statistics are merged back in
/// job order so results do not depend on scheduling.
pub fn solve_jobs(
    depth: usize,
    jobs: Vec<SubJob>,
    cfg: &SolverConfig,
    scope: &mut Scope<'_>,
    stats: &mut RunStats,
) -> Result<Vec<BigUint>, SolveError> {
    let mut slot = Vec::with_capacity(jobs.len());
    let mut unique: Vec<SubJob> = Vec::new();
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    for job in jobs {
        if !cfg.use_cache {
            slot.push(unique.len());
            unique.push(job);
            continue;
        }
        let key = canonical_instance_key(&job.formula, &job.projection);
        match seen.get(&key) {
            Some(&i) => {
                stats.cache_hits += 1;
                slot.push(i);
            }
            None => {
                seen.insert(key, unique.len());
                slot.push(unique.len());
                unique.push(job);
            }
        }
    }
    let shared: &Scope<'_> = scope;
    let run = |job: &SubJob| {
        let mut st = RunStats::default();
        let mut child = shared.child();
        let r = if job.formula.vars().len() <= cfg.inline_eval_vars {
            st.inline_evals += 1;
            internal_fallback_count_budgeted(&job.formula, &job.projection, cfg.fallback_decisions)
        } else {
            hyb_dp(depth, &job.formula, &job.projection, cfg, &mut child, &mut st)
        };
        (r, child.into_overlay(), st)
    };
    let results: Vec<_> = if cfg.parallel && unique.len() > 1 {
        unique.par_iter().map(run).collect()
    } else {
        unique.iter().map(run).collect()
    };
    let mut values = Vec::with_capacity(results.len());
    let mut first_err = None;
    for (r, overlay, st) in results {
        scope.absorb(overlay);
        stats.merge(&st);
        match r {
            Ok(c) => values.push(c),
            Err(e) => {
                first_err.get_or_insert(e);
                values.push(BigUint::zero());
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(slot.into_iter().map(|i| values[i].clone()).collect())
}

/// Hybrid count of (F, P) with a fresh cache.
pub fn count(f: &CnfFormula, p: &[Var], cfg: &SolverConfig) -> Result<(BigUint, RunStats), SolveError> {
    let mut scope = Scope::root(cfg.cache_capacity, cfg.use_cache);
    let mut stats = RunStats::default();
    let c = hyb_dp(0, f, p, cfg, &mut scope, &mut stats)?;
    Ok((c, stats))
}

/// One nested run at depth 0 with given abstraction variables and decomposition, its
/// subformulas answered by the hybrid solver. Tables are kept.
pub fn run_nested_hybrid(
    f: &CnfFormula,
    p: &[Var],
    a: &[Var],
    td: &TreeDecomposition,
    cfg: &SolverConfig,
) -> Result<(NestedRun, RunStats), SolveError> {
    let mut scope = Scope::root(cfg.cache_capacity, cfg.use_cache);
    let mut stats = RunStats {
        hyb_calls: 1,
        ..RunStats::default()
    };
    let run = nested_run(0, f, p, a, td, cfg, &mut scope, &mut stats, true)?;
    stats.record_run(td, &run);
    Ok((run, stats))
}
