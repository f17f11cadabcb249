//! In-process exact counter used when no external solver is configured or one fails.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::SolveError;
use crate::formula::{
    apply_assignment, canonical_instance_key, unit_propagate, Assignment, CnfFormula, PropagationStatus, Var,
};
use crate::graphs::{connected_components, primal_graph};

/// Default cap on branching decisions of one fallback call.
pub const DEFAULT_DECISIONS: u64 = 1 << 22;

fn most_frequent(f: &CnfFormula, among: impl Fn(Var) -> bool) -> Option<Var> {
    let mut occ: HashMap<Var, usize> = HashMap::new();
    for c in f.clauses() {
        for l in c {
            if among(l.var()) {
                *occ.entry(l.var()).or_default() += 1;
            }
        }
    }
    occ.into_iter()
        .max_by_key(|&(v, n)| (n, std::cmp::Reverse(v)))
        .map(|(v, _)| v)
}

fn assign(f: &CnfFormula, v: Var, value: bool) -> CnfFormula {
    let mut alpha = Assignment::new();
    alpha.set(v, value);
    apply_assignment(f, &alpha)
}

/// DPLL satisfiability check with unit propagation.
pub fn internal_sat(f: &CnfFormula) -> bool {
    let prop = unit_propagate(f);
    if prop.status == PropagationStatus::Unsat {
        return false;
    }
    let g = prop.formula;
    let Some(v) = most_frequent(&g, |_| true) else {
        return true;
    };
    internal_sat(&assign(&g, v, true)) || internal_sat(&assign(&g, v, false))
}

struct Counter {
    decisions: u64,
    budget: u64,
    cache: HashMap<Vec<u8>, BigUint>,
}

impl Counter {
    fn count(&mut self, f: &CnfFormula, p: &[Var]) -> Result<BigUint, SolveError> {
        let prop = unit_propagate(f);
        if prop.status == PropagationStatus::Unsat {
            return Ok(BigUint::zero());
        }
        let g = prop.formula;
        let p: Vec<Var> = p.iter().copied().filter(|&v| prop.forced.get(v).is_none()).collect();
        let (inside, free): (Vec<Var>, Vec<Var>) = p.iter().partition(|v| g.vars().binary_search(v).is_ok());
        let mut total = BigUint::one() << free.len();
        if g.is_empty() {
            return Ok(total);
        }
        let comps = connected_components(&primal_graph(&g));
        if comps.len() == 1 {
            return Ok(total * self.component(&g, &inside)?);
        }
        for comp in comps {
            let set: BTreeSet<Var> = comp.iter().copied().collect();
            let sub = CnfFormula::with_universe(
                comp.iter().copied(),
                g.clauses().iter().filter(|c| set.contains(&c[0].var())).cloned(),
            );
            let sp: Vec<Var> = inside.iter().copied().filter(|v| set.contains(v)).collect();
            let c = self.component(&sub, &sp)?;
            if c.is_zero() {
                return Ok(c);
            }
            total *= c;
        }
        Ok(total)
    }

    fn component(&mut self, g: &CnfFormula, p: &[Var]) -> Result<BigUint, SolveError> {
        if p.is_empty() {
            return Ok(BigUint::from(internal_sat(g) as u32));
        }
        let key = canonical_instance_key(g, p);
        if let Some(c) = self.cache.get(&key) {
            return Ok(c.clone());
        }
        self.decisions += 1;
        if self.decisions > self.budget {
            return Err(SolveError::Resource(format!(
                "internal counter exceeded {} decisions",
                self.budget
            )));
        }
        let pset: BTreeSet<Var> = p.iter().copied().collect();
        let v = most_frequent(g, |v| pset.contains(&v)).expect("projection variables occur in the component");
        let rest: Vec<Var> = p.iter().copied().filter(|&u| u != v).collect();
        let mut c = self.count(&assign(g, v, false), &rest)?;
        c += self.count(&assign(g, v, true), &rest)?;
        self.cache.insert(key, c.clone());
        Ok(c)
    }
}

/// Projected model count of (F, P) by branching on projection variables, with component
/// splitting and caching.
pub fn internal_fallback_count(f: &CnfFormula, p: &[Var]) -> Result<BigUint, SolveError> {
    internal_fallback_count_budgeted(f, p, u64::MAX)
}

/// As [`internal_fallback_count`], failing with a resource error after `max_decisions`
/// branching decisions.
pub fn internal_fallback_count_budgeted(f: &CnfFormula, p: &[Var], max_decisions: u64) -> Result<BigUint, SolveError> {
    let mut counter = Counter {
        decisions: 0,
        budget: max_decisions,
        cache: HashMap::new(),
    };
    counter.count(f, p)
}
