//! Brute-force reference counters. Deliberately naive.

use std::collections::{BTreeSet, HashSet, VecDeque};

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

use crate::formula::{CnfFormula, Var};
use crate::graphs::{primal_graph, Graph};

pub const MAX_ORACLE_VARS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle refuses {0} variables (limit {MAX_ORACLE_VARS})")]
    TooManyVars(usize),
}

fn guard(n: usize) -> Result<(), OracleError> {
    if n > MAX_ORACLE_VARS {
        return Err(OracleError::TooManyVars(n));
    }
    Ok(())
}

fn clause_true(c: &[crate::formula::Literal], vars: &[Var], mask: u64) -> bool {
    c.iter().any(|l| {
        let i = vars.binary_search(&l.var()).unwrap();
        l.eval(mask >> i & 1 == 1)
    })
}

/// Models of `f` over its universe, by enumerating all assignments to its occurring variables.
pub fn brute_count(f: &CnfFormula) -> Result<BigUint, OracleError> {
    let vars = f.vars();
    guard(vars.len())?;
    let mut n = 0u64;
    for mask in 0..1u64 << vars.len() {
        if f.clauses().iter().all(|c| clause_true(c, vars, mask)) {
            n += 1;
        }
    }
    Ok(BigUint::from(n) << (f.universe().len() - vars.len()))
}

/// Distinct restrictions of models to `p`, with unconstrained projection variables doubling.
pub fn brute_pmc(f: &CnfFormula, p: &[Var]) -> Result<BigUint, OracleError> {
    let vars = f.vars();
    guard(vars.len())?;
    let pmask: u64 = vars
        .iter()
        .enumerate()
        .filter(|(_, v)| p.contains(v))
        .map(|(i, _)| 1u64 << i)
        .sum();
    let mut seen = HashSet::new();
    for mask in 0..1u64 << vars.len() {
        if f.clauses().iter().all(|c| clause_true(c, vars, mask)) {
            seen.insert(mask & pmask);
        }
    }
    let free = p.iter().filter(|v| vars.binary_search(v).is_err()).count();
    Ok(BigUint::from(seen.len()) << free)
}

fn simple_sat(clauses: &[Vec<(Var, bool)>], value: &mut Vec<(Var, bool)>) -> bool {
    let lookup = |value: &[(Var, bool)], v: Var| value.iter().find(|(w, _)| *w == v).map(|&(_, b)| b);
    let mut branch = None;
    for c in clauses {
        let mut sat = false;
        let mut open = None;
        for &(v, pos) in c {
            match lookup(value, v) {
                Some(b) if b == pos => {
                    sat = true;
                    break;
                }
                Some(_) => {}
                None => open = open.or(Some(v)),
            }
        }
        if sat {
            continue;
        }
        match open {
            None => return false,
            Some(v) => {
                branch = branch.or(Some(v));
            }
        }
    }
    let Some(v) = branch else { return true };
    for b in [false, true] {
        value.push((v, b));
        if simple_sat(clauses, value) {
            value.pop();
            return true;
        }
        value.pop();
    }
    false
}

/// Projected count by enumerating assignments to `p` and checking each residual formula with a
/// plain backtracking search. Suitable when `p` is small but the formula is not.
pub fn pmc_by_projection_enumeration(f: &CnfFormula, p: &[Var]) -> Result<BigUint, OracleError> {
    let pv: Vec<Var> = p
        .iter()
        .copied()
        .filter(|v| f.vars().binary_search(v).is_ok())
        .collect();
    guard(pv.len())?;
    let clauses: Vec<Vec<(Var, bool)>> = f
        .clauses()
        .iter()
        .map(|c| c.iter().map(|l| (l.var(), l.is_positive())).collect())
        .collect();
    let mut n = 0u64;
    for mask in 0..1u64 << pv.len() {
        let mut value: Vec<(Var, bool)> = pv.iter().enumerate().map(|(i, &v)| (v, mask >> i & 1 == 1)).collect();
        if simple_sat(&clauses, &mut value) {
            n += 1;
        }
    }
    Ok(BigUint::from(n) << (p.len() - pv.len()))
}

/// Satisfiability by the same plain backtracking search.
pub fn brute_sat(f: &CnfFormula) -> bool {
    pmc_by_projection_enumeration(f, &[]).unwrap() == BigUint::one()
}

/// Nested primal graph straight from the path definition: `{u, v}` is an edge iff a search
/// from `u` through vertices outside `a` reaches `v`.
pub fn nesting_path_graph(f: &CnfFormula, a: &[Var]) -> Graph {
    let primal = primal_graph(f);
    let aset: BTreeSet<Var> = a.iter().copied().collect();
    let mut g = Graph::with_vertices(aset.iter().copied());
    for &u in &aset {
        let mut seen = BTreeSet::from([u]);
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            for w in primal.neighbors(x) {
                if !seen.insert(w) {
                    continue;
                }
                if aset.contains(&w) {
                    g.add_edge(u, w);
                } else {
                    queue.push_back(w);
                }
            }
        }
    }
    g
}
