//! Nested dynamic programming over the nested primal graph: abstraction bookkeeping and
//! the nested table algorithm.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::counting_dp::{bag_formulas, check_bag, compile_clauses, DpError};
use crate::decompose::{validate_td, TdError, TreeDecomposition};
use crate::error::SolveError;
use crate::formula::{apply_assignment, Assignment, CnfFormula, Var};
use crate::graphs::{components_outside, nested_primal_graph, primal_graph, Graph};

/// How a component picks its node among the compatible ones with the smallest bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompatTieBreak {
    #[default]
    FirstInPostOrder,
    LastInPostOrder,
}

#[derive(Debug, Clone)]
pub struct AbstractionContext {
    pub abstraction_vars: Vec<Var>,
    pub nested_graph: Graph,
    /// Components of primal(F) - A, ordered by minimum variable.
    pub components: Vec<Vec<Var>>,
    /// Node evaluating each component.
    pub compat: Vec<usize>,
    /// χ_t^A per node.
    pub nested_bag_vars: Vec<Vec<Var>>,
    /// F_t^A per node; its universe is χ_t^A plus its occurring variables.
    pub nested_bag_formulas: Vec<CnfFormula>,
    /// F_t per node.
    pub bag_formulas: Vec<CnfFormula>,
}

/// Assigns every component of primal(F) - A to a node whose bag holds all of the
/// component's neighbours in A (smallest such bag, ties by post-order) and builds the
/// nested bag variables and formulas.
pub fn compute_abstraction_context(
    f: &CnfFormula,
    a: &[Var],
    td: &TreeDecomposition,
    tie: CompatTieBreak,
) -> Result<AbstractionContext, SolveError> {
    let nested_graph = nested_primal_graph(f, a)?;
    let aset: BTreeSet<Var> = a.iter().copied().collect();
    let primal = primal_graph(f);
    let comps = components_outside(&primal, &aset);
    let n = td.num_nodes();
    let mut compat = Vec::with_capacity(comps.len());
    let mut nested_bag_vars = vec![Vec::new(); n];
    let mut comp_of: HashMap<Var, usize> = HashMap::new();
    for (ci, (comp, nb)) in comps.iter().enumerate() {
        let fits = |t: &usize| nb.iter().all(|v| td.bag(*t).binary_search(v).is_ok());
        let key = |t: &usize| (td.bag(*t).len(), *t);
        let chosen = match tie {
            CompatTieBreak::FirstInPostOrder => (0..n).filter(fits).min_by_key(key),
            CompatTieBreak::LastInPostOrder => (0..n).filter(fits).min_by_key(|t| (td.bag(*t).len(), n - *t)),
        };
        let t = chosen.ok_or_else(|| SolveError::NoCompatNode(comp.clone()))?;
        compat.push(t);
        nested_bag_vars[t].extend(comp.iter().copied());
        for &v in comp {
            comp_of.insert(v, ci);
        }
    }
    for vs in nested_bag_vars.iter_mut() {
        vs.sort_unstable();
    }
    let mut per_node: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in f.clauses().iter().enumerate() {
        if let Some(l) = c.iter().find(|l| !aset.contains(&l.var())) {
            per_node[compat[comp_of[&l.var()]]].push(i);
        }
    }
    let nested_bag_formulas = per_node
        .iter()
        .zip(&nested_bag_vars)
        .map(|(idx, vs)| CnfFormula::with_universe(vs.iter().copied(), idx.iter().map(|&i| f.clauses()[i].clone())))
        .collect();
    Ok(AbstractionContext {
        abstraction_vars: aset.into_iter().collect(),
        nested_graph,
        components: comps.into_iter().map(|(c, _)| c).collect(),
        compat,
        nested_bag_vars,
        nested_bag_formulas,
        bag_formulas: bag_formulas(f, td),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedTable {
    pub node: usize,
    pub bag: Vec<Var>,
    /// (assignment bits over the bag, count), ascending by assignment; counts are positive.
    pub rows: Vec<(u64, BigUint)>,
}

impl NestedTable {
    pub fn total(&self) -> BigUint {
        self.rows.iter().map(|(_, c)| c).sum()
    }
}

/// A subformula handed to the subsolver: count `formula` projected onto `projection`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubJob {
    pub formula: CnfFormula,
    pub projection: Vec<Var>,
}

/// Callback answering all subformulas of one node at once, in order.
pub type Subsolve<'a, E> = dyn FnMut(usize, Vec<SubJob>) -> Result<Vec<BigUint>, E> + 'a;

fn check_rows(node: usize, len: usize, row_budget: usize) -> Result<(), DpError> {
    if len > row_budget {
        return Err(DpError::RowBudget {
            node,
            rows: len,
            budget: row_budget,
        });
    }
    Ok(())
}

/// One nested table step on an arbitrary node: children are summed onto the shared bag
/// variables and joined, remaining bag variables are guessed, rows must satisfy F_t, and
/// each row is multiplied by the subsolver's count for F_t^A under the row (rows with
/// count 0 are dropped). On nice decompositions this is exactly the leaf/int/rem/join case
/// split.
#[allow(clippy::too_many_arguments)]
pub fn nested_table_step<E: From<DpError>>(
    depth: usize,
    node: usize,
    bag: &[Var],
    f_t: &CnfFormula,
    f_a: &CnfFormula,
    p_t: &[Var],
    children: &[&NestedTable],
    row_budget: usize,
    subsolve: &mut Subsolve<'_, E>,
) -> Result<NestedTable, E> {
    check_bag(node, bag)?;
    let clauses = compile_clauses(bag, f_t);
    let mut rows: Vec<(u64, BigUint)> = vec![(0, BigUint::one())];
    let mut known = 0u64;
    for child in children {
        let mut cmask = 0u64;
        let map: Vec<Option<usize>> = child
            .bag
            .iter()
            .map(|v| {
                let i = bag.binary_search(v).ok();
                if let Some(i) = i {
                    cmask |= 1 << i;
                }
                i
            })
            .collect();
        let mut projected: BTreeMap<u64, BigUint> = BTreeMap::new();
        for (m, c) in &child.rows {
            let mut pm = 0u64;
            for (j, i) in map.iter().enumerate() {
                if let Some(i) = i {
                    if m >> j & 1 == 1 {
                        pm |= 1 << i;
                    }
                }
            }
            *projected.entry(pm).or_insert_with(BigUint::zero) += c;
        }
        let shared = known & cmask;
        let mut index: HashMap<u64, Vec<(u64, &BigUint)>> = HashMap::new();
        for (pm, c) in &projected {
            index.entry(pm & shared).or_default().push((*pm, c));
        }
        let mut next = Vec::new();
        for (m, c) in &rows {
            if let Some(list) = index.get(&(m & shared)) {
                for (pm, pc) in list {
                    next.push((m | pm, c * *pc));
                }
            }
        }
        check_rows(node, next.len(), row_budget)?;
        rows = next;
        known |= cmask;
    }
    let supports: Vec<u64> = clauses.iter().map(|(p, n)| p | n).collect();
    for i in 0..bag.len() {
        let bit = 1u64 << i;
        if known & bit != 0 {
            continue;
        }
        known |= bit;
        let active: Vec<(u64, u64)> = clauses
            .iter()
            .zip(&supports)
            .filter(|(_, s)| **s & bit != 0 && **s & !known == 0)
            .map(|(c, _)| *c)
            .collect();
        let mut next = Vec::with_capacity(rows.len() * 2);
        for (m, c) in rows {
            for j in [m, m | bit] {
                if active.iter().all(|&(p, n)| j & p != 0 || !j & n != 0) {
                    next.push((j, c.clone()));
                }
            }
        }
        check_rows(node, next.len(), row_budget)?;
        rows = next;
    }
    rows.retain(|(j, _)| clauses.iter().all(|&(p, n)| j & p != 0 || !j & n != 0));
    rows.sort_unstable_by_key(|r| r.0);
    if !f_a.is_empty() {
        let jobs: Vec<SubJob> = rows
            .iter()
            .map(|(j, _)| {
                let alpha: Assignment = bag.iter().enumerate().map(|(i, &v)| (v, j >> i & 1 == 1)).collect();
                SubJob {
                    formula: apply_assignment(f_a, &alpha),
                    projection: p_t.to_vec(),
                }
            })
            .collect();
        let counts = subsolve(depth, jobs)?;
        assert_eq!(counts.len(), rows.len(), "subsolver must answer every job");
        rows = rows
            .into_iter()
            .zip(counts)
            .filter(|(_, c)| !c.is_zero())
            .map(|((j, c), k)| (j, c * k))
            .collect();
    }
    Ok(NestedTable {
        node,
        bag: bag.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct NestedRun {
    pub context: AbstractionContext,
    pub tables: Vec<Option<NestedTable>>,
    pub count: BigUint,
    pub total_rows: u64,
    pub max_rows: usize,
}

/// Nested DP for (F, P) with abstraction variables `a ⊆ P` over a decomposition of the
/// nested primal graph. Nested #SAT is the case P = universe of F.
#[allow(clippy::too_many_arguments)]
pub fn run_nested_dp<E: From<DpError> + From<SolveError>>(
    depth: usize,
    f: &CnfFormula,
    p: &[Var],
    a: &[Var],
    td: &TreeDecomposition,
    row_budget: usize,
    tie: CompatTieBreak,
    keep: bool,
    subsolve: &mut Subsolve<'_, E>,
) -> Result<NestedRun, E> {
    if let Some(&v) = a.iter().find(|v| p.binary_search(v).is_err()) {
        return Err(SolveError::AbstractionNotProjected(v).into());
    }
    let context = compute_abstraction_context(f, a, td, tie)?;
    let violations = validate_td(td, &context.nested_graph);
    if !violations.is_empty() {
        return Err(SolveError::Td(TdError::Invalid(violations)).into());
    }
    let mut tables: Vec<Option<NestedTable>> = vec![None; td.num_nodes()];
    let (mut total_rows, mut max_rows) = (0u64, 0usize);
    for t in 0..td.num_nodes() {
        let f_a = &context.nested_bag_formulas[t];
        let p_t: Vec<Var> = f_a
            .universe()
            .iter()
            .copied()
            .filter(|v| p.binary_search(v).is_ok() && td.bag(t).binary_search(v).is_err())
            .collect();
        let table = {
            let ch: Vec<&NestedTable> = td.children(t).iter().map(|&c| tables[c].as_ref().unwrap()).collect();
            nested_table_step(
                depth,
                t,
                td.bag(t),
                &context.bag_formulas[t],
                f_a,
                &p_t,
                &ch,
                row_budget,
                subsolve,
            )?
        };
        total_rows += table.rows.len() as u64;
        max_rows = max_rows.max(table.rows.len());
        tables[t] = Some(table);
        if !keep {
            for &c in td.children(t) {
                tables[c] = None;
            }
        }
    }
    let free_p = p.iter().filter(|v| f.vars().binary_search(v).is_err()).count();
    let count = tables[td.root()].as_ref().unwrap().total() << free_p;
    Ok(NestedRun {
        context,
        tables,
        count,
        total_rows,
        max_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::parse_pace;
    use crate::oracle::brute_pmc;

    const NESTED_AB_TD: &str = "s td 3 2 2\nb 1 1 2\nb 2 1\nb 3 1\n1 3\n2 3\n";
    const SINGLE_TD: &str = "s td 1 1 1\nb 1 1\n";

    fn ex1() -> CnfFormula {
        CnfFormula::from_ints(4, &[&[-1, 2, 3], &[1, -2, -3], &[1, 4], &[1, -4]])
    }

    fn brute_jobs(_: usize, jobs: Vec<SubJob>) -> Result<Vec<BigUint>, SolveError> {
        Ok(jobs
            .iter()
            .map(|j| brute_pmc(&j.formula, &j.projection).unwrap())
            .collect())
    }

    fn rows(t: &NestedTable) -> Vec<(u64, u64)> {
        t.rows.iter().map(|(m, c)| (*m, u64::try_from(c).unwrap())).collect()
    }

    #[test]
    fn nested_ab_context() {
        let td = parse_pace(NESTED_AB_TD).unwrap();
        let ctx = compute_abstraction_context(&ex1(), &[1, 2], &td, CompatTieBreak::FirstInPostOrder).unwrap();
        assert_eq!(ctx.components, vec![vec![3], vec![4]]);
        assert_eq!(ctx.compat, vec![0, 1]);
        assert_eq!(ctx.nested_bag_formulas[0].num_clauses(), 2);
        assert_eq!(ctx.nested_bag_formulas[1].num_clauses(), 2);
        assert!(ctx.nested_bag_formulas[2].is_empty());
        let rev = compute_abstraction_context(&ex1(), &[1, 2], &td, CompatTieBreak::LastInPostOrder).unwrap();
        assert_eq!(rev.compat, vec![0, 2]);
    }

    #[test]
    fn trivial_abstractions() {
        let f = ex1();
        let full = crate::decompose::decompose(&primal_graph(&f), crate::decompose::Heuristic::MinFill, 0);
        let ctx = compute_abstraction_context(&f, &[1, 2, 3, 4], &full, CompatTieBreak::default()).unwrap();
        assert!(ctx.nested_bag_formulas.iter().all(CnfFormula::is_empty));
        let empty = crate::decompose::decompose(&Graph::new(), crate::decompose::Heuristic::MinFill, 0);
        let ctx = compute_abstraction_context(&f, &[], &empty, CompatTieBreak::default()).unwrap();
        assert_eq!(
            ctx.nested_bag_formulas[0],
            CnfFormula::with_universe([1, 2, 3, 4], f.clauses().to_vec())
        );
    }

    #[test]
    fn nested_count_tables() {
        let f = ex1();
        let td = parse_pace(NESTED_AB_TD).unwrap();
        let run = run_nested_dp::<SolveError>(
            0,
            &f,
            &[1, 2, 3, 4],
            &[1, 2],
            &td,
            1 << 20,
            CompatTieBreak::default(),
            true,
            &mut brute_jobs,
        )
        .unwrap();
        assert_eq!(
            rows(run.tables[0].as_ref().unwrap()),
            vec![(0, 2), (1, 1), (2, 1), (3, 2)]
        );
        assert_eq!(rows(run.tables[1].as_ref().unwrap()), vec![(1, 2)]);
        assert_eq!(rows(run.tables[2].as_ref().unwrap()), vec![(1, 6)]);
        assert_eq!(run.count, BigUint::from(6u32));

        let single = parse_pace(SINGLE_TD).unwrap();
        let run = run_nested_dp::<SolveError>(
            0,
            &f,
            &[1, 2, 3, 4],
            &[1],
            &single,
            1 << 20,
            CompatTieBreak::default(),
            true,
            &mut brute_jobs,
        )
        .unwrap();
        assert_eq!(rows(run.tables[0].as_ref().unwrap()), vec![(1, 6)]);
    }

    #[test]
    fn nested_pmc_tables() {
        let f = ex1();
        let td = parse_pace(NESTED_AB_TD).unwrap();
        let run = run_nested_dp::<SolveError>(
            0,
            &f,
            &[1, 2],
            &[1, 2],
            &td,
            1 << 20,
            CompatTieBreak::default(),
            true,
            &mut brute_jobs,
        )
        .unwrap();
        assert_eq!(
            rows(run.tables[0].as_ref().unwrap()),
            vec![(0, 1), (1, 1), (2, 1), (3, 1)]
        );
        assert_eq!(rows(run.tables[2].as_ref().unwrap()), vec![(1, 2)]);
        assert_eq!(run.count, BigUint::from(2u32));
    }

    #[test]
    fn rejects_abstraction_outside_projection() {
        let f = ex1();
        let td = parse_pace(NESTED_AB_TD).unwrap();
        let err = run_nested_dp::<SolveError>(
            0,
            &f,
            &[3, 4],
            &[1, 2],
            &td,
            1 << 20,
            CompatTieBreak::default(),
            false,
            &mut brute_jobs,
        )
        .unwrap_err();
        assert!(matches!(err, SolveError::AbstractionNotProjected(1)));
    }

    #[test]
    fn partition_property_example() {
        let f = ex1();
        let td = parse_pace(NESTED_AB_TD).unwrap();
        let ctx = compute_abstraction_context(&f, &[1, 2], &td, CompatTieBreak::default()).unwrap();
        let nesting: usize = ctx
            .nested_bag_formulas
            .iter()
            .map(|g| g.vars().iter().filter(|v| **v > 2).count())
            .sum();
        assert_eq!(nesting, 2);
    }
}
