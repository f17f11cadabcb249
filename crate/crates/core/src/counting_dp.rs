//! SAT/#SAT table algorithm over nice tree decompositions, plus purging of rows that
//! extend to no model.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use smallvec::SmallVec;
use thiserror::Error;

use crate::decompose::{NodeKind, TreeDecomposition};
use crate::formula::{CnfFormula, Var};

/// Largest bag a table can handle; assignments are bit masks.
pub const MAX_BAG: usize = 63;

/// Default limit on rows per table.
pub const DEFAULT_ROW_BUDGET: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DpError {
    #[error("row budget exceeded at t{}: {rows} rows, budget {budget}", .node + 1)]
    RowBudget { node: usize, rows: usize, budget: usize },
    #[error("width too high for PROJ at t{}: {rows} rows needed, budget {budget}", .node + 1)]
    ProjBudget { node: usize, rows: usize, budget: usize },
    #[error("bag of t{} has {size} variables, at most {MAX_BAG} supported", .node + 1)]
    BagTooLarge { node: usize, size: usize },
    #[error("contract violation: {0}")]
    Contract(String),
}

impl DpError {
    pub fn is_resource(&self) -> bool {
        !matches!(self, DpError::Contract(_))
    }
}

/// Indices of child rows, one per child.
pub type Origin = SmallVec<[u32; 2]>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatRow {
    /// Bit `i` is the value of the `i`-th smallest bag variable.
    pub assignment: u64,
    pub count: BigUint,
    pub origins: Vec<Origin>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatTable {
    pub node: usize,
    pub bag: Vec<Var>,
    /// Sorted by assignment.
    pub rows: Vec<SatRow>,
}

impl SatTable {
    pub fn find(&self, assignment: u64) -> Option<usize> {
        self.rows.binary_search_by_key(&assignment, |r| r.assignment).ok()
    }

    /// The variables set to true by a row assignment.
    pub fn true_vars(&self, assignment: u64) -> Vec<Var> {
        self.bag
            .iter()
            .enumerate()
            .filter(|(i, _)| assignment >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total(&self) -> BigUint {
        self.rows.iter().map(|r| &r.count).sum()
    }
}

/// Tables indexed by node; `None` where a table was released.
pub type TableMap = Vec<Option<SatTable>>;

/// Clause as (positive bits, negative bits) over a bag.
pub(crate) type MaskClause = (u64, u64);

pub(crate) fn compile_clauses(bag: &[Var], f: &CnfFormula) -> Vec<MaskClause> {
    f.clauses()
        .iter()
        .map(|c| {
            let mut pos = 0u64;
            let mut neg = 0u64;
            for l in c {
                let i = bag.binary_search(&l.var()).expect("clause variable outside bag");
                if l.is_positive() {
                    pos |= 1 << i;
                } else {
                    neg |= 1 << i;
                }
            }
            (pos, neg)
        })
        .collect()
}

pub(crate) fn satisfies_mask(clauses: &[MaskClause], j: u64) -> bool {
    clauses.iter().all(|&(pos, neg)| j & pos != 0 || !j & neg != 0)
}

pub(crate) fn check_bag(node: usize, bag: &[Var]) -> Result<(), DpError> {
    if bag.len() > MAX_BAG {
        return Err(DpError::BagTooLarge { node, size: bag.len() });
    }
    Ok(())
}

/// F_t: the clauses whose variables all lie in `bag`.
pub fn bag_formula(f: &CnfFormula, bag: &[Var]) -> CnfFormula {
    let clauses = f
        .clauses()
        .iter()
        .filter(|c| c.iter().all(|l| bag.binary_search(&l.var()).is_ok()))
        .cloned();
    CnfFormula::with_universe(bag.iter().copied(), clauses)
}

/// Bag formulas for every node, using an index of clauses by their smallest variable.
pub fn bag_formulas(f: &CnfFormula, td: &TreeDecomposition) -> Vec<CnfFormula> {
    let mut by_min: HashMap<Var, Vec<usize>> = HashMap::new();
    let mut empties = Vec::new();
    for (i, c) in f.clauses().iter().enumerate() {
        match c.first() {
            Some(l) => by_min.entry(l.var()).or_default().push(i),
            None => empties.push(i),
        }
    }
    (0..td.num_nodes())
        .map(|t| {
            let bag = td.bag(t);
            let mut idx: Vec<usize> = empties.clone();
            for v in bag {
                if let Some(cs) = by_min.get(v) {
                    idx.extend(
                        cs.iter()
                            .copied()
                            .filter(|&i| f.clauses()[i].iter().all(|l| bag.binary_search(&l.var()).is_ok())),
                    );
                }
            }
            idx.sort_unstable();
            CnfFormula::with_universe(bag.iter().copied(), idx.into_iter().map(|i| f.clauses()[i].clone()))
        })
        .collect()
}

fn expect_children(node: usize, kind: NodeKind, n: usize, want: usize) -> Result<(), DpError> {
    if n != want {
        return Err(DpError::Contract(format!(
            "t{} of kind {kind} has {n} child tables, expected {want}",
            node + 1
        )));
    }
    Ok(())
}

fn var_pos(node: usize, bag: &[Var], v: Var) -> Result<usize, DpError> {
    bag.binary_search(&v)
        .map_err(|_| DpError::Contract(format!("variable {v} missing from bag of t{}", node + 1)))
}

/// Inserts a zero bit at position `k`.
pub(crate) fn spread(m: u64, k: usize) -> u64 {
    let low = m & ((1u64 << k) - 1);
    low | ((m >> k) << (k + 1))
}

/// Deletes the bit at position `k`.
pub(crate) fn squeeze(m: u64, k: usize) -> u64 {
    let low = m & ((1u64 << k) - 1);
    low | ((m >> (k + 1)) << k)
}

/// One step of the SAT table algorithm with counters and origin links.
pub fn sat_table_step(
    node: usize,
    kind: NodeKind,
    bag: &[Var],
    f_t: &CnfFormula,
    children: &[&SatTable],
    row_budget: usize,
) -> Result<SatTable, DpError> {
    check_bag(node, bag)?;
    let clauses = compile_clauses(bag, f_t);
    let mut rows: Vec<SatRow> = Vec::new();
    match kind {
        NodeKind::Leaf => {
            expect_children(node, kind, children.len(), 0)?;
            if satisfies_mask(&clauses, 0) {
                rows.push(SatRow {
                    assignment: 0,
                    count: BigUint::one(),
                    origins: vec![Origin::new()],
                });
            }
        }
        NodeKind::Intro(a) => {
            expect_children(node, kind, children.len(), 1)?;
            let k = var_pos(node, bag, a)?;
            for (i, r) in children[0].rows.iter().enumerate() {
                let base = spread(r.assignment, k);
                for j in [base, base | 1 << k] {
                    if satisfies_mask(&clauses, j) {
                        rows.push(SatRow {
                            assignment: j,
                            count: r.count.clone(),
                            origins: vec![Origin::from_slice(&[i as u32])],
                        });
                    }
                }
            }
            rows.sort_unstable_by_key(|r| r.assignment);
        }
        NodeKind::Rem(a) => {
            expect_children(node, kind, children.len(), 1)?;
            let k = var_pos(node, &children[0].bag, a)?;
            let mut merged: BTreeMap<u64, (BigUint, Vec<Origin>)> = BTreeMap::new();
            for (i, r) in children[0].rows.iter().enumerate() {
                let e = merged
                    .entry(squeeze(r.assignment, k))
                    .or_insert_with(|| (BigUint::zero(), Vec::new()));
                e.0 += &r.count;
                e.1.push(Origin::from_slice(&[i as u32]));
            }
            rows = merged
                .into_iter()
                .map(|(assignment, (count, origins))| SatRow {
                    assignment,
                    count,
                    origins,
                })
                .collect();
        }
        NodeKind::Join => {
            expect_children(node, kind, children.len(), 2)?;
            let (l, r) = (children[0], children[1]);
            let (mut i, mut j) = (0, 0);
            while i < l.rows.len() && j < r.rows.len() {
                let (a, b) = (l.rows[i].assignment, r.rows[j].assignment);
                if a < b {
                    i += 1;
                } else if b < a {
                    j += 1;
                } else {
                    rows.push(SatRow {
                        assignment: a,
                        count: &l.rows[i].count * &r.rows[j].count,
                        origins: vec![Origin::from_slice(&[i as u32, j as u32])],
                    });
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    if rows.len() > row_budget {
        return Err(DpError::RowBudget {
            node,
            rows: rows.len(),
            budget: row_budget,
        });
    }
    assert!(
        bag.len() >= 64 || rows.len() as u64 <= 1u64 << bag.len(),
        "table larger than 2^|bag|"
    );
    Ok(SatTable {
        node,
        bag: bag.to_vec(),
        rows,
    })
}

fn require_nice(td: &TreeDecomposition) -> Result<(), DpError> {
    if !td.is_nice() {
        return Err(DpError::Contract(
            "dynamic programming needs a nice tree decomposition".into(),
        ));
    }
    Ok(())
}

/// Runs the table algorithm in post-order. With `retain == false` only the root table is kept.
pub fn run_dp(f: &CnfFormula, td: &TreeDecomposition, retain: bool, row_budget: usize) -> Result<TableMap, DpError> {
    require_nice(td)?;
    let formulas = bag_formulas(f, td);
    let mut tables: TableMap = vec![None; td.num_nodes()];
    for t in 0..td.num_nodes() {
        let table = {
            let ch: Vec<&SatTable> = td
                .children(t)
                .iter()
                .map(|&c| tables[c].as_ref().expect("child table computed in post-order"))
                .collect();
            sat_table_step(t, td.kind(t).unwrap(), td.bag(t), &formulas[t], &ch, row_budget)?
        };
        tables[t] = Some(table);
        if !retain {
            for &c in td.children(t) {
                tables[c] = None;
            }
        }
    }
    Ok(tables)
}

/// Which rows lie on a satisfiable extension: marks root rows and follows origin links down.
pub fn purge_marks(tables: &TableMap, td: &TreeDecomposition) -> Vec<Vec<bool>> {
    let mut marks: Vec<Vec<bool>> = tables
        .iter()
        .map(|t| vec![false; t.as_ref().map_or(0, SatTable::len)])
        .collect();
    let root = td.root();
    marks[root].iter_mut().for_each(|m| *m = true);
    for t in (0..td.num_nodes()).rev() {
        let Some(table) = tables[t].as_ref() else { continue };
        let ch = td.children(t);
        for (i, row) in table.rows.iter().enumerate() {
            if !marks[t][i] {
                continue;
            }
            for o in &row.origins {
                for (k, &ci) in o.iter().enumerate() {
                    marks[ch[k]][ci as usize] = true;
                }
            }
        }
    }
    marks
}

/// Drops rows in no satisfiable extension and renumbers origin links.
pub fn purge(tables: &TableMap, td: &TreeDecomposition) -> TableMap {
    let marks = purge_marks(tables, td);
    let remap: Vec<Vec<u32>> = marks
        .iter()
        .map(|m| {
            let mut next = 0u32;
            m.iter()
                .map(|&keep| {
                    if keep {
                        next += 1;
                        next - 1
                    } else {
                        u32::MAX
                    }
                })
                .collect()
        })
        .collect();
    tables
        .iter()
        .enumerate()
        .map(|(t, table)| {
            let table = table.as_ref()?;
            let ch = td.children(t);
            let rows = table
                .rows
                .iter()
                .zip(&marks[t])
                .filter(|(_, &keep)| keep)
                .map(|(r, _)| SatRow {
                    assignment: r.assignment,
                    count: r.count.clone(),
                    origins: r
                        .origins
                        .iter()
                        .filter_map(|o| {
                            let mapped: Origin =
                                o.iter().enumerate().map(|(k, &ci)| remap[ch[k]][ci as usize]).collect();
                            (!mapped.contains(&u32::MAX)).then_some(mapped)
                        })
                        .collect(),
                })
                .collect();
            Some(SatTable {
                node: t,
                bag: table.bag.clone(),
                rows,
            })
        })
        .collect()
}

/// Variables appearing in some bag.
pub fn td_vertices(td: &TreeDecomposition) -> Vec<Var> {
    let mut vs: Vec<Var> = td.bags().iter().flatten().copied().collect();
    vs.sort_unstable();
    vs.dedup();
    vs
}

/// 2^k for the universe variables of `f` in `among` that no bag mentions.
pub(crate) fn free_factor(f: &CnfFormula, td: &TreeDecomposition, among: &[Var]) -> Result<BigUint, DpError> {
    let covered = td_vertices(td);
    if let Some(v) = f.vars().iter().find(|v| covered.binary_search(v).is_err()) {
        return Err(DpError::Contract(format!("variable {v} occurs in no bag")));
    }
    let k = among.iter().filter(|v| covered.binary_search(v).is_err()).count();
    Ok(BigUint::one() << k)
}

/// Number of models over the formula's universe.
pub fn model_count(f: &CnfFormula, td: &TreeDecomposition, row_budget: usize) -> Result<BigUint, DpError> {
    let factor = free_factor(f, td, f.universe())?;
    let tables = run_dp(f, td, false, row_budget)?;
    Ok(tables[td.root()].as_ref().unwrap().total() * factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::parse_pace;

    pub(crate) const NICE12_TD: &str = "s td 12 3 4\nb 1\nb 2 1\nb 3 1 3\nb 4 1 2 3\nb 5 1 2\nb 6 1\nb 7\nb 8 4\nb 9 1 4\nb 10 1\nb 11 1\nb 12\n1 2\n2 3\n3 4\n4 5\n5 6\n6 11\n7 8\n8 9\n9 10\n10 11\n11 12\n";

    fn ex1() -> CnfFormula {
        CnfFormula::from_ints(4, &[&[-1, 2, 3], &[1, -2, -3], &[1, 4], &[1, -4]])
    }

    fn sets(t: &SatTable) -> Vec<Vec<Var>> {
        t.rows.iter().map(|r| t.true_vars(r.assignment)).collect()
    }

    #[test]
    fn bag_formula_examples() {
        let f = ex1();
        assert_eq!(bag_formula(&f, &[1, 2, 3]).num_clauses(), 2);
        assert!(bag_formula(&f, &[1]).is_empty());
        assert!(bag_formula(&f, &[]).is_empty());
    }

    #[test]
    fn nice12_tables() {
        let td = parse_pace(NICE12_TD).unwrap();
        let tables = run_dp(&ex1(), &td, true, DEFAULT_ROW_BUDGET).unwrap();
        let tab = |i: usize| tables[i - 1].as_ref().unwrap();
        assert_eq!(sets(tab(1)), vec![Vec::<Var>::new()]);
        assert_eq!(
            sets(tab(4)),
            vec![vec![], vec![2], vec![1, 2], vec![3], vec![1, 3], vec![1, 2, 3]]
        );
        assert_eq!(sets(tab(5)), vec![vec![], vec![1], vec![2], vec![1, 2]]);
        assert_eq!(sets(tab(6)), vec![vec![], vec![1]]);
        assert_eq!(sets(tab(9)), vec![vec![1], vec![1, 4]]);
        assert_eq!(sets(tab(10)), vec![vec![1]]);
        assert_eq!(sets(tab(11)), vec![vec![1]]);
        assert_eq!(sets(tab(12)), vec![Vec::<Var>::new()]);
        assert_eq!(tab(12).total(), BigUint::from(6u32));
        // u5.1 comes from u4.1 and u4.4; u11.1 joins u6.2 with u10.1.
        assert_eq!(
            tab(5).rows[0].origins,
            vec![Origin::from_slice(&[0]), Origin::from_slice(&[3])]
        );
        assert_eq!(tab(11).rows[0].origins, vec![Origin::from_slice(&[1, 0])]);
    }

    #[test]
    fn purge_example() {
        let td = parse_pace(NICE12_TD).unwrap();
        let tables = run_dp(&ex1(), &td, true, DEFAULT_ROW_BUDGET).unwrap();
        let marks = purge_marks(&tables, &td);
        assert_eq!(marks[3], vec![false, false, true, false, true, true]);
        let purged = purge(&tables, &td);
        assert_eq!(
            sets(purged[3].as_ref().unwrap()),
            vec![vec![1, 2], vec![1, 3], vec![1, 2, 3]]
        );
        assert_eq!(purged[11].as_ref().unwrap().total(), BigUint::from(6u32));
    }

    #[test]
    fn unsat_root_empty() {
        let f = CnfFormula::from_ints(1, &[&[1], &[-1]]);
        let td = crate::decompose::decompose(
            &crate::graphs::primal_graph(&f),
            crate::decompose::Heuristic::MinFill,
            0,
        );
        let tables = run_dp(&f, &td, true, DEFAULT_ROW_BUDGET).unwrap();
        assert!(tables[td.root()].as_ref().unwrap().is_empty());
        assert!(purge(&tables, &td).iter().all(|t| t.as_ref().unwrap().is_empty()));
    }

    #[test]
    fn join_step_intersects() {
        let t6 = SatTable {
            node: 5,
            bag: vec![1],
            rows: vec![
                SatRow {
                    assignment: 0,
                    count: BigUint::one(),
                    origins: vec![],
                },
                SatRow {
                    assignment: 1,
                    count: BigUint::from(2u32),
                    origins: vec![],
                },
            ],
        };
        let t10 = SatTable {
            node: 9,
            bag: vec![1],
            rows: vec![SatRow {
                assignment: 1,
                count: BigUint::from(2u32),
                origins: vec![],
            }],
        };
        let f = CnfFormula::with_universe([1], vec![]);
        let t11 = sat_table_step(10, NodeKind::Join, &[1], &f, &[&t6, &t10], 16).unwrap();
        assert_eq!(t11.rows.len(), 1);
        assert_eq!(t11.rows[0].count, BigUint::from(4u32));
        assert!(matches!(
            sat_table_step(10, NodeKind::Join, &[1], &f, &[&t6], 16),
            Err(DpError::Contract(_))
        ));
        let leaf = sat_table_step(0, NodeKind::Leaf, &[], &CnfFormula::new(0, vec![]), &[], 16).unwrap();
        assert_eq!(leaf.rows[0].count, BigUint::one());
    }

    #[test]
    fn counts_free_variables() {
        let f = CnfFormula::new(3, vec![]);
        let td = crate::decompose::decompose(
            &crate::graphs::Graph::with_vertices([1, 2, 3]),
            crate::decompose::Heuristic::MinDegree,
            1,
        );
        assert_eq!(model_count(&f, &td, DEFAULT_ROW_BUDGET).unwrap(), BigUint::from(8u32));
        let empty_td =
            crate::decompose::decompose(&crate::graphs::Graph::new(), crate::decompose::Heuristic::MinDegree, 1);
        assert_eq!(
            model_count(&f, &empty_td, DEFAULT_ROW_BUDGET).unwrap(),
            BigUint::from(8u32)
        );
    }

    #[test]
    fn budget_enforced() {
        let f = CnfFormula::new(4, vec![]);
        let td = crate::decompose::TreeDecomposition::from_rooted(vec![vec![1, 2, 3, 4]], vec![vec![]], 0);
        let td = crate::decompose::make_nice(&td).unwrap();
        assert!(matches!(model_count(&f, &td, 8), Err(DpError::RowBudget { .. })));
    }
}
