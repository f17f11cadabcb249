//! Second pass for projected counting: equivalence classes of purged SAT rows and the
//! inclusion-exclusion counters of the PROJ table algorithm.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, Zero};

use crate::counting_dp::{free_factor, purge, purge_marks, run_dp, DpError, Origin, SatTable, TableMap};
use crate::decompose::{NodeKind, TreeDecomposition};
use crate::formula::{CnfFormula, Var};

/// One equivalence class of SAT rows and a counter for each non-empty subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjClass {
    /// The class's shared assignment on projection variables (bits over the bag).
    pub projection: u64,
    /// SAT row indices in ascending assignment order; subset masks index into this list.
    pub rows: Vec<u32>,
    /// `counters[mask]` is ipmc of the subset `mask`; entry 0 is unused.
    pub counters: Vec<BigUint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjTable {
    pub node: usize,
    pub classes: Vec<ProjClass>,
    /// For every SAT row: its class and bit position within that class.
    pub row_class: Vec<(u32, u32)>,
}

impl ProjTable {
    /// Number of ⟨σ, c⟩ rows.
    pub fn num_rows(&self) -> usize {
        self.classes.iter().map(|c| c.counters.len() - 1).sum()
    }

    /// Stored counter for a set of SAT rows, or `None` if it is empty or spans classes.
    pub fn counter(&self, rows: &[u32]) -> Option<&BigUint> {
        let (class, _) = *self.row_class.get(*rows.first()? as usize)?;
        let mut mask = 0usize;
        for &r in rows {
            let (c, bit) = self.row_class[r as usize];
            if c != class {
                return None;
            }
            mask |= 1 << bit;
        }
        Some(&self.classes[class as usize].counters[mask])
    }

    pub fn total(&self) -> BigUint {
        self.classes.iter().flat_map(|c| c.counters.iter().skip(1)).sum()
    }
}

fn projection_mask(bag: &[Var], p: &[Var]) -> u64 {
    bag.iter()
        .enumerate()
        .filter(|(_, v)| p.binary_search(v).is_ok())
        .map(|(i, _)| 1u64 << i)
        .sum()
}

/// Partition of the rows by their assignment restricted to `p`, ordered by that restriction.
pub fn buckets(table: &SatTable, p: &[Var]) -> Vec<Vec<usize>> {
    let pm = projection_mask(&table.bag, p);
    let mut by: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        by.entry(r.assignment & pm).or_default().push(i);
    }
    by.into_values().collect()
}

/// Product over children of the stored counter for the `i`-th components of `o`;
/// zero when a component set spans classes.
pub fn sipmc(children: &[&ProjTable], o: &[Origin]) -> BigUint {
    let mut acc = BigUint::one();
    for (i, child) in children.iter().enumerate() {
        let mut comp: Vec<u32> = o.iter().map(|t| t[i]).collect();
        comp.sort_unstable();
        comp.dedup();
        match child.counter(&comp) {
            Some(c) => acc *= c,
            None => return BigUint::zero(),
        }
    }
    acc
}

fn origins_of(table: &SatTable, sigma: &[u32]) -> Vec<Origin> {
    let mut out: Vec<Origin> = sigma
        .iter()
        .flat_map(|&u| table.rows[u as usize].origins.iter().cloned())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Inclusion-exclusion over all non-empty sets of origins of `sigma`, evaluated literally.
/// Exponential in the number of origins; the table step uses an equivalent transform.
pub fn pcnt(table: &SatTable, sigma: &[u32], children: &[&ProjTable]) -> BigUint {
    let origins = origins_of(table, sigma);
    assert!(origins.len() < 32, "literal pcnt over {} origins", origins.len());
    let mut sum = BigInt::zero();
    for mask in 1u32..1 << origins.len() {
        let o: Vec<Origin> = (0..origins.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| origins[i].clone())
            .collect();
        let term = BigInt::from(sipmc(children, &o));
        if mask.count_ones() % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.to_biguint().expect("pcnt is a union size")
}

/// ipmc by its recursive definition, memoized on `sigma`.
pub fn ipmc(
    kind: NodeKind,
    table: &SatTable,
    sigma: &[u32],
    children: &[&ProjTable],
    memo: &mut HashMap<Vec<u32>, BigUint>,
) -> BigUint {
    if kind == NodeKind::Leaf {
        return BigUint::one();
    }
    let mut key = sigma.to_vec();
    key.sort_unstable();
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let mut acc = BigInt::from(pcnt(table, &key, children));
    let m = key.len();
    for mask in 1u32..(1u32 << m) - 1 {
        let rho: Vec<u32> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| key[i]).collect();
        let v = BigInt::from(ipmc(kind, table, &rho, children, memo));
        if rho.len().is_multiple_of(2) {
            acc += v;
        } else {
            acc -= v;
        }
    }
    let out = acc.abs().to_biguint().unwrap();
    memo.insert(key, out.clone());
    out
}

/// Σ over classes of (2^|C| - 1), saturating.
fn proj_size(classes: &[Vec<usize>]) -> usize {
    classes.iter().fold(0usize, |acc, c| {
        let n = if c.len() >= usize::BITS as usize - 1 {
            usize::MAX
        } else {
            (1usize << c.len()) - 1
        };
        acc.saturating_add(n)
    })
}

/// Upper bound 2^(2^|bag|) from the table-size argument, or `None` if it does not fit in a u128.
pub fn proj_bound(bag_len: usize) -> Option<u128> {
    let e = 1u128.checked_shl(bag_len as u32)?;
    if e >= 128 {
        None
    } else {
        Some(1u128 << e)
    }
}

fn signed(v: &BigUint, negative: bool) -> BigInt {
    BigInt::from_biguint(if negative { Sign::Minus } else { Sign::Plus }, v.clone())
}

/// One PROJ step: a counter for every non-empty subset of every class of the purged table.
///
/// pcnt is evaluated per class as a subset-sum transform over origin tuples grouped by the
/// child classes they fall in, and ipmc as the Möbius inverse of pcnt.
pub fn proj_table_step(
    node: usize,
    kind: NodeKind,
    p: &[Var],
    children: &[&ProjTable],
    purged: &SatTable,
    row_budget: usize,
) -> Result<ProjTable, DpError> {
    let classes = buckets(purged, p);
    let size = proj_size(&classes);
    if size > row_budget {
        return Err(DpError::ProjBudget {
            node,
            rows: size,
            budget: row_budget,
        });
    }
    let mut row_class = vec![(0u32, 0u32); purged.rows.len()];
    for (ci, c) in classes.iter().enumerate() {
        for (bit, &r) in c.iter().enumerate() {
            row_class[r] = (ci as u32, bit as u32);
        }
    }
    let mut out = Vec::with_capacity(classes.len());
    for c in &classes {
        let m = c.len();
        let counters = if kind == NodeKind::Leaf {
            vec![BigUint::one(); 1 << m]
        } else {
            class_counters(purged, c, children)
        };
        let mut counters = counters;
        counters[0] = BigUint::zero();
        out.push(ProjClass {
            projection: purged.rows[c[0]].assignment & projection_mask(&purged.bag, p),
            rows: c.iter().map(|&r| r as u32).collect(),
            counters,
        });
    }
    Ok(ProjTable {
        node,
        classes: out,
        row_class,
    })
}

fn class_counters(purged: &SatTable, class: &[usize], children: &[&ProjTable]) -> Vec<BigUint> {
    let m = class.len();
    // Distinct origin tuples of the class, grouped by the child classes of their components.
    let mut groups: BTreeMap<Vec<u32>, Vec<Origin>> = BTreeMap::new();
    let mut row_tuples: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    let mut seen: HashMap<Origin, (usize, usize)> = HashMap::new();
    let mut group_ids: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut group_keys: Vec<Vec<u32>> = Vec::new();
    for (bit, &r) in class.iter().enumerate() {
        for o in &purged.rows[r].origins {
            let loc = *seen.entry(o.clone()).or_insert_with(|| {
                let key: Vec<u32> = o
                    .iter()
                    .enumerate()
                    .map(|(i, &ci)| children[i].row_class[ci as usize].0)
                    .collect();
                let g = *group_ids.entry(key.clone()).or_insert_with(|| {
                    group_keys.push(key.clone());
                    group_keys.len() - 1
                });
                let list = groups.entry(key).or_default();
                list.push(o.clone());
                (g, list.len() - 1)
            });
            row_tuples[bit].push(loc);
        }
    }

    let mut pcnt = vec![BigInt::zero(); 1 << m];
    for (g, key) in group_keys.iter().enumerate() {
        let tuples = &groups[key];
        let s = tuples.len();
        // child-class bit masks of each tuple component
        let comp_bits: Vec<Vec<usize>> = tuples
            .iter()
            .map(|o| {
                o.iter()
                    .enumerate()
                    .map(|(i, &ci)| 1usize << children[i].row_class[ci as usize].1)
                    .collect()
            })
            .collect();
        let d = children.len();
        let child_counters: Vec<&Vec<BigUint>> =
            (0..d).map(|i| &children[i].classes[key[i] as usize].counters).collect();
        let mut bits = vec![vec![0usize; d]; 1 << s];
        let mut zeta = vec![BigInt::zero(); 1 << s];
        for om in 1usize..1 << s {
            let low = om.trailing_zeros() as usize;
            let prev = om & (om - 1);
            for i in 0..d {
                bits[om][i] = bits[prev][i] | comp_bits[low][i];
            }
            let mut prod = BigUint::one();
            for i in 0..d {
                prod *= &child_counters[i][bits[om][i]];
            }
            zeta[om] = signed(&prod, om.count_ones() % 2 == 0);
        }
        for i in 0..s {
            for om in 0..1usize << s {
                if om >> i & 1 == 1 {
                    let lower = zeta[om ^ (1 << i)].clone();
                    zeta[om] += lower;
                }
            }
        }
        // tuple mask of each row within this group, then of each subset of rows
        let row_mask: Vec<usize> = row_tuples
            .iter()
            .map(|ts| {
                ts.iter()
                    .filter(|(gg, _)| *gg == g)
                    .fold(0, |acc, &(_, j)| acc | 1 << j)
            })
            .collect();
        let mut sub = vec![0usize; 1 << m];
        for sm in 1usize..1 << m {
            let low = sm.trailing_zeros() as usize;
            sub[sm] = sub[sm & (sm - 1)] | row_mask[low];
            pcnt[sm] += &zeta[sub[sm]];
        }
    }
    for i in 0..m {
        for sm in 0..1usize << m {
            if sm >> i & 1 == 1 {
                let lower = pcnt[sm ^ (1 << i)].clone();
                pcnt[sm] -= lower;
            }
        }
    }
    pcnt.into_iter().map(|v| v.abs().to_biguint().unwrap()).collect()
}

/// Everything the two passes produce, for inspection and dumps.
#[derive(Debug, Clone)]
pub struct ProjRun {
    pub sat: TableMap,
    pub marks: Vec<Vec<bool>>,
    pub purged: TableMap,
    pub proj: Vec<Option<ProjTable>>,
    pub count: BigUint,
}

/// SAT pass, purge, then PROJ pass in post-order. With `keep == false` only counts are kept.
pub fn run_proj(
    f: &CnfFormula,
    p: &[Var],
    td: &TreeDecomposition,
    row_budget: usize,
    keep: bool,
) -> Result<ProjRun, DpError> {
    let factor = free_factor(f, td, p)?;
    let sat = run_dp(f, td, true, row_budget)?;
    let marks = if keep { purge_marks(&sat, td) } else { Vec::new() };
    let purged = purge(&sat, td);
    let mut proj: Vec<Option<ProjTable>> = vec![None; td.num_nodes()];
    for t in 0..td.num_nodes() {
        let table = {
            let ch: Vec<&ProjTable> = td.children(t).iter().map(|&c| proj[c].as_ref().unwrap()).collect();
            proj_table_step(t, td.kind(t).unwrap(), p, &ch, purged[t].as_ref().unwrap(), row_budget)?
        };
        debug_assert!(proj_bound(td.bag(t).len()).is_none_or(|b| table.num_rows() as u128 <= b));
        proj[t] = Some(table);
        if !keep {
            for &c in td.children(t) {
                proj[c] = None;
            }
        }
    }
    let count = proj[td.root()].as_ref().unwrap().total() * factor;
    if keep {
        Ok(ProjRun {
            sat,
            marks,
            purged,
            proj,
            count,
        })
    } else {
        Ok(ProjRun {
            sat: Vec::new(),
            marks,
            purged: Vec::new(),
            proj: Vec::new(),
            count,
        })
    }
}

/// Projected model count of (F, P) over the decomposition.
pub fn pmc_count(f: &CnfFormula, p: &[Var], td: &TreeDecomposition, row_budget: usize) -> Result<BigUint, DpError> {
    Ok(run_proj(f, p, td, row_budget, false)?.count)
}

/// Pairs `(σ, σ ∪ {r})` within a class whose counters increase, which intersections forbid.
pub fn monotonicity_violations(table: &ProjTable) -> usize {
    let mut bad = 0;
    for c in &table.classes {
        for sm in 1..c.counters.len() {
            for bit in 0..c.rows.len() {
                let sup = sm | 1 << bit;
                if sup != sm && c.counters[sup] > c.counters[sm] {
                    bad += 1;
                }
            }
        }
    }
    bad
}
