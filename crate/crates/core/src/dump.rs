//! Plain-text table dumps. Nodes are numbered from 1 in post-order, rows from 1 in table
//! order, and assignments are written as the set of true bag variables.

use std::fmt::Write as _;

use crate::counting_dp::{SatTable, TableMap};
use crate::decompose::TreeDecomposition;
use crate::formula::Var;
use crate::nested_dp::NestedTable;
use crate::projected_dp::ProjTable;

fn set(vs: &[Var]) -> String {
    let parts: Vec<String> = vs.iter().map(Var::to_string).collect();
    format!("{{{}}}", parts.join(","))
}

fn true_set(bag: &[Var], mask: u64) -> String {
    let vs: Vec<Var> = bag
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &v)| v)
        .collect();
    format!("<{}>", set(&vs))
}

fn header(out: &mut String, tag: &str, td: &TreeDecomposition, t: usize) {
    let _ = write!(out, "{tag} t{}", t + 1);
    if let Some(k) = td.kind(t) {
        let _ = write!(out, " {k}");
    }
    let _ = writeln!(out, " bag={}", set(td.bag(t)));
}

/// SAT tables with rows outside every satisfiable extension marked `purged`.
pub fn dump_sat(td: &TreeDecomposition, tables: &TableMap, marks: Option<&[Vec<bool>]>) -> String {
    let mut out = String::new();
    for (t, table) in tables.iter().enumerate() {
        let Some(table) = table else { continue };
        header(&mut out, "sat", td, t);
        for (i, row) in table.rows.iter().enumerate() {
            let _ = write!(
                out,
                "u{}.{} {} {}",
                t + 1,
                i + 1,
                true_set(&table.bag, row.assignment),
                row.count
            );
            if marks.is_some_and(|m| !m[t][i]) {
                out.push_str(" purged");
            }
            out.push('\n');
        }
    }
    out
}

/// PROJ tables: one row per non-empty set of equal-projection rows of the purged SAT table.
pub fn dump_proj(td: &TreeDecomposition, purged: &TableMap, proj: &[Option<ProjTable>]) -> String {
    let mut out = String::new();
    for (t, table) in proj.iter().enumerate() {
        let (Some(table), Some(sat)) = (table, purged[t].as_ref()) else {
            continue;
        };
        header(&mut out, "proj", td, t);
        let mut k = 0;
        for class in &table.classes {
            for sm in 1..class.counters.len() {
                k += 1;
                let rows: Vec<String> = (0..class.rows.len())
                    .filter(|b| sm >> b & 1 == 1)
                    .map(|b| row_set(sat, class.rows[b] as usize))
                    .collect();
                let _ = writeln!(out, "v{}.{} {{{}}} {}", t + 1, k, rows.join(","), class.counters[sm]);
            }
        }
    }
    out
}

fn row_set(sat: &SatTable, i: usize) -> String {
    true_set(&sat.bag, sat.rows[i].assignment)
}

pub fn dump_nested(td: &TreeDecomposition, tables: &[Option<NestedTable>]) -> String {
    let mut out = String::new();
    for (t, table) in tables.iter().enumerate() {
        let Some(table) = table else { continue };
        header(&mut out, "nested", td, t);
        for (i, (m, c)) in table.rows.iter().enumerate() {
            let _ = writeln!(out, "n{}.{} {} {}", t + 1, i + 1, true_set(&table.bag, *m), c);
        }
    }
    out
}
