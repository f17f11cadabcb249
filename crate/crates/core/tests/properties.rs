use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;

use tdcount_core::counting_dp::{bag_formula, model_count, purge, run_dp, DEFAULT_ROW_BUDGET};
use tdcount_core::decompose::{
    decompose, heuristic_order, make_nice, parse_pace, td_from_order, validate_td, Heuristic, TreeDecomposition,
};
use tdcount_core::dump::{dump_proj, dump_sat};
use tdcount_core::error::SolveError;
use tdcount_core::formula::{
    apply_assignment, canonical_instance_key, canonical_key, parse_dimacs, satisfies, unit_propagate, Assignment,
    CnfFormula, Literal, PropagationStatus, Var,
};
use tdcount_core::graphs::{nested_primal_graph, primal_graph, Graph};
use tdcount_core::hybrid::{count, internal_fallback_count, preprocess, SolverConfig};
use tdcount_core::nested_dp::{compute_abstraction_context, run_nested_dp, CompatTieBreak, SubJob};
use tdcount_core::oracle::{brute_count, brute_pmc, nesting_path_graph};
use tdcount_core::projected_dp::{monotonicity_violations, pcnt, pmc_count, proj_bound, run_proj, ProjTable};

fn formula(max_vars: u32, max_clauses: usize) -> impl Strategy<Value = CnfFormula> {
    (1..=max_vars).prop_flat_map(move |n| {
        prop::collection::vec(prop::collection::vec((1..=n, any::<bool>()), 1..=4), 0..=max_clauses).prop_map(
            move |cs| {
                CnfFormula::new(
                    n,
                    cs.into_iter()
                        .map(|c| c.into_iter().map(|(v, s)| Literal::new(v, s)).collect()),
                )
            },
        )
    })
}

fn subset(vs: &[Var], mask: u64) -> Vec<Var> {
    vs.iter()
        .enumerate()
        .filter(|(i, _)| mask >> (i % 64) & 1 == 1)
        .map(|(_, &v)| v)
        .collect()
}

fn heuristic_td(g: &Graph, h: Heuristic, seed: u64) -> TreeDecomposition {
    td_from_order(g, &heuristic_order(g, h, seed))
}

fn brute_jobs(_: usize, jobs: Vec<SubJob>) -> Result<Vec<BigUint>, SolveError> {
    Ok(jobs
        .iter()
        .map(|j| brute_pmc(&j.formula, &j.projection).unwrap())
        .collect())
}

fn eval(f: &CnfFormula, j: &Assignment) -> bool {
    f.clauses()
        .iter()
        .all(|c| c.iter().any(|l| l.eval(j.get(l.var()).unwrap())))
}

const HEURISTICS: [(Heuristic, u64); 5] = [
    (Heuristic::MinFill, 0),
    (Heuristic::MinFill, 7),
    (Heuristic::MinDegree, 1),
    (Heuristic::MinDegree, 99),
    (Heuristic::MinFill, 12345),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn satisfies_matches_clause_evaluation(f in formula(8, 12), bits in any::<u64>()) {
        let j: Assignment = f.universe().iter().map(|&v| (v, bits >> v & 1 == 1)).collect();
        prop_assert_eq!(satisfies(&j, &f).unwrap(), eval(&f, &j));
    }

    #[test]
    fn assignments_compose(f in formula(8, 12), dom in any::<u64>(), split in any::<u64>(), vals in any::<u64>()) {
        let vars = subset(f.universe(), dom);
        let (a, b): (Vec<Var>, Vec<Var>) = vars.iter().partition(|&&v| split >> v & 1 == 1);
        let mk = |vs: &[Var]| -> Assignment { vs.iter().map(|&v| (v, vals >> v & 1 == 1)).collect() };
        let both: Assignment = mk(&a).iter().chain(mk(&b).iter()).collect();
        prop_assert_eq!(apply_assignment(&apply_assignment(&f, &mk(&a)), &mk(&b)), apply_assignment(&f, &both));
    }

    #[test]
    fn unit_propagation_preserves_counts(f in formula(8, 12), mask in any::<u64>()) {
        let p = subset(f.universe(), mask);
        let prop = unit_propagate(&f);
        if prop.status == PropagationStatus::Unsat {
            prop_assert_eq!(brute_pmc(&f, &p).unwrap(), BigUint::from(0u32));
        } else {
            let g = &prop.formula;
            let rest: Vec<Var> = p.iter().copied().filter(|&v| prop.forced.get(v).is_none()).collect();
            prop_assert_eq!(brute_pmc(&f, &p).unwrap(), brute_pmc(g, &rest).unwrap());
            prop_assert!(g.clauses().iter().all(|c| c.len() >= 2));
        }
    }

    #[test]
    fn canonical_keys_ignore_renaming(f in formula(8, 12), shift in 1u32..50) {
        let renamed = CnfFormula::with_universe(
            f.universe().iter().map(|v| v + shift),
            f.clauses().iter().rev().map(|c| c.iter().map(|l| Literal::new(l.var() + shift, l.is_positive())).collect()),
        );
        prop_assert_eq!(canonical_key(&f), canonical_key(&renamed));
        let p: Vec<Var> = f.vars().to_vec();
        let q: Vec<Var> = p.iter().map(|v| v + shift).collect();
        prop_assert_eq!(canonical_instance_key(&f, &p), canonical_instance_key(&renamed, &q));
    }

    #[test]
    fn dimacs_round_trip(f in formula(8, 12), mask in any::<u64>()) {
        let p = subset(f.universe(), mask);
        let inst = parse_dimacs(&f.to_dimacs(Some(&p))).unwrap();
        prop_assert_eq!(&inst.formula, &f);
        prop_assert_eq!(inst.projection, p);
    }

    #[test]
    fn nested_graph_matches_path_definition(f in formula(10, 14), mask in any::<u64>()) {
        let a: Vec<Var> = subset(f.vars(), mask);
        prop_assert_eq!(nested_primal_graph(&f, &a).unwrap(), nesting_path_graph(&f, &a));
        prop_assert_eq!(nested_primal_graph(&f, f.vars()).unwrap(), primal_graph(&f));
    }

    #[test]
    fn decompositions_are_valid(f in formula(12, 20), seed in any::<u64>(), md in any::<bool>()) {
        let g = primal_graph(&f);
        let h = if md { Heuristic::MinDegree } else { Heuristic::MinFill };
        let td = heuristic_td(&g, h, seed);
        prop_assert!(validate_td(&td, &g).is_empty());
        let nice = make_nice(&td).unwrap();
        prop_assert!(nice.is_nice());
        prop_assert!(validate_td(&nice, &g).is_empty());
        prop_assert!(nice.width() <= td.width());
        prop_assert_eq!(decompose(&g, h, seed), decompose(&g, h, seed));
        let pace = nice.to_pace(f.universe().len());
        prop_assert_eq!(parse_pace(&pace).unwrap(), nice);
    }

    #[test]
    fn model_count_matches_oracle(f in formula(12, 30)) {
        let want = brute_count(&f).unwrap();
        for (h, seed) in HEURISTICS {
            let td = decompose(&primal_graph(&f), h, seed);
            prop_assert_eq!(&model_count(&f, &td, DEFAULT_ROW_BUDGET).unwrap(), &want);
        }
    }

    #[test]
    fn sat_tables_are_bounded_and_sound(f in formula(10, 20), seed in any::<u64>()) {
        let td = decompose(&primal_graph(&f), Heuristic::MinFill, seed);
        let tables = run_dp(&f, &td, true, DEFAULT_ROW_BUDGET).unwrap();
        for (t, table) in tables.iter().enumerate() {
            let table = table.as_ref().unwrap();
            prop_assert!(table.len() <= 1 << td.bag(t).len());
            let ft = bag_formula(&f, td.bag(t));
            for row in &table.rows {
                let j = Assignment::from_true_set(td.bag(t), &table.true_vars(row.assignment));
                prop_assert!(eval(&ft, &j));
            }
        }
        let purged = purge(&tables, &td);
        let root = td.root();
        prop_assert_eq!(&purged[root], &tables[root]);
    }

    #[test]
    fn pmc_matches_oracle(f in formula(10, 24), mask in any::<u64>()) {
        let p = subset(f.universe(), mask);
        let want = brute_pmc(&f, &p).unwrap();
        for (h, seed) in HEURISTICS {
            let td = decompose(&primal_graph(&f), h, seed);
            prop_assert_eq!(&pmc_count(&f, &p, &td, DEFAULT_ROW_BUDGET).unwrap(), &want);
        }
    }

    #[test]
    fn proj_tables_respect_bounds(f in formula(8, 16), mask in any::<u64>(), seed in any::<u64>()) {
        let p = subset(f.universe(), mask);
        let td = decompose(&primal_graph(&f), Heuristic::MinDegree, seed);
        let run = run_proj(&f, &p, &td, DEFAULT_ROW_BUDGET, true).unwrap();
        for (t, table) in run.proj.iter().enumerate() {
            let table = table.as_ref().unwrap();
            if let Some(b) = proj_bound(td.bag(t).len()) {
                prop_assert!(table.num_rows() as u128 <= b);
            }
            prop_assert_eq!(monotonicity_violations(table), 0);
        }
        let root = td.root();
        let root_sat = run.purged[root].as_ref().unwrap();
        let children: Vec<&ProjTable> = td.children(root).iter().map(|&c| run.proj[c].as_ref().unwrap()).collect();
        let all: Vec<u32> = (0..root_sat.len() as u32).collect();
        let via_pcnt = if all.is_empty() { BigUint::from(0u32) } else { pcnt(root_sat, &all, &children) };
        prop_assert_eq!(run.proj[root].as_ref().unwrap().total(), via_pcnt);
    }

    #[test]
    fn nested_dp_matches_oracle(f in formula(10, 20), pmask in any::<u64>(), amask in any::<u64>(), counting in any::<bool>()) {
        let p = if counting { f.universe().to_vec() } else { subset(f.universe(), pmask) };
        let cand: Vec<Var> = p.iter().copied().filter(|v| f.vars().binary_search(v).is_ok()).collect();
        let a = subset(&cand, amask);
        let g = nested_primal_graph(&f, &a).unwrap();
        let td = heuristic_td(&g, Heuristic::MinFill, amask);
        let want = brute_pmc(&f, &p).unwrap();
        let mut sub = brute_jobs;
        for tie in [CompatTieBreak::FirstInPostOrder, CompatTieBreak::LastInPostOrder] {
            let run = run_nested_dp(0, &f, &p, &a, &td, DEFAULT_ROW_BUDGET, tie, false, &mut sub).unwrap();
            prop_assert_eq!(&run.count, &want);
        }
        let ctx = compute_abstraction_context(&f, &a, &td, CompatTieBreak::default()).unwrap();
        let aset: BTreeSet<Var> = a.iter().copied().collect();
        let per_node: usize = ctx.nested_bag_formulas.iter().map(|g| g.vars().iter().filter(|v| !aset.contains(v)).count()).sum();
        prop_assert_eq!(per_node, f.vars().len() - a.len());
    }

    #[test]
    fn preprocessing_preserves_counts(f in formula(10, 20), mask in any::<u64>()) {
        let p = subset(f.universe(), mask);
        let pre = preprocess(&f, &p);
        let want = brute_pmc(&f, &p).unwrap();
        if pre.unsat {
            prop_assert_eq!(want, BigUint::from(0u32));
        } else {
            prop_assert_eq!(want, pre.multiplier() * brute_pmc(&pre.formula, &pre.projection).unwrap());
        }
        prop_assert_eq!(internal_fallback_count(&f, &p).unwrap(), brute_pmc(&f, &p).unwrap());
    }

    #[test]
    fn oracle_relations(f in formula(8, 12), extra in formula(8, 3)) {
        prop_assert_eq!(brute_pmc(&f, f.universe()).unwrap(), brute_count(&f).unwrap());
        let n = f.num_vars().max(extra.num_vars());
        let base = CnfFormula::new(n, f.clauses().to_vec());
        let more = CnfFormula::new(n, f.clauses().iter().chain(extra.clauses()).cloned());
        let p: Vec<Var> = (1..=n).filter(|v| v % 2 == 0).collect();
        prop_assert!(brute_pmc(&more, &p).unwrap() <= brute_pmc(&base, &p).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hybrid_matches_oracle_in_every_corner(f in formula(9, 18), mask in any::<u64>()) {
        let p = subset(f.universe(), mask);
        let want = brute_pmc(&f, &p).unwrap();
        for abstr in [0, 8, usize::MAX] {
            for depth in 0..=2 {
                for cache in [true, false] {
                    let cfg = SolverConfig {
                        threshold_abstr: abstr,
                        threshold_depth: depth,
                        use_cache: cache,
                        inline_eval_vars: 0,
                        ..SolverConfig::pmc_defaults()
                    };
                    let (c, stats) = count(&f, &p, &cfg).unwrap();
                    prop_assert_eq!(&c, &want);
                    prop_assert!(stats.max_depth <= depth);
                }
            }
        }
    }

    #[test]
    fn dumps_are_deterministic(f in formula(8, 14), mask in any::<u64>(), seed in any::<u64>()) {
        let p = subset(f.universe(), mask);
        let dump = || {
            let td = decompose(&primal_graph(&f), Heuristic::MinFill, seed);
            let run = run_proj(&f, &p, &td, DEFAULT_ROW_BUDGET, true).unwrap();
            format!("{}{}", dump_sat(&td, &run.sat, Some(&run.marks)), dump_proj(&td, &run.purged, &run.proj))
        };
        prop_assert_eq!(dump(), dump());
        let cfg = SolverConfig { threshold_abstr: 0, inline_eval_vars: 0, td_seed: seed, ..SolverConfig::pmc_defaults() };
        prop_assert_eq!(count(&f, &p, &cfg).unwrap(), count(&f, &p, &cfg).unwrap());
    }
}
