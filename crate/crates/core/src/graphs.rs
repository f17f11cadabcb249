//! Primal and nested primal graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::formula::{CnfFormula, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("abstraction variable {0} does not occur in the formula")]
    NotAVariable(Var),
}

/// Simple undirected graph over variable ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    adj: BTreeMap<Var, BTreeSet<Var>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn with_vertices(vertices: impl IntoIterator<Item = Var>) -> Self {
        Graph {
            adj: vertices.into_iter().map(|v| (v, BTreeSet::new())).collect(),
        }
    }

    pub fn add_vertex(&mut self, v: Var) {
        self.adj.entry(v).or_default();
    }

    /// Self-loops are ignored.
    pub fn add_edge(&mut self, u: Var, v: Var) {
        self.add_vertex(u);
        self.add_vertex(v);
        if u != v {
            self.adj.get_mut(&u).unwrap().insert(v);
            self.adj.get_mut(&v).unwrap().insert(u);
        }
    }

    pub fn add_clique(&mut self, vs: &[Var]) {
        for (i, &u) in vs.iter().enumerate() {
            self.add_vertex(u);
            for &v in &vs[i + 1..] {
                self.add_edge(u, v);
            }
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = Var> + '_ {
        self.adj.keys().copied()
    }

    pub fn contains(&self, v: Var) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn neighbors(&self, v: Var) -> impl Iterator<Item = Var> + '_ {
        self.adj.get(&v).into_iter().flatten().copied()
    }

    pub fn degree(&self, v: Var) -> usize {
        self.adj.get(&v).map_or(0, BTreeSet::len)
    }

    pub fn has_edge(&self, u: Var, v: Var) -> bool {
        self.adj.get(&u).is_some_and(|n| n.contains(&v))
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as ascending pairs `(u, v)` with `u < v`.
    pub fn edges(&self) -> Vec<(Var, Var)> {
        self.adj
            .iter()
            .flat_map(|(&u, n)| n.range(u + 1..).map(move |&v| (u, v)))
            .collect()
    }

    /// Subgraph induced by the vertices not in `removed`.
    pub fn without(&self, removed: &BTreeSet<Var>) -> Graph {
        Graph {
            adj: self
                .adj
                .iter()
                .filter(|(v, _)| !removed.contains(v))
                .map(|(&v, n)| (v, n.iter().copied().filter(|u| !removed.contains(u)).collect()))
                .collect(),
        }
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph G {\n");
        for v in self.vertices() {
            let _ = writeln!(out, "  {v};");
        }
        for (u, v) in self.edges() {
            let _ = writeln!(out, "  {u} -- {v};");
        }
        out.push_str("}\n");
        out
    }
}

/// Variables joined whenever they share a clause.
pub fn primal_graph(f: &CnfFormula) -> Graph {
    let mut g = Graph::with_vertices(f.vars().iter().copied());
    let mut vs = Vec::new();
    for c in f.clauses() {
        vs.clear();
        vs.extend(c.iter().map(|l| l.var()));
        g.add_clique(&vs);
    }
    g
}

/// Connected components, each ascending, ordered by their minimum vertex.
pub fn connected_components(g: &Graph) -> Vec<Vec<Var>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in g.vertices() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for w in g.neighbors(u) {
                if seen.insert(w) {
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Components of `primal - a` paired with their neighbourhood in `a`.
pub fn components_outside(primal: &Graph, a: &BTreeSet<Var>) -> Vec<(Vec<Var>, Vec<Var>)> {
    connected_components(&primal.without(a))
        .into_iter()
        .map(|comp| {
            let nb: BTreeSet<Var> = comp
                .iter()
                .flat_map(|&u| primal.neighbors(u))
                .filter(|w| a.contains(w))
                .collect();
            (comp, nb.into_iter().collect())
        })
        .collect()
}

/// The graph on `a` whose edges join variables connected by a path with all interior
/// vertices outside `a`.
pub fn nested_primal_graph(f: &CnfFormula, a: &[Var]) -> Result<Graph, GraphError> {
    if let Some(&v) = a.iter().find(|v| f.vars().binary_search(v).is_err()) {
        return Err(GraphError::NotAVariable(v));
    }
    let primal = primal_graph(f);
    let aset: BTreeSet<Var> = a.iter().copied().collect();
    let mut g = Graph::with_vertices(aset.iter().copied());
    for &u in &aset {
        for w in primal.neighbors(u) {
            if aset.contains(&w) {
                g.add_edge(u, w);
            }
        }
    }
    for (_, nb) in components_outside(&primal, &aset) {
        g.add_clique(&nb);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> CnfFormula {
        CnfFormula::from_ints(4, &[&[-1, 2, 3], &[1, -2, -3], &[1, 4], &[1, -4]])
    }

    #[test]
    fn primal_example() {
        let g = primal_graph(&ex1());
        assert_eq!(g.edges(), vec![(1, 2), (1, 3), (1, 4), (2, 3)]);
        assert_eq!(primal_graph(&CnfFormula::new(0, vec![])).num_vertices(), 0);
        let tri = primal_graph(&CnfFormula::from_ints(3, &[&[1, 2, 3]]));
        assert_eq!(tri.edges(), vec![(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn components_examples() {
        let g = primal_graph(&ex1());
        assert_eq!(connected_components(&g), vec![vec![1, 2, 3, 4]]);
        let h = g.without(&[1, 2].into_iter().collect());
        assert_eq!(connected_components(&h), vec![vec![3], vec![4]]);
        assert!(connected_components(&Graph::new()).is_empty());
    }

    #[test]
    fn nested_examples() {
        let f = ex1();
        assert_eq!(nested_primal_graph(&f, &[1, 2]).unwrap().edges(), vec![(1, 2)]);
        assert_eq!(nested_primal_graph(&f, &[3, 4]).unwrap().edges(), vec![(3, 4)]);
        assert_eq!(nested_primal_graph(&f, &[1, 2, 3, 4]).unwrap(), primal_graph(&f));
        assert_eq!(nested_primal_graph(&f, &[7]), Err(GraphError::NotAVariable(7)));
    }

    #[test]
    fn dot_lists_edges() {
        let dot = primal_graph(&ex1()).to_dot();
        assert!(dot.contains("1 -- 2;"));
    }
}
