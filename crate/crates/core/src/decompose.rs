//! Tree decompositions: heuristic elimination orders, nice normal form, validation and PACE `.td` I/O.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::Var;
use crate::graphs::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Heuristic {
    #[serde(rename = "min-fill")]
    MinFill,
    #[serde(rename = "min-degree")]
    MinDegree,
}

impl FromStr for Heuristic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min-fill" => Ok(Heuristic::MinFill),
            "min-degree" => Ok(Heuristic::MinDegree),
            _ => Err(format!("unknown heuristic '{s}' (expected min-fill or min-degree)")),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::MinFill => "min-fill",
            Heuristic::MinDegree => "min-degree",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Leaf,
    Intro(Var),
    Rem(Var),
    Join,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Leaf => write!(f, "leaf"),
            NodeKind::Intro(v) => write!(f, "int:{v}"),
            NodeKind::Rem(v) => write!(f, "rem:{v}"),
            NodeKind::Join => write!(f, "join"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Violation {
    UncoveredVertex(Var),
    UncoveredEdge(Var, Var),
    Disconnected(Var),
    NiceTyping { node: usize, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UncoveredVertex(v) => write!(f, "uncovered vertex {v}"),
            Violation::UncoveredEdge(u, v) => write!(f, "edge coverage: {{{u},{v}}} in no bag"),
            Violation::Disconnected(v) => write!(f, "connectedness: bags containing {v} are not a subtree"),
            Violation::NiceTyping { node, reason } => write!(f, "nice typing at t{}: {reason}", node + 1),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TdError {
    #[error("td line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("not a tree: {0}")]
    NotATree(String),
    #[error("invalid tree decomposition: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// A rooted tree decomposition. Node ids are post-order ranks, so children precede
/// parents and the root is the last node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    bags: Vec<Vec<Var>>,
    children: Vec<Vec<usize>>,
    kinds: Option<Vec<NodeKind>>,
}

fn postorder(children: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(children.len());
    let mut stack = vec![(root, 0usize)];
    while let Some((node, next)) = stack.pop() {
        if next < children[node].len() {
            stack.push((node, next + 1));
            stack.push((children[node][next], 0));
        } else {
            out.push(node);
        }
    }
    out
}

impl TreeDecomposition {
    /// Builds a decomposition from an arbitrary rooted tree. Children are ordered by the
    /// minimum input id in their subtree, then nodes are renumbered in post-order.
    pub fn from_rooted(bags: Vec<Vec<Var>>, mut children: Vec<Vec<usize>>, root: usize) -> Self {
        let order = postorder(&children, root);
        let mut submin: Vec<usize> = (0..bags.len()).collect();
        for &t in &order {
            let m = children[t].iter().map(|&c| submin[c]).min().unwrap_or(t).min(t);
            submin[t] = m;
        }
        for ch in children.iter_mut() {
            ch.sort_by_key(|&c| submin[c]);
        }
        let order = postorder(&children, root);
        let mut rank = vec![usize::MAX; bags.len()];
        for (i, &t) in order.iter().enumerate() {
            rank[t] = i;
        }
        let mut new_bags = Vec::with_capacity(order.len());
        let mut new_children = Vec::with_capacity(order.len());
        for &t in &order {
            let mut b = bags[t].clone();
            b.sort_unstable();
            b.dedup();
            new_bags.push(b);
            new_children.push(children[t].iter().map(|&c| rank[c]).collect());
        }
        let mut td = TreeDecomposition {
            bags: new_bags,
            children: new_children,
            kinds: None,
        };
        td.kinds = td.infer_kinds();
        td
    }

    /// Typing of a nice decomposition, if this one is nice.
    fn infer_kinds(&self) -> Option<Vec<NodeKind>> {
        if !self.bags[self.root()].is_empty() {
            return None;
        }
        let mut kinds = Vec::with_capacity(self.bags.len());
        for (t, bag) in self.bags.iter().enumerate() {
            let ch = &self.children[t];
            let kind = match ch.len() {
                0 if bag.is_empty() => NodeKind::Leaf,
                1 => {
                    let cb = &self.bags[ch[0]];
                    if bag.len() == cb.len() + 1 && cb.iter().all(|v| bag.binary_search(v).is_ok()) {
                        NodeKind::Intro(*bag.iter().find(|v| cb.binary_search(v).is_err())?)
                    } else if bag.len() + 1 == cb.len() && bag.iter().all(|v| cb.binary_search(v).is_ok()) {
                        NodeKind::Rem(*cb.iter().find(|v| bag.binary_search(v).is_err())?)
                    } else {
                        return None;
                    }
                }
                2 if &self.bags[ch[0]] == bag && &self.bags[ch[1]] == bag => NodeKind::Join,
                _ => return None,
            };
            kinds.push(kind);
        }
        Some(kinds)
    }

    pub fn num_nodes(&self) -> usize {
        self.bags.len()
    }

    pub fn root(&self) -> usize {
        self.bags.len() - 1
    }

    /// Ascending.
    pub fn bag(&self, t: usize) -> &[Var] {
        &self.bags[t]
    }

    pub fn bags(&self) -> &[Vec<Var>] {
        &self.bags
    }

    pub fn children(&self, t: usize) -> &[usize] {
        &self.children[t]
    }

    pub fn kind(&self, t: usize) -> Option<NodeKind> {
        self.kinds.as_ref().map(|k| k[t])
    }

    pub fn is_nice(&self) -> bool {
        self.kinds.is_some()
    }

    pub fn max_bag_size(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Largest bag size minus one (0 for decompositions with only empty or singleton bags).
    pub fn width(&self) -> usize {
        self.max_bag_size().saturating_sub(1)
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.bags.len()];
        for (t, ch) in self.children.iter().enumerate() {
            for &c in ch {
                p[c] = Some(t);
            }
        }
        p
    }

    /// PACE `.td` text; node `t` is written as bag `t+1`, with a `c root` comment.
    pub fn to_pace(&self, num_vertices: usize) -> String {
        let mut out = format!("s td {} {} {}\n", self.bags.len(), self.max_bag_size(), num_vertices);
        let _ = writeln!(out, "c root {}", self.root() + 1);
        for (t, bag) in self.bags.iter().enumerate() {
            let _ = write!(out, "b {}", t + 1);
            for v in bag {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        for (t, ch) in self.children.iter().enumerate() {
            for &c in ch {
                let _ = writeln!(out, "{} {}", c + 1, t + 1);
            }
        }
        out
    }
}

/// Parses PACE `.td`. The root is given by a `c root N` comment, otherwise the highest bag id.
pub fn parse_pace(text: &str) -> Result<TreeDecomposition, TdError> {
    let err = |line: usize, m: String| TdError::Parse { line, message: m };
    let mut n_bags: Option<usize> = None;
    let mut bags: Vec<Option<Vec<Var>>> = Vec::new();
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut root: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(line_no, format!("bad number '{s}'")))
        };
        match toks.as_slice() {
            [] => {}
            ["c", "root", r] => root = Some(num(r)?),
            ["c", ..] => {}
            ["s", "td", nb, _, _] => {
                let nb = num(nb)?;
                n_bags = Some(nb);
                bags = vec![None; nb];
            }
            ["s", ..] => return Err(err(line_no, "malformed solution line".into())),
            ["b", id, vs @ ..] => {
                let id = num(id)?;
                let nb = n_bags.ok_or_else(|| err(line_no, "bag before 's td' line".into()))?;
                if id == 0 || id > nb {
                    return Err(err(line_no, format!("bag id {id} out of range 1..={nb}")));
                }
                let mut bag = Vec::with_capacity(vs.len());
                for v in vs {
                    let v = num(v)?;
                    if v == 0 || v > Var::MAX as usize {
                        return Err(err(line_no, format!("vertex {v} out of range")));
                    }
                    bag.push(v as Var);
                }
                if bags[id - 1].replace(bag).is_some() {
                    return Err(err(line_no, format!("bag {id} given twice")));
                }
            }
            [a, b] => {
                let nb = n_bags.ok_or_else(|| err(line_no, "edge before 's td' line".into()))?;
                let (a, b) = (num(a)?, num(b)?);
                if a == 0 || b == 0 || a > nb || b > nb {
                    return Err(err(line_no, format!("edge {a} {b} out of range")));
                }
                edges.push((line_no, a - 1, b - 1));
            }
            _ => return Err(err(line_no, format!("unrecognised line '{}'", raw.trim()))),
        }
    }
    let nb = n_bags.ok_or_else(|| err(1, "missing 's td' line".into()))?;
    if nb == 0 {
        return Err(TdError::NotATree("no bags".into()));
    }
    let bags: Vec<Vec<Var>> = bags
        .into_iter()
        .enumerate()
        .map(|(i, b)| b.ok_or_else(|| err(0, format!("bag {} missing", i + 1))))
        .collect::<Result<_, _>>()?;
    if edges.len() != nb - 1 {
        return Err(TdError::NotATree(format!("{} bags but {} edges", nb, edges.len())));
    }
    let root = match root {
        Some(r) if r >= 1 && r <= nb => r - 1,
        Some(r) => return Err(TdError::NotATree(format!("root {r} out of range"))),
        None => nb - 1,
    };
    let mut adj = vec![Vec::new(); nb];
    for &(_, a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut children = vec![Vec::new(); nb];
    let mut seen = vec![false; nb];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                children[u].push(w);
                stack.push(w);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(TdError::NotATree("bags are not connected".into()));
    }
    Ok(TreeDecomposition::from_rooted(bags, children, root))
}

/// Elimination order by min-fill or min-degree; ties broken by a per-vertex key drawn
/// from a ChaCha stream seeded with `seed`.
pub fn heuristic_order(g: &Graph, heuristic: Heuristic, seed: u64) -> Vec<Var> {
    let verts: Vec<Var> = g.vertices().collect();
    let index: HashMap<Var, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj: Vec<BTreeSet<usize>> = verts
        .iter()
        .map(|&v| g.neighbors(v).map(|w| index[&w]).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys: Vec<u64> = verts.iter().map(|_| rng.next_u64()).collect();

    let score = |adj: &[BTreeSet<usize>], v: usize| -> usize {
        match heuristic {
            Heuristic::MinDegree => adj[v].len(),
            Heuristic::MinFill => {
                let nb: Vec<usize> = adj[v].iter().copied().collect();
                let mut fill = 0;
                for (i, &x) in nb.iter().enumerate() {
                    for &y in &nb[i + 1..] {
                        if !adj[x].contains(&y) {
                            fill += 1;
                        }
                    }
                }
                fill
            }
        }
    };

    let mut current: Vec<usize> = (0..verts.len()).map(|v| score(&adj, v)).collect();
    let mut queue: BTreeSet<(usize, u64, usize)> = (0..verts.len()).map(|v| (current[v], keys[v], v)).collect();
    let mut done = vec![false; verts.len()];
    let mut order = Vec::with_capacity(verts.len());
    while let Some((_, _, v)) = queue.pop_first() {
        done[v] = true;
        order.push(verts[v]);
        let nb: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &x in &nb {
            adj[x].remove(&v);
        }
        for (i, &x) in nb.iter().enumerate() {
            for &y in &nb[i + 1..] {
                adj[x].insert(y);
                adj[y].insert(x);
            }
        }
        let mut affected: BTreeSet<usize> = nb.iter().copied().collect();
        if heuristic == Heuristic::MinFill {
            for &x in &nb {
                affected.extend(adj[x].iter().copied());
            }
        }
        for w in affected {
            if done[w] {
                continue;
            }
            let s = score(&adj, w);
            if s != current[w] {
                queue.remove(&(current[w], keys[w], w));
                current[w] = s;
                queue.insert((s, keys[w], w));
            }
        }
    }
    order
}

/// Decomposition from an elimination order: one bag per vertex holding the vertex and its
/// later neighbours in the filled graph. Component roots hang below the last vertex's bag.
pub fn td_from_order(g: &Graph, order: &[Var]) -> TreeDecomposition {
    if order.is_empty() {
        return TreeDecomposition::from_rooted(vec![Vec::new()], vec![Vec::new()], 0);
    }
    let pos: HashMap<Var, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    assert_eq!(pos.len(), order.len(), "ordering repeats a vertex");
    let mut adj: Vec<BTreeSet<usize>> = order
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .map(|w| *pos.get(&w).expect("ordering misses a vertex"))
                .collect()
        })
        .collect();
    assert_eq!(
        order.len(),
        g.num_vertices(),
        "ordering must be a permutation of the vertices"
    );
    let n = order.len();
    let mut bags = Vec::with_capacity(n);
    let mut parent = vec![None; n];
    for i in 0..n {
        let higher: Vec<usize> = adj[i].range(i + 1..).copied().collect();
        for (k, &x) in higher.iter().enumerate() {
            for &y in &higher[k + 1..] {
                adj[x].insert(y);
                adj[y].insert(x);
            }
        }
        parent[i] = higher.first().copied();
        let mut bag: Vec<Var> = higher.iter().map(|&j| order[j]).collect();
        bag.push(order[i]);
        bags.push(bag);
    }
    let root = n - 1;
    let mut children = vec![Vec::new(); n];
    for i in 0..n - 1 {
        children[parent[i].unwrap_or(root)].push(i);
    }
    TreeDecomposition::from_rooted(bags, children, root)
}

fn connectedness_violations(td: &TreeDecomposition) -> Vec<Violation> {
    let parents = td.parents();
    let mut tops: HashMap<Var, usize> = HashMap::new();
    for (t, parent) in parents.iter().enumerate() {
        for &v in td.bag(t) {
            let top = match *parent {
                None => true,
                Some(p) => td.bag(p).binary_search(&v).is_err(),
            };
            if top {
                *tops.entry(v).or_default() += 1;
            }
        }
    }
    let mut bad: Vec<Var> = tops.into_iter().filter(|&(_, k)| k > 1).map(|(v, _)| v).collect();
    bad.sort_unstable();
    bad.into_iter().map(Violation::Disconnected).collect()
}

fn nice_violations(td: &TreeDecomposition) -> Vec<Violation> {
    let Some(kinds) = td.kinds.as_ref() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut bad = |node: usize, reason: String| out.push(Violation::NiceTyping { node, reason });
    if !td.bag(td.root()).is_empty() {
        bad(td.root(), "root bag is not empty".into());
    }
    for (t, kind) in kinds.iter().enumerate() {
        let bag = td.bag(t);
        let ch = td.children(t);
        match *kind {
            NodeKind::Leaf => {
                if !ch.is_empty() || !bag.is_empty() {
                    bad(t, "leaf must be childless with an empty bag".into());
                }
            }
            NodeKind::Intro(v) | NodeKind::Rem(v) => {
                if ch.len() != 1 {
                    bad(t, format!("{kind} needs exactly one child"));
                    continue;
                }
                let mut expect: BTreeSet<Var> = td.bag(ch[0]).iter().copied().collect();
                let ok = if matches!(kind, NodeKind::Intro(_)) {
                    expect.insert(v)
                } else {
                    expect.remove(&v)
                };
                if !ok || expect.into_iter().collect::<Vec<_>>() != bag {
                    bad(t, format!("{kind} does not match its child's bag"));
                }
            }
            NodeKind::Join => {
                if ch.len() != 2 || ch.iter().any(|&c| td.bag(c) != bag) {
                    bad(t, "join needs two children with identical bags".into());
                }
            }
        }
    }
    out
}

/// Checks vertex and edge coverage, connectedness, and nice typing when the decomposition
/// carries node kinds. An empty result means valid.
pub fn validate_td(td: &TreeDecomposition, g: &Graph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut covered = BTreeSet::new();
    for bag in td.bags() {
        covered.extend(bag.iter().copied());
    }
    for v in g.vertices() {
        if !covered.contains(&v) {
            out.push(Violation::UncoveredVertex(v));
        }
    }
    let mut edges: BTreeSet<(Var, Var)> = g.edges().into_iter().collect();
    for bag in td.bags() {
        if edges.is_empty() {
            break;
        }
        for (i, &u) in bag.iter().enumerate() {
            for &v in &bag[i + 1..] {
                edges.remove(&(u, v));
            }
        }
    }
    out.extend(edges.into_iter().map(|(u, v)| Violation::UncoveredEdge(u, v)));
    out.extend(connectedness_violations(td));
    out.extend(nice_violations(td));
    out
}

struct NiceBuilder {
    bags: Vec<Vec<Var>>,
    children: Vec<Vec<usize>>,
}

impl NiceBuilder {
    fn push(&mut self, bag: Vec<Var>, children: Vec<usize>) -> usize {
        self.bags.push(bag);
        self.children.push(children);
        self.bags.len() - 1
    }

    /// Removes `from \ to` in descending order, then introduces `to \ from` ascending.
    fn chain(&mut self, mut id: usize, from: &[Var], to: &[Var]) -> usize {
        let mut cur: BTreeSet<Var> = from.iter().copied().collect();
        let gone: Vec<Var> = from.iter().copied().filter(|v| to.binary_search(v).is_err()).collect();
        for v in gone.into_iter().rev() {
            cur.remove(&v);
            id = self.push(cur.iter().copied().collect(), vec![id]);
        }
        for &v in to.iter().filter(|v| from.binary_search(v).is_err()) {
            cur.insert(v);
            id = self.push(cur.iter().copied().collect(), vec![id]);
        }
        id
    }
}

/// Nice normal form of the same width. Already-nice decompositions are returned unchanged.
pub fn make_nice(td: &TreeDecomposition) -> Result<TreeDecomposition, TdError> {
    let violations = connectedness_violations(td);
    if !violations.is_empty() {
        return Err(TdError::Invalid(violations));
    }
    if td.is_nice() {
        return Ok(td.clone());
    }
    let mut b = NiceBuilder {
        bags: Vec::new(),
        children: Vec::new(),
    };
    let mut top = vec![usize::MAX; td.num_nodes()];
    for t in 0..td.num_nodes() {
        let bag = td.bag(t);
        let ch = td.children(t);
        top[t] = if ch.is_empty() {
            let leaf = b.push(Vec::new(), Vec::new());
            b.chain(leaf, &[], bag)
        } else {
            let mut acc = b.chain(top[ch[0]], td.bag(ch[0]), bag);
            for &c in &ch[1..] {
                let branch = b.chain(top[c], td.bag(c), bag);
                acc = b.push(bag.to_vec(), vec![acc, branch]);
            }
            acc
        };
    }
    let root = b.chain(top[td.root()], td.bag(td.root()), &[]);
    let nice = TreeDecomposition::from_rooted(b.bags, b.children, root);
    debug_assert!(nice.is_nice());
    debug_assert!(nice.width() <= td.width());
    Ok(nice)
}

/// Heuristic nice decomposition of `g`.
pub fn decompose(g: &Graph, heuristic: Heuristic, seed: u64) -> TreeDecomposition {
    let order = heuristic_order(g, heuristic, seed);
    let td = td_from_order(g, &order);
    let nice = make_nice(&td).expect("elimination decompositions are valid");
    assert!(nice.width() <= td.width(), "make_nice increased the width");
    nice
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::CnfFormula;
    use crate::graphs::primal_graph;

    fn ex1_graph() -> Graph {
        primal_graph(&CnfFormula::from_ints(
            4,
            &[&[-1, 2, 3], &[1, -2, -3], &[1, 4], &[1, -4]],
        ))
    }

    fn running_td() -> TreeDecomposition {
        TreeDecomposition::from_rooted(
            vec![vec![1, 2, 3], vec![1, 4], vec![1]],
            vec![vec![], vec![], vec![0, 1]],
            2,
        )
    }

    fn path(n: Var) -> Graph {
        let mut g = Graph::new();
        for v in 1..n {
            g.add_edge(v, v + 1);
        }
        g
    }

    #[test]
    fn heuristic_widths() {
        let mut tri = Graph::new();
        tri.add_clique(&[1, 2, 3]);
        for h in [Heuristic::MinFill, Heuristic::MinDegree] {
            assert_eq!(decompose(&tri, h, 0).width(), 2);
            assert_eq!(decompose(&path(4), h, 3).width(), 1);
            assert_eq!(decompose(&ex1_graph(), h, 9).width(), 2);
        }
    }

    #[test]
    fn order_is_deterministic() {
        let g = ex1_graph();
        assert_eq!(
            heuristic_order(&g, Heuristic::MinFill, 5),
            heuristic_order(&g, Heuristic::MinFill, 5)
        );
    }

    #[test]
    fn td_from_order_examples() {
        let single = Graph::with_vertices([7]);
        let td = td_from_order(&single, &[7]);
        assert_eq!(td.bags(), &[vec![7]]);

        let g = ex1_graph();
        let td = td_from_order(&g, &[3, 4, 2, 1]);
        assert!(td.bags().contains(&vec![1, 2, 3]));
        assert!(td.bags().contains(&vec![1, 4]));
        assert!(validate_td(&td, &g).is_empty());

        let iso = Graph::with_vertices([1, 2, 3]);
        let td = td_from_order(&iso, &[1, 2, 3]);
        assert_eq!(td.num_nodes(), 3);
        assert!(validate_td(&td, &iso).is_empty());
    }

    #[test]
    fn nice_single_bag() {
        let td = TreeDecomposition::from_rooted(vec![vec![1, 2]], vec![vec![]], 0);
        let nice = make_nice(&td).unwrap();
        let kinds: Vec<NodeKind> = (0..nice.num_nodes()).map(|t| nice.kind(t).unwrap()).collect();
        assert_eq!(
            kinds,
            vec![
                NodeKind::Leaf,
                NodeKind::Intro(1),
                NodeKind::Intro(2),
                NodeKind::Rem(2),
                NodeKind::Rem(1)
            ]
        );
    }

    #[test]
    fn nice_running_td() {
        let td = running_td();
        let g = ex1_graph();
        assert!(validate_td(&td, &g).is_empty());
        let nice = make_nice(&td).unwrap();
        assert_eq!(nice.width(), 2);
        assert_eq!(nice.num_nodes(), 12);
        assert!(validate_td(&nice, &g).is_empty());
        assert_eq!(make_nice(&nice).unwrap(), nice);
    }

    #[test]
    fn violations_reported() {
        let g = ex1_graph();
        let td = TreeDecomposition::from_rooted(vec![vec![1, 2, 3], vec![1]], vec![vec![], vec![0]], 1);
        let v = validate_td(&td, &g);
        assert!(v.contains(&Violation::UncoveredVertex(4)));
        let td = TreeDecomposition::from_rooted(
            vec![vec![1, 2, 3], vec![4], vec![1, 4]],
            vec![vec![], vec![0], vec![1]],
            2,
        );
        assert!(validate_td(&td, &g).contains(&Violation::Disconnected(1)));
        assert!(make_nice(&td).is_err());
    }

    #[test]
    fn pace_round_trip() {
        let nice = make_nice(&running_td()).unwrap();
        let text = nice.to_pace(4);
        assert_eq!(parse_pace(&text).unwrap(), nice);
        assert!(parse_pace("s td 2 1 1\nb 1 1\nb 2 1\n").is_err());
        assert!(matches!(
            parse_pace("s td 1 1 1\nb 2 1\n"),
            Err(TdError::Parse { line: 2, .. })
        ));
    }
}
