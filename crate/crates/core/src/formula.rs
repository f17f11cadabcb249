//! CNF formulas, assignments and DIMACS input.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Variable ids are positive integers, as in DIMACS.
pub type Var = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: Var,
    positive: bool,
}

impl Literal {
    pub fn new(var: Var, positive: bool) -> Self {
        assert!(var >= 1, "variable ids start at 1");
        Literal { var, positive }
    }

    pub fn pos(var: Var) -> Self {
        Literal::new(var, true)
    }

    pub fn neg(var: Var) -> Self {
        Literal::new(var, false)
    }

    /// `None` for 0, which DIMACS reserves as the clause terminator.
    pub fn from_dimacs(lit: i64) -> Option<Self> {
        if lit == 0 || lit.unsigned_abs() > Var::MAX as u64 {
            return None;
        }
        Some(Literal::new(lit.unsigned_abs() as Var, lit > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn var(self) -> Var {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// Truth value of the literal when its variable is set to `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

pub type Clause = Vec<Literal>;

/// A set of clauses over a declared universe of variables.
///
/// `universe` always contains `vars`; the difference are free variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    clauses: Vec<Clause>,
    vars: Vec<Var>,
    universe: Vec<Var>,
    num_vars: Var,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("assignment is not total: variable {0} unassigned")]
    NotTotal(Var),
    #[error("projection variable {0} is not a variable of the formula")]
    ProjectionOutOfRange(Var),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

fn normalize_clause(mut clause: Clause) -> Option<Clause> {
    clause.sort_unstable();
    clause.dedup();
    if clause.windows(2).any(|w| w[0].var == w[1].var) {
        return None;
    }
    Some(clause)
}

impl CnfFormula {
    /// Builds a formula over variables `1..=num_vars` (grown if a clause mentions a larger id).
    /// Tautologies are dropped and duplicate clauses collapse.
    pub fn new(num_vars: Var, clauses: impl IntoIterator<Item = Clause>) -> Self {
        let clauses = Self::normalize(clauses);
        let max_var = clauses.iter().flatten().map(|l| l.var).max().unwrap_or(0);
        let num_vars = num_vars.max(max_var);
        Self::assemble(clauses, (1..=num_vars).collect(), num_vars)
    }

    /// Builds a formula whose universe is `universe` plus every occurring variable.
    pub fn with_universe(universe: impl IntoIterator<Item = Var>, clauses: impl IntoIterator<Item = Clause>) -> Self {
        let clauses = Self::normalize(clauses);
        let mut uni: BTreeSet<Var> = universe.into_iter().collect();
        uni.extend(clauses.iter().flatten().map(|l| l.var));
        let num_vars = uni.iter().next_back().copied().unwrap_or(0);
        Self::assemble(clauses, uni.into_iter().collect(), num_vars)
    }

    /// Convenience constructor from DIMACS-style integer clauses.
    pub fn from_ints(num_vars: Var, clauses: &[&[i64]]) -> Self {
        CnfFormula::new(
            num_vars,
            clauses.iter().map(|c| {
                c.iter()
                    .map(|&l| Literal::from_dimacs(l).expect("nonzero literal"))
                    .collect()
            }),
        )
    }

    fn normalize(clauses: impl IntoIterator<Item = Clause>) -> Vec<Clause> {
        let mut out: Vec<Clause> = clauses.into_iter().filter_map(normalize_clause).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn assemble(clauses: Vec<Clause>, mut universe: Vec<Var>, num_vars: Var) -> Self {
        let vars: BTreeSet<Var> = clauses.iter().flatten().map(|l| l.var).collect();
        let vars: Vec<Var> = vars.into_iter().collect();
        let mut merged: BTreeSet<Var> = universe.drain(..).collect();
        merged.extend(vars.iter().copied());
        CnfFormula {
            clauses,
            vars,
            universe: merged.into_iter().collect(),
            num_vars,
        }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Occurring variables, ascending.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Declared variables, ascending.
    pub fn universe(&self) -> &[Var] {
        &self.universe
    }

    pub fn num_vars(&self) -> Var {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.first().is_some_and(|c| c.is_empty())
    }

    /// Declared variables that occur in no clause.
    pub fn free_vars(&self) -> Vec<Var> {
        self.universe
            .iter()
            .copied()
            .filter(|v| self.vars.binary_search(v).is_err())
            .collect()
    }

    /// Same clauses, universe shrunk to the occurring variables.
    pub fn restrict_universe(&self) -> Self {
        CnfFormula {
            clauses: self.clauses.clone(),
            vars: self.vars.clone(),
            universe: self.vars.clone(),
            num_vars: self.num_vars,
        }
    }

    /// DIMACS text, with `c p show` lines when a projection is given.
    pub fn to_dimacs(&self, projection: Option<&[Var]>) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        if let Some(p) = projection {
            out.push_str("c p show");
            for v in p {
                out.push_str(&format!(" {v}"));
            }
            out.push_str(" 0\n");
        }
        for c in &self.clauses {
            for l in c {
                out.push_str(&format!("{l} "));
            }
            out.push_str("0\n");
        }
        out
    }
}

/// A partial map from variables to truth values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Assignment(BTreeMap<Var, bool>);

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    /// `J` as a set of true variables over `domain`; everything else in `domain` is false.
    pub fn from_true_set(domain: &[Var], truthy: &[Var]) -> Self {
        Assignment(domain.iter().map(|&v| (v, truthy.contains(&v))).collect())
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.0.insert(var, value);
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.0.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.0.iter().map(|(&v, &b)| (v, b))
    }

    pub fn true_vars(&self) -> Vec<Var> {
        self.iter().filter(|&(_, b)| b).map(|(v, _)| v).collect()
    }
}

impl FromIterator<(Var, bool)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (Var, bool)>>(iter: I) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

/// F[α]: drops satisfied clauses and falsified literals. Assigned variables leave the universe.
pub fn apply_assignment(f: &CnfFormula, alpha: &Assignment) -> CnfFormula {
    let mut clauses = Vec::with_capacity(f.clauses.len());
    'clause: for c in &f.clauses {
        let mut rest = Vec::with_capacity(c.len());
        for &l in c {
            match alpha.get(l.var) {
                Some(v) if l.eval(v) => continue 'clause,
                Some(_) => {}
                None => rest.push(l),
            }
        }
        clauses.push(rest);
    }
    let universe: Vec<Var> = f.universe.iter().copied().filter(|&v| alpha.get(v).is_none()).collect();
    let mut g = CnfFormula::with_universe(universe, clauses);
    g.num_vars = f.num_vars;
    g
}

/// Whether the total assignment `j` satisfies `f`.
pub fn satisfies(j: &Assignment, f: &CnfFormula) -> Result<bool, FormulaError> {
    if let Some(&v) = f.vars.iter().find(|&&v| j.get(v).is_none()) {
        return Err(FormulaError::NotTotal(v));
    }
    Ok(f.clauses
        .iter()
        .all(|c| c.iter().any(|l| l.eval(j.get(l.var).unwrap_or(false)))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationStatus {
    Unknown,
    Unsat,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub formula: CnfFormula,
    pub forced: Assignment,
    pub status: PropagationStatus,
}

/// Unit propagation to a fixpoint.
pub fn unit_propagate(f: &CnfFormula) -> Propagation {
    let unsat = |forced: Assignment| Propagation {
        formula: CnfFormula::with_universe(Vec::new(), vec![Vec::new()]),
        forced,
        status: PropagationStatus::Unsat,
    };
    if f.has_empty_clause() {
        return unsat(Assignment::new());
    }
    let mut occ: HashMap<Literal, Vec<usize>> = HashMap::new();
    let mut queue = Vec::new();
    for (i, c) in f.clauses.iter().enumerate() {
        for &l in c {
            occ.entry(l).or_default().push(i);
        }
        if c.len() == 1 {
            queue.push(c[0]);
        }
    }
    if queue.is_empty() {
        return Propagation {
            formula: f.clone(),
            forced: Assignment::new(),
            status: PropagationStatus::Unknown,
        };
    }
    let mut value: HashMap<Var, bool> = HashMap::new();
    while let Some(l) = queue.pop() {
        match value.get(&l.var) {
            Some(&v) if v == l.positive => continue,
            Some(_) => return unsat(value.into_iter().collect()),
            None => {
                value.insert(l.var, l.positive);
            }
        }
        for &ci in occ.get(&l.negated()).map(Vec::as_slice).unwrap_or(&[]) {
            let mut open = None;
            let mut n_open = 0;
            let mut sat = false;
            for &m in &f.clauses[ci] {
                match value.get(&m.var) {
                    Some(&v) if m.eval(v) => {
                        sat = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        n_open += 1;
                        open = Some(m);
                    }
                }
            }
            if sat {
                continue;
            }
            match n_open {
                0 => return unsat(value.into_iter().collect()),
                1 => queue.push(open.unwrap()),
                _ => {}
            }
        }
    }
    let forced: Assignment = value.into_iter().collect();
    let formula = apply_assignment(f, &forced);
    Propagation {
        formula,
        forced,
        status: PropagationStatus::Unknown,
    }
}

/// Renaming of the occurring variables to `1..` by first occurrence in sorted clause order.
fn canonical_renaming(f: &CnfFormula) -> HashMap<Var, Var> {
    let mut rename = HashMap::with_capacity(f.vars.len());
    for l in f.clauses.iter().flatten() {
        let next = rename.len() as Var + 1;
        rename.entry(l.var).or_insert(next);
    }
    rename
}

fn encode_clauses(f: &CnfFormula, rename: &HashMap<Var, Var>, out: &mut Vec<u8>) {
    let mut renamed: Vec<Vec<i64>> = f
        .clauses
        .iter()
        .map(|c| {
            let mut r: Vec<i64> = c
                .iter()
                .map(|l| Literal::new(rename[&l.var], l.positive).to_dimacs())
                .collect();
            r.sort_unstable_by_key(|x| (x.abs(), *x));
            r
        })
        .collect();
    renamed.sort_unstable();
    for c in renamed {
        for l in c {
            out.extend_from_slice(&l.to_le_bytes()[..5]);
        }
        out.push(0xff);
    }
}

/// Byte key that is equal for formulas equal up to variable renaming by first occurrence,
/// clause order and duplicate clauses.
pub fn canonical_key(f: &CnfFormula) -> Vec<u8> {
    let rename = canonical_renaming(f);
    let mut out = Vec::with_capacity(f.clauses.len() * 16);
    encode_clauses(f, &rename, &mut out);
    out
}

/// Key for the instance (F, P): canonical clauses, the renamed projection, and the number
/// of free projection variables.
pub fn canonical_instance_key(f: &CnfFormula, projection: &[Var]) -> Vec<u8> {
    let rename = canonical_renaming(f);
    let mut out = Vec::with_capacity(f.clauses.len() * 16 + projection.len() * 4 + 8);
    encode_clauses(f, &rename, &mut out);
    out.push(0xfe);
    let mut renamed: Vec<Var> = projection.iter().filter_map(|v| rename.get(v).copied()).collect();
    renamed.sort_unstable();
    for v in &renamed {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(0xfe);
    let free = projection.len() - renamed.len();
    out.extend_from_slice(&(free as u64).to_le_bytes());
    out
}

/// A projected model counting instance (F, P).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmcInstance {
    pub formula: CnfFormula,
    /// Ascending, a subset of the formula's universe.
    pub projection: Vec<Var>,
    /// Whether the projection came from `c p show` lines rather than defaulting to all variables.
    pub explicit_projection: bool,
}

impl PmcInstance {
    pub fn new(formula: CnfFormula, projection: impl IntoIterator<Item = Var>) -> Result<Self, FormulaError> {
        let projection: BTreeSet<Var> = projection.into_iter().collect();
        if let Some(&v) = projection.iter().find(|v| formula.universe.binary_search(v).is_err()) {
            return Err(FormulaError::ProjectionOutOfRange(v));
        }
        Ok(PmcInstance {
            formula,
            projection: projection.into_iter().collect(),
            explicit_projection: true,
        })
    }

    /// Projection onto every declared variable.
    pub fn full(formula: CnfFormula) -> Self {
        let projection = formula.universe.clone();
        PmcInstance {
            formula,
            projection,
            explicit_projection: false,
        }
    }
}

/// Parses DIMACS CNF with optional `c p show ... 0` (or `c ind ... 0`) projection lines.
pub fn parse_dimacs(text: &str) -> Result<PmcInstance, ParseError> {
    let mut header: Option<(Var, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Clause = Vec::new();
    let mut shows: Vec<(usize, i64)> = Vec::new();
    let mut saw_show = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("c") => {
                let rest: Vec<&str> = tokens.collect();
                let show = match rest.as_slice() {
                    ["p", "show", vs @ ..] => Some(vs),
                    ["ind", vs @ ..] => Some(vs),
                    _ => None,
                };
                if let Some(vs) = show {
                    saw_show = true;
                    for tok in vs {
                        let v: i64 = tok
                            .parse()
                            .map_err(|_| ParseError::new(line_no, format!("bad projection variable '{tok}'")))?;
                        if v == 0 {
                            break;
                        }
                        if v < 0 {
                            return Err(ParseError::new(line_no, format!("negative projection variable {v}")));
                        }
                        shows.push((line_no, v));
                    }
                }
                continue;
            }
            Some(t) if t.starts_with('c') && t.len() > 1 && !t[1..].starts_with(|c: char| c.is_ascii_digit()) => {
                continue;
            }
            Some("p") => {
                if header.is_some() {
                    return Err(ParseError::new(line_no, "duplicate problem line"));
                }
                let fields: Vec<&str> = tokens.collect();
                if fields.len() != 3 || fields[0] != "cnf" {
                    return Err(ParseError::new(
                        line_no,
                        "malformed header, expected 'p cnf <vars> <clauses>'",
                    ));
                }
                let n: Var = fields[1]
                    .parse()
                    .map_err(|_| ParseError::new(line_no, format!("bad variable count '{}'", fields[1])))?;
                let m: usize = fields[2]
                    .parse()
                    .map_err(|_| ParseError::new(line_no, format!("bad clause count '{}'", fields[2])))?;
                header = Some((n, m));
                continue;
            }
            _ => {}
        }
        let Some((n, _)) = header else {
            return Err(ParseError::new(line_no, "clause before 'p cnf' header"));
        };
        for tok in line.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| ParseError::new(line_no, format!("bad literal '{tok}'")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if lit.unsigned_abs() > n as u64 {
                return Err(ParseError::new(line_no, format!("literal {lit} out of range 1..={n}")));
            }
            current.push(Literal::from_dimacs(lit).unwrap());
        }
    }
    let Some((n, _)) = header else {
        return Err(ParseError::new(last_line.max(1), "missing 'p cnf' header"));
    };
    if !current.is_empty() {
        return Err(ParseError::new(last_line, "clause not 0-terminated"));
    }
    for &(line_no, v) in &shows {
        if v > n as i64 {
            return Err(ParseError::new(
                line_no,
                format!("projection variable {v} out of range 1..={n}"),
            ));
        }
    }
    let formula = CnfFormula::new(n, clauses);
    if saw_show {
        let p: BTreeSet<Var> = shows.iter().map(|&(_, v)| v as Var).collect();
        Ok(PmcInstance {
            formula,
            projection: p.into_iter().collect(),
            explicit_projection: true,
        })
    } else {
        Ok(PmcInstance::full(formula))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = "p cnf 4 4\nc p show 3 4 0\n-1 2 3 0\n1 -2 -3 0\n1 4 0\n1 -4 0\n";

    fn ex1() -> CnfFormula {
        parse_dimacs(EXAMPLE1).unwrap().formula
    }

    #[test]
    fn parses_plain_cnf() {
        let inst = parse_dimacs("p cnf 2 1\n1 -2 0").unwrap();
        assert_eq!(inst.formula.clauses(), &[vec![Literal::pos(1), Literal::neg(2)]]);
        assert_eq!(inst.projection, vec![1, 2]);
        assert!(!inst.explicit_projection);
    }

    #[test]
    fn parses_show_lines() {
        let inst = parse_dimacs(EXAMPLE1).unwrap();
        assert_eq!(inst.projection, vec![3, 4]);
        assert_eq!(inst.formula.num_clauses(), 4);
    }

    #[test]
    fn drops_tautology() {
        let inst = parse_dimacs("p cnf 1 1\n1 -1 0").unwrap();
        assert!(inst.formula.is_empty());
        assert_eq!(inst.formula.universe(), &[1]);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse_dimacs("p cnf 2 1\n1 3 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_dimacs("p cnf 2 1\n1 2\n").unwrap_err();
        assert!(e.message.contains("0-terminated"));
        let e = parse_dimacs("p dnf 2 1\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_dimacs("c hi\n1 2 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_dimacs("p cnf 2 1\nc p show 5 0\n1 2 0\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn clauses_may_span_lines() {
        let inst = parse_dimacs("p cnf 3 2\n1 2\n 3 0 -1 0\n").unwrap();
        assert_eq!(inst.formula.num_clauses(), 2);
    }

    #[test]
    fn apply_example() {
        let f = ex1();
        let alpha: Assignment = [(1, true)].into_iter().collect();
        let g = apply_assignment(&f, &alpha);
        assert_eq!(g.clauses(), &[vec![Literal::pos(2), Literal::pos(3)]]);
        assert_eq!(apply_assignment(&f, &Assignment::new()).clauses(), f.clauses());
        let h = CnfFormula::from_ints(1, &[&[1]]);
        let g = apply_assignment(&h, &[(1, false)].into_iter().collect());
        assert!(g.has_empty_clause());
    }

    #[test]
    fn satisfies_examples() {
        let f = ex1();
        let vars = [1, 2, 3, 4];
        assert!(satisfies(&Assignment::from_true_set(&vars, &[1, 2]), &f).unwrap());
        assert!(!satisfies(&Assignment::from_true_set(&vars, &[]), &f).unwrap());
        let empty = CnfFormula::new(2, vec![]);
        assert!(satisfies(&Assignment::new(), &empty).unwrap());
        assert_eq!(
            satisfies(&Assignment::from_true_set(&[1], &[]), &f),
            Err(FormulaError::NotTotal(2))
        );
    }

    #[test]
    fn propagation_examples() {
        let f = CnfFormula::from_ints(2, &[&[1], &[-1, 2]]);
        let p = unit_propagate(&f);
        assert_eq!(p.status, PropagationStatus::Unknown);
        assert!(p.formula.is_empty());
        assert_eq!(p.forced.get(1), Some(true));
        assert_eq!(p.forced.get(2), Some(true));

        let f = CnfFormula::from_ints(1, &[&[1], &[-1]]);
        assert_eq!(unit_propagate(&f).status, PropagationStatus::Unsat);

        let f = ex1();
        let p = unit_propagate(&f);
        assert_eq!(p.formula, f);
        assert!(p.forced.is_empty());
    }

    #[test]
    fn canonical_key_examples() {
        let a = CnfFormula::from_ints(5, &[&[2, -5]]);
        let b = CnfFormula::from_ints(3, &[&[1, -3]]);
        assert_eq!(canonical_key(&a), canonical_key(&b));
        let c = CnfFormula::from_ints(5, &[&[2, -5], &[2, -5]]);
        assert_eq!(canonical_key(&a), canonical_key(&c));
        let s1 = "p cnf 4 4\n1 4 0\n-1 2 3 0\n1 -4 0\n1 -2 -3 0\n";
        let s2 = "p cnf 4 4\n1 -2 -3 0\n1 -4 0\n1 4 0\n-1 2 3 0\n";
        assert_eq!(
            canonical_key(&parse_dimacs(s1).unwrap().formula),
            canonical_key(&parse_dimacs(s2).unwrap().formula)
        );
        assert_ne!(canonical_key(&a), canonical_key(&CnfFormula::from_ints(3, &[&[1, 3]])));
    }

    #[test]
    fn instance_key_separates_projections() {
        let f = CnfFormula::from_ints(2, &[&[1, 2]]);
        assert_ne!(canonical_instance_key(&f, &[1]), canonical_instance_key(&f, &[1, 2]));
        assert_eq!(canonical_instance_key(&f, &[1]), canonical_instance_key(&f, &[1]));
    }

    #[test]
    fn dimacs_round_trip() {
        let inst = parse_dimacs(EXAMPLE1).unwrap();
        let text = inst.formula.to_dimacs(Some(&inst.projection));
        assert_eq!(parse_dimacs(&text).unwrap(), inst);
    }
}
