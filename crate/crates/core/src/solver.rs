//! Exact 0/1 solving of the covering programs, plus CPLEX-LP text export
//! and a reader for the same dialect.
//!
//! The covering structure (all coefficients one, all bounds one, binary
//! variables) keeps exact search cheap at this scale: after removing
//! dominated constraints and propagating unit constraints, a depth-first
//! branch and bound runs over the canonical variable order, zero branch
//! first, with a greedy warm start and a dual-greedy fractional bound. The
//! first optimum found this way is also the lexicographically smallest one,
//! which is the documented tie-break.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ilp::{Constraint, Cost, IlpProblem, IlpVar, VarLoc};
use crate::ir::FenceType;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    CapExceeded,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Solution {
    pub assignment: Vec<bool>,
    /// Objective scaled by the problem's denominator.
    pub objective_scaled: u64,
    pub scale: u64,
    pub status: SolveStatus,
    pub nodes: u64,
}

impl Solution {
    pub fn objective_display(&self) -> String {
        Cost::new(self.objective_scaled, self.scale).display()
    }

    pub fn chosen(&self) -> impl Iterator<Item = u32> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| i as u32)
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum SolverError {
    #[error("too many variables for exhaustive solving: {0} > {1}")]
    TooManyVariables(usize, usize),
}

pub const DEFAULT_NODE_CAP: u64 = 10_000_000;
const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Exact solve with the default node cap.
pub fn solve(p: &IlpProblem) -> Solution {
    solve_with_cap(p, DEFAULT_NODE_CAP)
}

pub fn solve_with_cap(p: &IlpProblem, node_cap: u64) -> Solution {
    let n = p.vars.len();
    if p.constraints.iter().any(|c| c.vars.is_empty()) {
        return Solution {
            assignment: vec![false; n],
            objective_scaled: 0,
            scale: p.scale,
            status: SolveStatus::Infeasible,
            nodes: 0,
        };
    }

    // ---- preprocessing ----
    // drop duplicate and dominated (superset) constraints; force variables
    // of unit constraints — both preserve the feasible set exactly
    let mut cons: Vec<Vec<u32>> = p.constraints.iter().map(|c| c.vars.clone()).collect();
    cons.sort();
    cons.dedup();
    cons.sort_by_key(|c| c.len());
    let mut kept: Vec<Vec<u32>> = Vec::new();
    let mut by_var: HashMap<u32, Vec<usize>> = HashMap::new();
    'outer: for c in cons {
        let mut candidates: Vec<usize> = Vec::new();
        for &v in &c {
            if let Some(list) = by_var.get(&v) {
                candidates.extend(list.iter().copied());
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        for k in candidates {
            if is_subset(&kept[k], &c) {
                continue 'outer;
            }
        }
        let idx = kept.len();
        for &v in &c {
            by_var.entry(v).or_default().push(idx);
        }
        kept.push(c);
    }

    let mut forced = vec![false; n];
    loop {
        let mut changed = false;
        kept.retain(|c| {
            if c.iter().any(|&v| forced[v as usize]) {
                return false;
            }
            if c.len() == 1 {
                forced[c[0] as usize] = true;
                changed = true;
                return false;
            }
            true
        });
        if !changed {
            break;
        }
    }
    let forced_cost: u64 = (0..n).filter(|&i| forced[i]).map(|i| p.vars[i].weight).sum();

    // remaining free variables in canonical order
    let free: Vec<u32> = (0..n as u32).filter(|&v| !forced[v as usize]).collect();
    let free_pos: HashMap<u32, usize> = free.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let cons: Vec<Vec<usize>> = kept
        .iter()
        .map(|c| c.iter().map(|v| free_pos[v]).collect())
        .collect();
    let weights: Vec<u64> = free.iter().map(|&v| p.vars[v as usize].weight).collect();
    let m = free.len();

    let mut chosen = vec![false; m];
    let mut nodes = 0u64;
    let mut capped = false;
    if !cons.is_empty() {
        // greedy cover bounds the search; the DFS itself finds the optimum,
        // and since it explores zero branches first over the canonical
        // order, the first optimum found is the lexicographically smallest
        let greedy = greedy_cover(&cons, &weights);
        let greedy_cost = cost_of(&greedy, &weights);

        let mut var_cons: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (ci, c) in cons.iter().enumerate() {
            for &v in c {
                var_cons[v].push(ci);
            }
        }
        let mut bb = Bb {
            cons: &cons,
            var_cons: &var_cons,
            weights: &weights,
            satisfied: vec![false; cons.len()],
            unsatisfied: cons.len(),
            open: cons.iter().map(|c| c.len() as u32).collect(),
            chosen: vec![false; m],
            best: None,
            // strictly above the greedy value so an optimum is always found
            best_cost: greedy_cost + 1,
            nodes: 0,
            node_cap,
            capped: false,
        };
        bb.dfs(0, 0);
        nodes = bb.nodes;
        capped = bb.capped;
        chosen = match bb.best {
            Some(best) => best,
            None => greedy, // only reachable when the node cap fired early
        };
    }

    let mut assignment = forced;
    for (i, &v) in free.iter().enumerate() {
        assignment[v as usize] = chosen[i];
    }
    let objective_scaled = forced_cost + cost_of(&chosen, &weights);
    Solution {
        assignment,
        objective_scaled,
        scale: p.scale,
        status: if capped { SolveStatus::CapExceeded } else { SolveStatus::Optimal },
        nodes,
    }
}

struct Bb<'a> {
    cons: &'a [Vec<usize>],
    var_cons: &'a [Vec<usize>],
    weights: &'a [u64],
    satisfied: Vec<bool>,
    unsatisfied: usize,
    // not-yet-decided variables per constraint
    open: Vec<u32>,
    chosen: Vec<bool>,
    best: Option<Vec<bool>>,
    best_cost: u64,
    nodes: u64,
    node_cap: u64,
    capped: bool,
}

impl Bb<'_> {
    /// Dual-greedy fractional bound: each unsatisfied constraint claims the
    /// least remaining capacity among its undecided variables; the claims
    /// form a feasible dual, so their sum under-approximates the LP optimum
    /// and hence the integer optimum of the residual problem.
    fn bound(&self, from: usize, cost: u64) -> u64 {
        let mut cap: Vec<u64> = self.weights.to_vec();
        let mut lb = cost;
        for (ci, c) in self.cons.iter().enumerate() {
            if self.satisfied[ci] {
                continue;
            }
            let mut y = u64::MAX;
            for &v in c {
                if v >= from {
                    y = y.min(cap[v]);
                }
            }
            if y == u64::MAX {
                return u64::MAX; // no undecided variable left: dead branch
            }
            if y > 0 {
                for &v in c {
                    if v >= from {
                        cap[v] -= y.min(cap[v]);
                    }
                }
                lb = lb.saturating_add(y);
            }
        }
        lb
    }

    fn dfs(&mut self, i: usize, cost: u64) {
        if self.capped {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.node_cap {
            self.capped = true;
            return;
        }
        if self.unsatisfied == 0 {
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best = Some(self.chosen.clone());
            }
            return;
        }
        if i >= self.chosen.len() {
            return;
        }
        if self.bound(i, cost) >= self.best_cost {
            return;
        }
        // zero branch first: legal unless a constraint loses its last
        // undecided variable
        let dead = self.var_cons[i]
            .iter()
            .any(|&ci| !self.satisfied[ci] && self.open[ci] == 1);
        for &ci in &self.var_cons[i] {
            self.open[ci] -= 1;
        }
        if !dead {
            self.dfs(i + 1, cost);
        }
        // one branch
        if cost + self.weights[i] < self.best_cost {
            let newly: Vec<usize> = self.var_cons[i]
                .iter()
                .copied()
                .filter(|&ci| !self.satisfied[ci])
                .collect();
            for &ci in &newly {
                self.satisfied[ci] = true;
            }
            self.unsatisfied -= newly.len();
            self.chosen[i] = true;
            self.dfs(i + 1, cost + self.weights[i]);
            self.chosen[i] = false;
            self.unsatisfied += newly.len();
            for &ci in &newly {
                self.satisfied[ci] = false;
            }
        }
        for &ci in &self.var_cons[i] {
            self.open[ci] += 1;
        }
    }
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut it = big.iter();
    'outer: for s in small {
        for b in it.by_ref() {
            if b == s {
                continue 'outer;
            }
            if b > s {
                return false;
            }
        }
        return false;
    }
    true
}

fn cost_of(chosen: &[bool], weights: &[u64]) -> u64 {
    chosen
        .iter()
        .zip(weights)
        .filter(|(&on, _)| on)
        .map(|(_, &w)| w)
        .sum()
}

/// Classic weighted greedy cover: repeatedly pick the variable with the
/// best cost per newly covered constraint.
fn greedy_cover(cons: &[Vec<usize>], weights: &[u64]) -> Vec<bool> {
    let m = weights.len();
    let mut chosen = vec![false; m];
    let mut satisfied = vec![false; cons.len()];
    let mut remaining = cons.iter().filter(|c| !c.is_empty()).count();
    while remaining > 0 {
        let mut best_var = usize::MAX;
        let mut best_key = (u64::MAX, 0u64); // cost/coverage by cross-multiplication
        for v in 0..m {
            if chosen[v] {
                continue;
            }
            let cover = cons
                .iter()
                .enumerate()
                .filter(|(ci, c)| !satisfied[*ci] && c.contains(&v))
                .count() as u64;
            if cover == 0 {
                continue;
            }
            // compare weights[v]/cover < best: weights[v]*best_cover < best_cost*cover
            if best_var == usize::MAX || weights[v] * best_key.1 < best_key.0 * cover {
                best_var = v;
                best_key = (weights[v], cover);
            }
        }
        if best_var == usize::MAX {
            break; // some constraint is unsatisfiable
        }
        chosen[best_var] = true;
        for (ci, c) in cons.iter().enumerate() {
            if !satisfied[ci] && c.contains(&best_var) {
                satisfied[ci] = true;
                remaining -= 1;
            }
        }
    }
    // drop picks made redundant by later ones
    for v in (0..m).rev() {
        if !chosen[v] {
            continue;
        }
        chosen[v] = false;
        let ok = cons.iter().all(|c| c.iter().any(|&u| chosen[u]));
        if !ok {
            chosen[v] = true;
        }
    }
    chosen
}

/// Exhaustive reference solver: all `2^n` assignments in lexicographic
/// order, first optimum kept. Same optimality and tie-break contract as
/// [`solve`].
pub fn brute_force_solve(p: &IlpProblem) -> Result<Solution, SolverError> {
    let n = p.vars.len();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(SolverError::TooManyVariables(n, BRUTE_FORCE_MAX_VARS));
    }
    if p.constraints.iter().any(|c| c.vars.is_empty()) {
        return Ok(Solution {
            assignment: vec![false; n],
            objective_scaled: 0,
            scale: p.scale,
            status: SolveStatus::Infeasible,
            nodes: 0,
        });
    }
    // bit (n-1-i) of the counter holds variable i, so counting up walks
    // assignments in lexicographic order
    let masks: Vec<u64> = p
        .constraints
        .iter()
        .map(|c| c.vars.iter().map(|&v| 1u64 << (n - 1 - v as usize)).sum())
        .collect();
    let weights: Vec<u64> = (0..n).map(|i| p.vars[i].weight).collect();
    let mut best: Option<(u64, u64)> = None; // (cost, bits)
    for bits in 0..(1u64 << n) {
        if masks.iter().any(|&m| bits & m == 0) {
            continue;
        }
        let mut cost = 0u64;
        for (i, &w) in weights.iter().enumerate() {
            if bits >> (n - 1 - i) & 1 == 1 {
                cost += w;
            }
        }
        if best.map(|(c, _)| cost < c).unwrap_or(true) {
            best = Some((cost, bits));
        }
    }
    let (cost, bits) = best.expect("covering problems with nonempty constraints are feasible");
    let assignment: Vec<bool> = (0..n).map(|i| bits >> (n - 1 - i) & 1 == 1).collect();
    Ok(Solution {
        assignment,
        objective_scaled: cost,
        scale: p.scale,
        status: SolveStatus::Optimal,
        nodes: 1 << n,
    })
}

// ---------------------------------------------------------------------------
// LP text format
// ---------------------------------------------------------------------------

/// CPLEX-LP text: Minimize / Subject To / Binary sections, constraint names
/// `c0..`, deterministic ordering.
pub fn export_lp(p: &IlpProblem) -> String {
    let mut out = String::from("Minimize\n obj:");
    for (i, var) in p.vars.iter().enumerate() {
        let coeff = Cost::new(var.weight, p.scale).display();
        if i == 0 {
            let _ = write!(out, " {} {}", coeff, p.var_name(i as u32, None));
        } else {
            let _ = write!(out, " + {} {}", coeff, p.var_name(i as u32, None));
        }
    }
    out.push_str("\nSubject To\n");
    for (ci, c) in p.constraints.iter().enumerate() {
        let terms: Vec<String> = c.vars.iter().map(|&v| p.var_name(v, None)).collect();
        let _ = writeln!(out, " c{}: {} >= 1", ci, terms.join(" + "));
    }
    if !p.vars.is_empty() {
        out.push_str("Binary\n");
        for i in 0..p.vars.len() {
            let _ = writeln!(out, " {}", p.var_name(i as u32, None));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum LpParseError {
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error("unknown variable `{0}` in constraint")]
    UnknownVariable(String),
    #[error("missing `{0}` section")]
    MissingSection(&'static str),
}

/// Read back the dialect written by [`export_lp`].
pub fn parse_lp(text: &str) -> Result<IlpProblem, LpParseError> {
    #[derive(PartialEq)]
    enum Section {
        Start,
        Objective,
        Constraints,
        Binary,
        Done,
    }
    let mut section = Section::Start;
    let mut vars: Vec<IlpVar> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut constraints: Vec<Constraint> = Vec::new();
    let mut costs: Vec<(String, Cost)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "Minimize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Binary" => {
                section = Section::Binary;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objective => {
                let body = line.strip_prefix("obj:").unwrap_or(line).trim();
                for term in body.split('+') {
                    let term = term.trim();
                    if term.is_empty() {
                        continue;
                    }
                    let mut parts = term.split_whitespace();
                    let first = parts.next().ok_or_else(|| {
                        LpParseError::Malformed(lineno + 1, "empty objective term".into())
                    })?;
                    let (coeff, name) = match parts.next() {
                        Some(name) => {
                            let c = Cost::parse(first).ok_or_else(|| {
                                LpParseError::Malformed(lineno + 1, format!("bad coefficient `{first}`"))
                            })?;
                            (c, name.to_string())
                        }
                        None => (Cost::new(1, 1), first.to_string()),
                    };
                    costs.push((name, coeff));
                }
            }
            Section::Constraints => {
                let body = match line.split_once(':') {
                    Some((_, rest)) => rest.trim(),
                    None => line,
                };
                let body = body
                    .strip_suffix(">= 1")
                    .or_else(|| body.strip_suffix(">=1"))
                    .ok_or_else(|| {
                        LpParseError::Malformed(lineno + 1, "constraint must end in `>= 1`".into())
                    })?;
                let mut terms = Vec::new();
                for name in body.split('+') {
                    let name = name.trim();
                    if name.is_empty() {
                        continue;
                    }
                    let id = index
                        .get(name)
                        .copied()
                        .ok_or_else(|| LpParseError::UnknownVariable(name.to_string()))?;
                    terms.push(id);
                }
                terms.sort_unstable();
                terms.dedup();
                constraints.push(Constraint { vars: terms, origins: Vec::new() });
            }
            Section::Binary | Section::Done => {}
            Section::Start => {
                return Err(LpParseError::Malformed(lineno + 1, "expected `Minimize`".into()))
            }
        }
        if section == Section::Objective && !costs.is_empty() && vars.is_empty() {
            // defer materialization until all terms of the (single) obj line
            // are read; handled below
        }
        // materialize variables lazily in objective order
        if section == Section::Objective {
            for (name, _) in &costs {
                if !index.contains_key(name) {
                    index.insert(name.clone(), vars.len() as u32);
                    let fence = name
                        .split('_')
                        .next()
                        .and_then(FenceType::from_token)
                        .unwrap_or(FenceType::Full);
                    vars.push(IlpVar { loc: VarLoc::Named(name.clone()), fence, weight: 0 });
                }
            }
        }
    }
    if section != Section::Done {
        return Err(LpParseError::MissingSection("End"));
    }
    // scale = lcm of all cost denominators
    let scale = costs.iter().fold(1u64, |acc, (_, c)| {
        let g = gcd_u64(acc, c.den);
        acc / g * c.den
    });
    for (name, c) in &costs {
        let id = index[name];
        vars[id as usize].weight = c.num * (scale / c.den);
    }
    Ok(IlpProblem { vars, constraints, scale, warnings: Vec::new() })
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd_u64(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::IlpProblem;

    fn problem(weights: &[u64], cons: &[&[u32]]) -> IlpProblem {
        IlpProblem {
            vars: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| IlpVar {
                    loc: VarLoc::Edge(i as u32),
                    fence: FenceType::Full,
                    weight: w,
                })
                .collect(),
            constraints: cons
                .iter()
                .map(|c| Constraint { vars: c.to_vec(), origins: Vec::new() })
                .collect(),
            scale: 1,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn empty_problem() {
        let p = problem(&[], &[]);
        let s = solve(&p);
        assert_eq!(s.objective_scaled, 0);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.assignment.is_empty());
    }

    #[test]
    fn single_constraint() {
        let p = problem(&[3], &[&[0]]);
        let s = solve(&p);
        assert_eq!(s.objective_scaled, 3);
        assert_eq!(s.assignment, vec![true]);
    }

    #[test]
    fn prefers_cheap_cover() {
        // {0,1} and {1,2}: picking 1 covers both
        let p = problem(&[3, 2, 3], &[&[0, 1], &[1, 2]]);
        let s = solve(&p);
        assert_eq!(s.objective_scaled, 2);
        assert_eq!(s.assignment, vec![false, true, false]);
    }

    #[test]
    fn lexicographic_tie_break() {
        // both vars cost 1 and either covers the single constraint; the
        // lexicographically smallest optimum picks the later variable 0?
        // no: assignments are compared as vectors, 01 < 10, so var 1 wins
        let p = problem(&[1, 1], &[&[0, 1]]);
        let s = solve(&p);
        let b = brute_force_solve(&p).unwrap();
        assert_eq!(s.assignment, vec![false, true]);
        assert_eq!(s.assignment, b.assignment);
    }

    #[test]
    fn brute_force_rejects_huge() {
        let p = problem(&[1; 25], &[&[0]]);
        assert!(matches!(brute_force_solve(&p), Err(SolverError::TooManyVariables(25, _))));
    }

    #[test]
    fn matches_brute_force_on_small_cases() {
        let cases: Vec<(Vec<u64>, Vec<Vec<u32>>)> = vec![
            (vec![3, 2, 1], vec![vec![0, 1], vec![1, 2], vec![0, 2]]),
            (vec![5, 4, 3, 2, 1], vec![vec![0, 1, 2], vec![2, 3], vec![3, 4], vec![0, 4]]),
            (vec![2, 2, 2, 2], vec![vec![0, 1], vec![2, 3]]),
        ];
        for (weights, cons) in cases {
            let cons_refs: Vec<&[u32]> = cons.iter().map(|c| c.as_slice()).collect();
            let p = problem(&weights, &cons_refs);
            let s = solve(&p);
            let b = brute_force_solve(&p).unwrap();
            assert_eq!(s.objective_scaled, b.objective_scaled);
            assert_eq!(s.assignment, b.assignment);
        }
    }

    #[test]
    fn export_single_variable() {
        let p = problem(&[3], &[&[0]]);
        assert_eq!(
            export_lp(&p),
            "Minimize\n obj: 3 f_e0\nSubject To\n c0: f_e0 >= 1\nBinary\n f_e0\nEnd\n"
        );
    }

    #[test]
    fn export_empty() {
        let p = problem(&[], &[]);
        assert_eq!(export_lp(&p), "Minimize\n obj:\nSubject To\nEnd\n");
    }

    #[test]
    fn round_trip() {
        let p = problem(&[3, 2, 7], &[&[0, 1], &[1, 2]]);
        let text = export_lp(&p);
        let q = parse_lp(&text).unwrap();
        assert_eq!(p.canonical_form(), q.canonical_form());
        assert_eq!(export_lp(&q), text);
    }

    proptest::proptest! {
        #[test]
        fn solve_equals_brute_force(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..10usize);
            let m = rng.random_range(1..8usize);
            let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..10u64)).collect();
            let cons: Vec<Vec<u32>> = (0..m)
                .map(|_| {
                    let k = rng.random_range(1..=n);
                    let mut c: Vec<u32> = (0..n as u32).collect();
                    for i in (1..c.len()).rev() {
                        let j = rng.random_range(0..=i);
                        c.swap(i, j);
                    }
                    c.truncate(k);
                    c.sort_unstable();
                    c
                })
                .collect();
            let cons_refs: Vec<&[u32]> = cons.iter().map(|c| c.as_slice()).collect();
            let p = problem(&weights, &cons_refs);
            let s = solve(&p);
            let b = brute_force_solve(&p).unwrap();
            proptest::prop_assert_eq!(s.objective_scaled, b.objective_scaled);
            proptest::prop_assert_eq!(&s.assignment, &b.assignment);
            // returned assignment satisfies every constraint
            for c in &p.constraints {
                proptest::prop_assert!(c.vars.iter().any(|&v| s.assignment[v as usize]));
            }
        }

        #[test]
        fn round_trip_random(seed in 0u64..50) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
            let n = rng.random_range(1..12usize);
            let m = rng.random_range(0..6usize);
            let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..30u64)).collect();
            let cons: Vec<Vec<u32>> = (0..m)
                .map(|_| {
                    let k = rng.random_range(1..=n);
                    let mut c: Vec<u32> = (0..n as u32).collect();
                    for i in (1..c.len()).rev() {
                        let j = rng.random_range(0..=i);
                        c.swap(i, j);
                    }
                    c.truncate(k);
                    c.sort_unstable();
                    c
                })
                .collect();
            let cons_refs: Vec<&[u32]> = cons.iter().map(|c| c.as_slice()).collect();
            let p = problem(&weights, &cons_refs);
            let text = export_lp(&p);
            let q = parse_lp(&text).unwrap();
            proptest::prop_assert_eq!(p.canonical_form(), q.canonical_form());
            proptest::prop_assert_eq!(export_lp(&q), text);
        }
    }
}
