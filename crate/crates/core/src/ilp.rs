//! Covering integer linear program over fence placements.
//!
//! Every delay of every cycle yields one inequality: some fence of an
//! adequate type on some admissible edge (or a dependency on the pair
//! itself) must be set. Admissible edges are
//!
//! * `between(x,y)` — pos edges on some path from `x` to `y`,
//! * `ctrl(d)` — the branch-bracketing subset of `between(d)` whose second
//!   component is a read (control fences stop speculative reads),
//! * `cumul(w,r)` — pos edges before the write or after the read of a
//!   write-to-read competing edge (cumulative fences fix the read-from even
//!   when both adjacent pos pairs are already ordered).
//!
//! Constraints are inequalities, never equalities: several fences may
//! legitimately end up on one edge; optimality is the cost function's job.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::aeg::{Aeg, Dir, EdgeId, EventId};
use crate::arch::{Architecture, DelayKind};
use crate::cycles::{CriticalCycle, Delay};
use crate::ir::FenceType;

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

/// Exact non-negative rational, denominator a power of ten so LP output
/// stays exact.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Cost {
    pub num: u64,
    pub den: u64,
}

impl Cost {
    pub fn new(num: u64, den: u64) -> Cost {
        let g = gcd(num.max(1), den);
        Cost { num: num / g, den: den / g }
    }

    /// Parse `3`, `2.5`, ...
    pub fn parse(s: &str) -> Option<Cost> {
        let s = s.trim();
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
            let frac_v: u64 = frac.parse().ok()?;
            let den = 10u64.checked_pow(frac.len() as u32)?;
            Some(Cost::new(int.checked_mul(den)?.checked_add(frac_v)?, den))
        } else {
            s.parse().ok().map(|n| Cost::new(n, 1))
        }
    }

    pub fn display(self) -> String {
        if self.den == 1 {
            return self.num.to_string();
        }
        // exact decimal when the denominator is 2^a 5^b; fraction otherwise
        let (mut d, mut twos, mut fives) = (self.den, 0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return format!("{}/{}", self.num, self.den);
        }
        let digits = twos.max(fives);
        let pow = 10u64.pow(digits);
        let scaled = self.num * (pow / self.den);
        let digits = digits as usize;
        format!("{}.{:0digits$}", scaled / pow, scaled % pow)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Cost per fence type. Defaults: full 3, lightweight 2, dependency 1,
/// control 1 (configurable; a control fence is assumed comparable to a
/// dependency).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct CostModel {
    costs: [Cost; 4],
}

impl Default for CostModel {
    fn default() -> Self {
        let mut cm = CostModel { costs: [Cost::new(1, 1); 4] };
        cm.set(FenceType::Full, Cost::new(3, 1));
        cm.set(FenceType::Lightweight, Cost::new(2, 1));
        cm.set(FenceType::Dependency, Cost::new(1, 1));
        cm.set(FenceType::Control, Cost::new(1, 1));
        cm
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum CostModelError {
    #[error("malformed cost entry `{0}`, expected e.g. f=3")]
    Malformed(String),
    #[error("unknown fence type `{0}`")]
    UnknownType(String),
    #[error("cost must be positive in `{0}`")]
    NotPositive(String),
}

impl CostModel {
    fn idx(f: FenceType) -> usize {
        match f {
            FenceType::Full => 0,
            FenceType::Lightweight => 1,
            FenceType::Control => 2,
            FenceType::Dependency => 3,
        }
    }

    pub fn set(&mut self, f: FenceType, c: Cost) {
        self.costs[Self::idx(f)] = c;
    }

    pub fn cost(&self, f: FenceType) -> Cost {
        self.costs[Self::idx(f)]
    }

    /// Parse `f=3,lwf=2,dp=1,cf=1`; omitted types keep their defaults.
    pub fn parse(s: &str) -> Result<CostModel, CostModelError> {
        let mut cm = CostModel::default();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| CostModelError::Malformed(part.to_string()))?;
            let fence = FenceType::from_token(name.trim())
                .ok_or_else(|| CostModelError::UnknownType(name.trim().to_string()))?;
            let cost = Cost::parse(value)
                .ok_or_else(|| CostModelError::Malformed(part.to_string()))?;
            if cost.num == 0 {
                return Err(CostModelError::NotPositive(part.to_string()));
            }
            cm.set(fence, cost);
        }
        Ok(cm)
    }

    /// Common denominator of all costs.
    pub fn scale(&self) -> u64 {
        self.costs.iter().fold(1, |acc, c| lcm(acc, c.den))
    }
}

// ---------------------------------------------------------------------------
// between / ctrl / cumul
// ---------------------------------------------------------------------------

#[derive(Error, Debug, PartialEq, Eq)]
pub enum IlpError {
    #[error("events {0} and {1} are not related by pos+")]
    NotPosRelated(EventId, EventId),
}

/// The pos edges lying on some pos path from `x` to `y`.
pub fn between(g: &Aeg, x: EventId, y: EventId) -> Result<Vec<EdgeId>, IlpError> {
    if !g.pos_plus(x, y) {
        return Err(IlpError::NotPosRelated(x, y));
    }
    let mut out = Vec::new();
    for (idx, &(e1, e2)) in g.pos_edges().iter().enumerate() {
        if g.pos_star(x, e1) && g.pos_star(e2, y) {
            out.push(idx as EdgeId);
        }
    }
    Ok(out)
}

/// Branch-bracketing edges of `between(d)` whose second component is a
/// read; a control fence placed before that read stops its speculation.
pub fn ctrl(g: &Aeg, x: EventId, y: EventId) -> Vec<EdgeId> {
    match between(g, x, y) {
        Err(_) => Vec::new(),
        Ok(edges) => edges
            .into_iter()
            .filter(|&e| {
                let (u, v) = g.edge(e);
                g.po_c().contains(&(u, v)) && g.event(v).dir == Dir::R
            })
            .collect(),
    }
}

/// Edges where a cumulative fence can fix the write-to-read communication
/// `(w, r)`: pos-before the write, or pos-after the read.
pub fn cumul(g: &Aeg, w: EventId, r: EventId) -> Vec<EdgeId> {
    let mut out = Vec::new();
    for (idx, &(e1, e2)) in g.pos_edges().iter().enumerate() {
        if g.pos_star(e2, w) || g.pos_star(r, e1) {
            out.push(idx as EdgeId);
        }
    }
    out
}

/// Lightweight fences are cumulative but do not order write-read or
/// read-write shaped edges.
pub fn lwf_eligible(g: &Aeg, e: EdgeId) -> bool {
    let (u, v) = g.edge(e);
    !matches!(
        (g.event(u).dir, g.event(v).dir),
        (Dir::W, Dir::R) | (Dir::R, Dir::W)
    )
}

/// Is this delay already discharged by the fences recorded in the graph?
pub fn delay_covered(g: &Aeg, d: &Delay) -> bool {
    match d.kind {
        DelayKind::PoWR => between(g, d.from, d.to)
            .map(|edges| edges.iter().any(|&e| g.edge_has_fence(e, FenceType::Full)))
            .unwrap_or(false),
        DelayKind::PoWW | DelayKind::PoRW => between(g, d.from, d.to)
            .map(|edges| {
                edges.iter().any(|&e| {
                    g.edge_has_fence(e, FenceType::Full)
                        || g.edge_has_fence(e, FenceType::Lightweight)
                })
            })
            .unwrap_or(false),
        DelayKind::PoRR => {
            let covered_by_fence = between(g, d.from, d.to)
                .map(|edges| {
                    edges.iter().any(|&e| {
                        g.edge_has_fence(e, FenceType::Full)
                            || g.edge_has_fence(e, FenceType::Lightweight)
                    })
                })
                .unwrap_or(false);
            covered_by_fence
                || ctrl(g, d.from, d.to)
                    .iter()
                    .any(|&e| g.edge_has_fence(e, FenceType::Control))
        }
        DelayKind::Rfe => cumul(g, d.from, d.to).iter().any(|&e| {
            g.edge_has_fence(e, FenceType::Full)
                || (lwf_eligible(g, e) && g.edge_has_fence(e, FenceType::Lightweight))
        }),
    }
}

// ---------------------------------------------------------------------------
// Problem construction
// ---------------------------------------------------------------------------

/// Where a 0/1 variable places its fence.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum VarLoc {
    /// On a pos edge of the graph.
    Edge(EdgeId),
    /// On a delay pair itself (dependencies).
    Pair(EventId, EventId),
    /// Parsed back from an LP file; only the name survives.
    Named(String),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IlpVar {
    pub loc: VarLoc,
    pub fence: FenceType,
    /// Objective weight, scaled by [`IlpProblem::scale`].
    pub weight: u64,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConstraintOrigin {
    pub cycle: String,
    pub delay: Delay,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Constraint {
    /// Indices into the variable list, ascending. The bound is always
    /// `>= 1`.
    pub vars: Vec<u32>,
    pub origins: Vec<ConstraintOrigin>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct IlpProblem {
    pub vars: Vec<IlpVar>,
    pub constraints: Vec<Constraint>,
    /// Common denominator: real objective = scaled objective / scale.
    pub scale: u64,
    pub warnings: Vec<String>,
}

impl IlpProblem {
    pub fn var_name(&self, idx: u32, g: Option<&Aeg>) -> String {
        let var = &self.vars[idx as usize];
        match (&var.loc, g) {
            (VarLoc::Named(n), _) => n.clone(),
            (VarLoc::Edge(e), None) => format!("{}_e{}", var.fence.token(), e),
            (VarLoc::Pair(x, y), None) => {
                format!("{}_p{}_{}", var.fence.token(), x, y)
            }
            (VarLoc::Edge(e), Some(g)) => {
                let (u, v) = g.edge(*e);
                format!("{}_({},{})", var.fence.token(), g.display_event(u), g.display_event(v))
            }
            (VarLoc::Pair(x, y), Some(g)) => {
                format!("{}_({},{})", var.fence.token(), g.display_event(*x), g.display_event(*y))
            }
        }
    }

    /// Human-readable constraint, terms sorted for stable comparison.
    pub fn render_constraint(&self, c: &Constraint, g: Option<&Aeg>) -> String {
        let mut names: Vec<String> = c.vars.iter().map(|&v| self.var_name(v, g)).collect();
        names.sort();
        format!("{} >= 1", names.join(" + "))
    }

    pub fn objective_of(&self, assignment: &[bool]) -> u64 {
        self.vars
            .iter()
            .zip(assignment)
            .filter(|(_, &on)| on)
            .map(|(v, _)| v.weight)
            .sum()
    }

    /// (name, weight) pairs plus constraints as name sets; the
    /// representation compared by the LP round-trip property.
    pub fn canonical_form(&self) -> (Vec<(String, u64)>, u64, Vec<Vec<String>>) {
        let vars = self
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| (self.var_name(i as u32, None), v.weight))
            .collect();
        let cons = self
            .constraints
            .iter()
            .map(|c| {
                let mut names: Vec<String> =
                    c.vars.iter().map(|&v| self.var_name(v, None)).collect();
                names.sort();
                names
            })
            .collect();
        (vars, self.scale, cons)
    }
}

/// Build the covering program for a set of cycles.
///
/// One constraint per (cycle, uncovered delay):
/// * write-read: full fences over `between`;
/// * write-write: full or lightweight over `between`;
/// * read-write / read-read: additionally a dependency on the pair when one
///   is constructible, and for read-read control fences over `ctrl`;
/// * write-to-read communication (non-atomic writes only): cumulative
///   fences over `cumul`, lightweight restricted to eligible edges —
///   generated even when the adjacent pos pairs are themselves fixed.
///
/// Constraints with identical variable sets merge; their origins accumulate.
pub fn build_ilp(
    g: &Aeg,
    cycles: &[CriticalCycle],
    arch: Architecture,
    cm: &CostModel,
) -> IlpProblem {
    let scale = cm.scale();
    let mut vars: Vec<IlpVar> = Vec::new();
    let mut var_index: HashMap<(VarLoc, FenceType), u32> = HashMap::new();
    let mut raw_constraints: Vec<(BTreeSet<u32>, ConstraintOrigin)> = Vec::new();
    let mut warnings = Vec::new();

    let intern = |vars: &mut Vec<IlpVar>,
                      var_index: &mut HashMap<(VarLoc, FenceType), u32>,
                      loc: VarLoc,
                      fence: FenceType|
     -> u32 {
        *var_index.entry((loc.clone(), fence)).or_insert_with(|| {
            let c = cm.cost(fence);
            let idx = vars.len() as u32;
            vars.push(IlpVar { loc, fence, weight: c.num * (scale / c.den) });
            idx
        })
    };

    let _ = arch; // delay sets were classified against `arch` already

    for cycle in cycles {
        for delay in &cycle.delays {
            if delay_covered(g, delay) {
                continue;
            }
            let mut terms: BTreeSet<u32> = BTreeSet::new();
            match delay.kind {
                DelayKind::PoWR => {
                    for e in between(g, delay.from, delay.to).unwrap_or_default() {
                        terms.insert(intern(&mut vars, &mut var_index, VarLoc::Edge(e), FenceType::Full));
                    }
                }
                DelayKind::PoWW => {
                    for e in between(g, delay.from, delay.to).unwrap_or_default() {
                        terms.insert(intern(&mut vars, &mut var_index, VarLoc::Edge(e), FenceType::Full));
                        terms.insert(intern(
                            &mut vars,
                            &mut var_index,
                            VarLoc::Edge(e),
                            FenceType::Lightweight,
                        ));
                    }
                }
                DelayKind::PoRW | DelayKind::PoRR => {
                    if g.dep_constructible(delay.from, delay.to) {
                        terms.insert(intern(
                            &mut vars,
                            &mut var_index,
                            VarLoc::Pair(delay.from, delay.to),
                            FenceType::Dependency,
                        ));
                    }
                    for e in between(g, delay.from, delay.to).unwrap_or_default() {
                        terms.insert(intern(&mut vars, &mut var_index, VarLoc::Edge(e), FenceType::Full));
                        terms.insert(intern(
                            &mut vars,
                            &mut var_index,
                            VarLoc::Edge(e),
                            FenceType::Lightweight,
                        ));
                    }
                    if delay.kind == DelayKind::PoRR {
                        for e in ctrl(g, delay.from, delay.to) {
                            terms.insert(intern(
                                &mut vars,
                                &mut var_index,
                                VarLoc::Edge(e),
                                FenceType::Control,
                            ));
                        }
                    }
                }
                DelayKind::Rfe => {
                    let edges = cumul(g, delay.from, delay.to);
                    if edges.is_empty() {
                        warnings.push(format!(
                            "communication {} -> {} has no place for a cumulative fence; \
                             constraint skipped",
                            g.display_event(delay.from),
                            g.display_event(delay.to)
                        ));
                        continue;
                    }
                    for e in edges {
                        terms.insert(intern(&mut vars, &mut var_index, VarLoc::Edge(e), FenceType::Full));
                        if lwf_eligible(g, e) {
                            terms.insert(intern(
                                &mut vars,
                                &mut var_index,
                                VarLoc::Edge(e),
                                FenceType::Lightweight,
                            ));
                        }
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            raw_constraints
                .push((terms, ConstraintOrigin { cycle: cycle.id(), delay: *delay }));
        }
    }

    // canonical variable order: edges ascending, then pairs, fence types in
    // declaration order; remap constraints accordingly
    let mut order: Vec<u32> = (0..vars.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let ka = (&vars[a as usize].loc, vars[a as usize].fence);
        let kb = (&vars[b as usize].loc, vars[b as usize].fence);
        ka.cmp(&kb)
    });
    let mut remap = vec![0u32; vars.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let vars: Vec<IlpVar> = order.iter().map(|&o| vars[o as usize].clone()).collect();

    let mut merged: BTreeMap<Vec<u32>, Vec<ConstraintOrigin>> = BTreeMap::new();
    let mut insertion: Vec<Vec<u32>> = Vec::new();
    for (terms, origin) in raw_constraints {
        let mut key: Vec<u32> = terms.iter().map(|&t| remap[t as usize]).collect();
        key.sort_unstable();
        if !merged.contains_key(&key) {
            insertion.push(key.clone());
        }
        merged.entry(key).or_default().push(origin);
    }
    let constraints = insertion
        .into_iter()
        .map(|key| {
            let origins = merged.remove(&key).unwrap();
            Constraint { vars: key, origins }
        })
        .collect();

    IlpProblem { vars, constraints, scale, warnings }
}

// ---------------------------------------------------------------------------
// Enumerative sizing (for the linear-vs-exponential comparison)
// ---------------------------------------------------------------------------

/// Number of irreducible fence sets an enumerate-then-encode approach needs
/// for a single write-read delay: minimal hitting sets over the pos paths
/// from `x` to `y`. Counted by explicit subset enumeration; `None` when the
/// edge universe exceeds 24 edges. Measurement only, never a solving path.
pub fn irreducible_set_count(g: &Aeg, x: EventId, y: EventId) -> Option<u64> {
    let edges = between(g, x, y).ok()?;
    if edges.len() > 24 {
        return None;
    }
    let edge_pos: HashMap<EdgeId, usize> =
        edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    // all simple pos paths x -> y, as edge bitmasks
    let mut paths: Vec<u32> = Vec::new();
    let mut stack: Vec<(EventId, u32, Vec<EventId>)> = vec![(x, 0, vec![x])];
    while let Some((u, mask, seen)) = stack.pop() {
        if u == y {
            paths.push(mask);
            continue;
        }
        for &v in g.pos_succs(u) {
            if seen.contains(&v) || !g.pos_star(v, y) {
                continue;
            }
            let e = g.edge_id(u, v).unwrap();
            if let Some(&bit) = edge_pos.get(&e) {
                let mut seen2 = seen.clone();
                seen2.push(v);
                stack.push((v, mask | (1 << bit), seen2));
            }
        }
    }
    if paths.is_empty() {
        return Some(0);
    }
    let m = edges.len();
    let mut count = 0u64;
    for subset in 0u32..(1 << m) {
        if !paths.iter().all(|&p| p & subset != 0) {
            continue;
        }
        // minimal: every chosen edge is needed for some path
        let minimal = (0..m).filter(|&b| subset >> b & 1 == 1).all(|b| {
            let without = subset & !(1 << b);
            paths.iter().any(|&p| p & without == 0)
        });
        if minimal {
            count += 1;
        }
    }
    Some(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aeg::DepCandidates;
    use crate::shared::AbstractLoc;

    fn chain3() -> Aeg {
        // e -> f -> g in one thread
        Aeg::from_parts(
            vec![
                (Some("e".into()), Dir::R, AbstractLoc::Var("x".into()), 0),
                (Some("f".into()), Dir::R, AbstractLoc::Var("y".into()), 0),
                (Some("g".into()), Dir::W, AbstractLoc::Var("z".into()), 0),
            ],
            &[(0, 1), (1, 2)],
            &[],
            &[],
            &[],
            DepCandidates::AllPairs,
            vec!["t0".into()],
        )
    }

    #[test]
    fn between_on_a_chain() {
        let g = chain3();
        let edges = between(&g, 0, 2).unwrap();
        let pairs: Vec<_> = edges.iter().map(|&e| g.edge(e)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn between_adjacent_pair() {
        let g = chain3();
        let edges = between(&g, 0, 1).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(g.edge(edges[0]), (0, 1));
    }

    #[test]
    fn between_unrelated_is_error() {
        let g = chain3();
        assert!(between(&g, 2, 0).is_err());
    }

    #[test]
    fn between_diamond_all_edges() {
        // a -> {b1, b2} -> c
        let g = Aeg::from_parts(
            vec![
                (None, Dir::W, AbstractLoc::Var("a".into()), 0),
                (None, Dir::W, AbstractLoc::Var("b".into()), 0),
                (None, Dir::W, AbstractLoc::Var("c".into()), 0),
                (None, Dir::W, AbstractLoc::Var("d".into()), 0),
            ],
            &[(0, 1), (0, 2), (1, 3), (2, 3)],
            &[],
            &[],
            &[],
            DepCandidates::AllPairs,
            vec!["t0".into()],
        );
        let edges = between(&g, 0, 3).unwrap();
        assert_eq!(edges.len(), 4);
    }

    #[test]
    fn ctrl_requires_branch_and_read() {
        // branch after e: poC edge (e, f); f is a read so it qualifies
        let g = Aeg::from_parts(
            vec![
                (Some("e".into()), Dir::R, AbstractLoc::Var("x".into()), 0),
                (Some("f".into()), Dir::R, AbstractLoc::Var("y".into()), 0),
                (Some("g".into()), Dir::W, AbstractLoc::Var("z".into()), 0),
            ],
            &[(0, 1), (1, 2)],
            &[],
            &[],
            &[],
            DepCandidates::AllPairs,
            vec!["t0".into()],
        );
        // no poC recorded: ctrl is empty
        assert!(ctrl(&g, 0, 2).is_empty());
    }

    #[test]
    fn cumul_of_boundary_events_is_empty() {
        // w first in its thread, r last in its thread
        let g = Aeg::from_parts(
            vec![
                (None, Dir::W, AbstractLoc::Var("x".into()), 0),
                (None, Dir::R, AbstractLoc::Var("x".into()), 1),
            ],
            &[],
            &[(0, 1)],
            &[],
            &[],
            DepCandidates::AllPairs,
            vec!["t0".into(), "t1".into()],
        );
        assert!(cumul(&g, 0, 1).is_empty());
    }

    #[test]
    fn cumul_includes_upstream_chain() {
        // chain a -> b -> w in thread 0, r alone in thread 1
        let g = Aeg::from_parts(
            vec![
                (None, Dir::W, AbstractLoc::Var("a".into()), 0),
                (None, Dir::W, AbstractLoc::Var("b".into()), 0),
                (None, Dir::W, AbstractLoc::Var("x".into()), 0),
                (None, Dir::R, AbstractLoc::Var("x".into()), 1),
            ],
            &[(0, 1), (1, 2)],
            &[(2, 3)],
            &[],
            &[],
            DepCandidates::AllPairs,
            vec!["t0".into(), "t1".into()],
        );
        let edges = cumul(&g, 2, 3);
        assert_eq!(edges.len(), 2);
    }

    #[test]
    fn cost_model_parses() {
        let cm = CostModel::parse("f=3,lwf=2,dp=1,cf=1").unwrap();
        assert_eq!(cm.cost(FenceType::Full), Cost::new(3, 1));
        let cm = CostModel::parse("lwf=2.5").unwrap();
        assert_eq!(cm.cost(FenceType::Lightweight), Cost::new(5, 2));
        assert_eq!(cm.cost(FenceType::Lightweight).display(), "2.5");
        assert!(CostModel::parse("f=0").is_err());
        assert!(CostModel::parse("q=2").is_err());
    }

    #[test]
    fn empty_cycle_list_empty_problem() {
        let g = chain3();
        let p = build_ilp(&g, &[], Architecture::Power, &CostModel::default());
        assert!(p.vars.is_empty());
        assert!(p.constraints.is_empty());
    }

    #[test]
    fn single_powr_delay_single_variable() {
        // two threads, sb shape, but only look at one delay
        let g = Aeg::from_parts(
            vec![
                (None, Dir::W, AbstractLoc::Var("x".into()), 0),
                (None, Dir::R, AbstractLoc::Var("y".into()), 0),
                (None, Dir::W, AbstractLoc::Var("y".into()), 1),
                (None, Dir::R, AbstractLoc::Var("x".into()), 1),
            ],
            &[(0, 1), (2, 3)],
            &[(0, 3), (1, 2)],
            &[],
            &[],
            DepCandidates::AllPairs,
            vec!["t0".into(), "t1".into()],
        );
        let cycles =
            crate::cycles::enumerate_critical_cycles(&g, Architecture::Tso, &Default::default());
        assert_eq!(cycles.cycles.len(), 1);
        let p = build_ilp(&g, &cycles.cycles, Architecture::Tso, &CostModel::default());
        // two poWR delays, each with a single between edge
        assert_eq!(p.constraints.len(), 2);
        assert_eq!(p.vars.len(), 2);
        for v in &p.vars {
            assert_eq!(v.fence, FenceType::Full);
            assert_eq!(v.weight, 3);
        }
    }

    #[test]
    fn removing_a_cycle_never_grows_the_problem() {
        let g = Aeg::from_parts(
            vec![
                (None, Dir::W, AbstractLoc::Var("x".into()), 0),
                (None, Dir::W, AbstractLoc::Var("y".into()), 0),
                (None, Dir::R, AbstractLoc::Var("y".into()), 1),
                (None, Dir::R, AbstractLoc::Var("x".into()), 1),
                (None, Dir::W, AbstractLoc::Var("y".into()), 2),
            ],
            &[(0, 1), (2, 3)],
            &[(1, 2), (0, 3), (2, 4), (1, 4)],
            &[],
            &[],
            DepCandidates::AllPairs,
            vec!["t0".into(), "t1".into(), "t2".into()],
        );
        let cycles =
            crate::cycles::enumerate_critical_cycles(&g, Architecture::Power, &Default::default());
        let full = build_ilp(&g, &cycles.cycles, Architecture::Power, &CostModel::default());
        for drop in 0..cycles.cycles.len() {
            let subset: Vec<_> = cycles
                .cycles
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, c)| c.clone())
                .collect();
            let smaller = build_ilp(&g, &subset, Architecture::Power, &CostModel::default());
            assert!(smaller.vars.len() <= full.vars.len());
            assert!(smaller.constraints.len() <= full.constraints.len());
        }
    }
}
