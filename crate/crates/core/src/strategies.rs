//! The five fencing policies, applied over the same analysis pipeline.
//!
//! * `m` — build the event graph, enumerate potential critical cycles,
//!   solve the covering program, map the chosen placements back to the IR;
//! * `p` — delay-set style: fence every program-order delay pair occurring
//!   in a cycle with the weakest adequate fence on each admissible edge,
//!   then drop fences made redundant by others on every path;
//! * `v` — acquire/release for volatile-marked variables only (no fences
//!   needed on TSO-class machines; lightweight fences around volatile
//!   accesses where writes are non-atomic);
//! * `e` — a full fence after every shared access;
//! * `h` — a full fence after every write (every access where writes are
//!   non-atomic) to shared data.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::aeg::{build_aeg, duplicate_loop_bodies, Aeg, Dir, EventId};
use crate::arch::{fence_options, Architecture, DelayKind};
use crate::cycles::{enumerate_critical_cycles, Caps, CycleSet};
use crate::ilp::{build_ilp, delay_covered, CostModel, VarLoc};
use crate::ir::{validate, Diagnostic, FenceType, Position, Program};
use crate::shared::{classify_locations, points_to, LocationTable, PointsToMap, Precision, SharedError};
use crate::solver::{solve_with_cap, SolveStatus, DEFAULT_NODE_CAP};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Strategy {
    /// Cycle enumeration plus optimal covering (the `m` policy).
    Optimal,
    /// Delay set analysis with redundancy removal (the `p` policy).
    DelaySet,
    /// Acquire/release ordering for volatile variables (the `v` policy).
    Volatile,
    /// Full fence after each shared access (the `e` policy).
    EveryAccess,
    /// Full fence after every write, or every access under non-atomic
    /// writes (the `h` policy).
    Heavy,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Optimal,
        Strategy::DelaySet,
        Strategy::Volatile,
        Strategy::EveryAccess,
        Strategy::Heavy,
    ];

    pub fn from_token(s: &str) -> Option<Strategy> {
        match s {
            "m" => Some(Strategy::Optimal),
            "p" => Some(Strategy::DelaySet),
            "v" => Some(Strategy::Volatile),
            "e" => Some(Strategy::EveryAccess),
            "h" => Some(Strategy::Heavy),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Strategy::Optimal => "m",
            Strategy::DelaySet => "p",
            Strategy::Volatile => "v",
            Strategy::EveryAccess => "e",
            Strategy::Heavy => "h",
        }
    }
}

/// Where a planned fence goes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Site {
    /// On a pos edge; full/lightweight fences follow the position policy,
    /// control fences always sit before the target read.
    PosEdge { from: EventId, to: EventId, from_pos: Position, to_pos: Position },
    /// A dependency from a source read to a later access.
    DepPair {
        source: EventId,
        target: EventId,
        source_pos: Position,
        target_pos: Position,
        source_base: String,
    },
    AfterInstr(Position),
    BeforeInstr(Position),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Placement {
    pub fence: FenceType,
    pub site: Site,
    /// Canonical ids of the cycles this placement helps forbid.
    pub origins: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FencePlan {
    pub strategy: Strategy,
    pub arch: Architecture,
    pub placements: Vec<Placement>,
    pub total_scaled: u64,
    pub scale: u64,
    pub capped: bool,
    pub warnings: Vec<String>,
}

impl FencePlan {
    pub fn empty(strategy: Strategy, arch: Architecture) -> FencePlan {
        FencePlan {
            strategy,
            arch,
            placements: Vec::new(),
            total_scaled: 0,
            scale: 1,
            capped: false,
            warnings: Vec::new(),
        }
    }

    pub fn cost_display(&self) -> String {
        crate::ilp::Cost::new(self.total_scaled, self.scale).display()
    }

    pub fn count_of(&self, fence: FenceType) -> usize {
        self.placements.iter().filter(|p| p.fence == fence).count()
    }
}

#[derive(Error, Debug)]
pub enum AnalyzeError {
    #[error("program has {} validation diagnostics; first: {first}", .diags.len(), first = .diags[0])]
    Invalid { diags: Vec<Diagnostic> },
    #[error(transparent)]
    Shared(#[from] SharedError),
}

#[derive(Clone, Copy, Debug)]
pub struct AnalysisOptions {
    pub precision: Precision,
    pub caps: Caps,
    pub solver_node_cap: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            precision: Precision::Precise,
            caps: Caps::default(),
            solver_node_cap: DEFAULT_NODE_CAP,
        }
    }
}

/// Everything the strategies need, computed once per program/architecture.
pub struct Analysis {
    pub program: Program,
    pub prepared: Program,
    pub table: LocationTable,
    pub pt: PointsToMap,
    pub aeg: Aeg,
    pub arch: Architecture,
    pub cycles: CycleSet,
    pub options: AnalysisOptions,
}

/// Validate, classify, resolve pointers, duplicate qualifying loop bodies,
/// build the event graph and enumerate its potential critical cycles.
pub fn analyze(
    program: &Program,
    arch: Architecture,
    options: AnalysisOptions,
) -> Result<Analysis, AnalyzeError> {
    let diags = validate(program);
    if !diags.is_empty() {
        return Err(AnalyzeError::Invalid { diags });
    }
    let table = classify_locations(program)?;
    let pt = points_to(program, &table, options.precision);
    let prepared = duplicate_loop_bodies(program, &table, &pt);
    let aeg = build_aeg(&prepared, &table, &pt);
    let cycles = enumerate_critical_cycles(&aeg, arch, &options.caps);
    Ok(Analysis {
        program: program.clone(),
        prepared,
        table,
        pt,
        aeg,
        arch,
        cycles,
        options,
    })
}

/// Compute the fence plan of one strategy over a finished analysis.
pub fn apply_strategy(a: &Analysis, strategy: Strategy, cm: &CostModel) -> FencePlan {
    match strategy {
        Strategy::Optimal => optimal_plan(a, cm),
        Strategy::DelaySet => delay_set_plan(a, cm),
        Strategy::Volatile => volatile_plan(a, cm),
        Strategy::EveryAccess => per_access_plan(a, cm, false),
        Strategy::Heavy => per_access_plan(a, cm, true),
    }
}

fn optimal_plan(a: &Analysis, cm: &CostModel) -> FencePlan {
    let problem = build_ilp(&a.aeg, &a.cycles.cycles, a.arch, cm);
    let solution = solve_with_cap(&problem, a.options.solver_node_cap);
    let mut placements = Vec::new();
    for idx in solution.chosen() {
        let var = &problem.vars[idx as usize];
        let mut origins: Vec<String> = problem
            .constraints
            .iter()
            .filter(|c| c.vars.contains(&idx))
            .flat_map(|c| c.origins.iter().map(|o| o.cycle.clone()))
            .collect();
        origins.sort();
        origins.dedup();
        let site = match &var.loc {
            VarLoc::Edge(e) => {
                let (u, v) = a.aeg.edge(*e);
                Site::PosEdge {
                    from: u,
                    to: v,
                    from_pos: a.aeg.event(u).pos,
                    to_pos: a.aeg.event(v).pos,
                }
            }
            VarLoc::Pair(x, y) => Site::DepPair {
                source: *x,
                target: *y,
                source_pos: a.aeg.event(*x).pos,
                target_pos: a.aeg.event(*y).pos,
                source_base: a
                    .aeg
                    .event(*x)
                    .loc
                    .base()
                    .unwrap_or("*")
                    .to_string(),
            },
            VarLoc::Named(_) => continue, // never produced by build_ilp
        };
        placements.push(Placement { fence: var.fence, site, origins });
    }
    let mut warnings = problem.warnings.clone();
    warnings.extend(a.cycles.notes.iter().cloned());
    FencePlan {
        strategy: Strategy::Optimal,
        arch: a.arch,
        placements,
        total_scaled: solution.objective_scaled,
        scale: solution.scale,
        capped: a.cycles.capped || solution.status == SolveStatus::CapExceeded,
        warnings,
    }
}

/// Delay-set policy: the weakest edge fence adequate for each program-order
/// delay pair found in any cycle, on every admissible edge, then redundancy
/// removal — a fence is dropped when every path of every pair it serves is
/// still covered by the remaining ones.
fn delay_set_plan(a: &Analysis, cm: &CostModel) -> FencePlan {
    let g = &a.aeg;
    let mut pairs: BTreeSet<(DelayKind, EventId, EventId)> = BTreeSet::new();
    for cycle in &a.cycles.cycles {
        for d in &cycle.delays {
            if d.kind != DelayKind::Rfe && !delay_covered(g, d) {
                pairs.insert((d.kind, d.from, d.to));
            }
        }
    }
    // weakest adequate fence that is a plain edge fence
    let weakest = |kind: DelayKind| -> FenceType {
        match fence_options(kind, a.arch) {
            Ok(opts) if opts.contains(&FenceType::Lightweight) => FenceType::Lightweight,
            _ => FenceType::Full,
        }
    };
    let mut chosen: BTreeMap<(u32, FenceType), ()> = BTreeMap::new();
    for &(kind, x, y) in &pairs {
        let fence = weakest(kind);
        for e in crate::ilp::between(g, x, y).unwrap_or_default() {
            chosen.insert((e, fence), ());
        }
    }
    let mut retained: Vec<(u32, FenceType)> = chosen.into_keys().collect();

    // a retained or pre-existing fence of adequate strength blocks an edge
    let adequate = |kind: DelayKind, fence: FenceType| -> bool {
        match kind {
            DelayKind::PoWR => fence == FenceType::Full,
            _ => matches!(fence, FenceType::Full | FenceType::Lightweight),
        }
    };
    let covered = |retained: &[(u32, FenceType)], kind: DelayKind, x: EventId, y: EventId| -> bool {
        // no pos path from x to y through unblocked edges
        let blocked = |u: EventId, v: EventId| -> bool {
            let e = g.edge_id(u, v).unwrap();
            retained.iter().any(|&(re, rf)| re == e && adequate(kind, rf))
                || g.fences_on(e)
                    .map(|fs| fs.iter().any(|&f| adequate(kind, f)))
                    .unwrap_or(false)
        };
        let mut stack = vec![x];
        let mut seen = BTreeSet::new();
        while let Some(u) = stack.pop() {
            for &v in g.pos_succs(u) {
                if blocked(u, v) {
                    continue;
                }
                if v == y {
                    return false;
                }
                if seen.insert(v) && g.pos_plus(v, y) {
                    stack.push(v);
                }
            }
        }
        true
    };

    // greedy removal in canonical order
    let mut i = 0;
    while i < retained.len() {
        let candidate = retained.remove(i);
        let still_ok = pairs.iter().all(|&(kind, x, y)| covered(&retained, kind, x, y));
        if still_ok {
            continue; // dropped for good
        }
        retained.insert(i, candidate);
        i += 1;
    }

    let scale = cm.scale();
    let mut total = 0u64;
    let placements: Vec<Placement> = retained
        .into_iter()
        .map(|(e, fence)| {
            let (u, v) = g.edge(e);
            let c = cm.cost(fence);
            total += c.num * (scale / c.den);
            Placement {
                fence,
                site: Site::PosEdge {
                    from: u,
                    to: v,
                    from_pos: g.event(u).pos,
                    to_pos: g.event(v).pos,
                },
                origins: Vec::new(),
            }
        })
        .collect();
    let mut warnings = Vec::new();
    if a.arch.has_non_atomic_writes() {
        warnings.push(
            "delay-set fencing covers program-order delays only; communication delays are \
             outside this policy"
                .to_string(),
        );
    }
    warnings.extend(a.cycles.notes.iter().cloned());
    FencePlan {
        strategy: Strategy::DelaySet,
        arch: a.arch,
        placements,
        total_scaled: total,
        scale,
        capped: a.cycles.capped,
        warnings,
    }
}

/// Group events by their originating instruction.
fn events_by_instr(g: &Aeg) -> BTreeMap<Position, Vec<EventId>> {
    let mut map: BTreeMap<Position, Vec<EventId>> = BTreeMap::new();
    for ev in g.events() {
        map.entry(ev.pos).or_default().push(ev.id);
    }
    map
}

fn per_access_plan(a: &Analysis, cm: &CostModel, writes_only_on_strong: bool) -> FencePlan {
    let heavy_all = a.arch.has_non_atomic_writes();
    let scale = cm.scale();
    let c = cm.cost(FenceType::Full);
    let mut placements = Vec::new();
    for (pos, events) in events_by_instr(&a.aeg) {
        let qualifies = if writes_only_on_strong && !heavy_all {
            events.iter().any(|&e| a.aeg.event(e).dir == Dir::W)
        } else {
            true
        };
        if qualifies {
            placements.push(Placement {
                fence: FenceType::Full,
                site: Site::AfterInstr(pos),
                origins: Vec::new(),
            });
        }
    }
    let total = placements.len() as u64 * (c.num * (scale / c.den));
    FencePlan {
        strategy: if writes_only_on_strong { Strategy::Heavy } else { Strategy::EveryAccess },
        arch: a.arch,
        placements,
        total_scaled: total,
        scale,
        capped: false,
        warnings: Vec::new(),
    }
}

fn volatile_plan(a: &Analysis, cm: &CostModel) -> FencePlan {
    let mut plan = FencePlan::empty(Strategy::Volatile, a.arch);
    plan.scale = cm.scale();
    let any_volatile = a.table.iter().any(|(_, info)| info.is_volatile);
    if !any_volatile {
        plan.warnings.push("no volatile-marked variables; the plan is empty".to_string());
        return plan;
    }
    if !a.arch.has_non_atomic_writes() {
        // acquire/release comes for free on TSO-class machines
        return plan;
    }
    let c = cm.cost(FenceType::Lightweight);
    let mut total = 0u64;
    for (pos, events) in events_by_instr(&a.aeg) {
        let volat = |e: &EventId| {
            a.aeg
                .event(*e)
                .loc
                .base()
                .map(|b| a.table.is_volatile(b))
                .unwrap_or(false)
        };
        if events.iter().filter(|e| volat(e)).any(|&e| a.aeg.event(e).dir == Dir::W) {
            plan.placements.push(Placement {
                fence: FenceType::Lightweight,
                site: Site::BeforeInstr(pos),
                origins: Vec::new(),
            });
            total += c.num * (plan.scale / c.den);
        }
        if events.iter().filter(|e| volat(e)).any(|&e| a.aeg.event(e).dir == Dir::R) {
            plan.placements.push(Placement {
                fence: FenceType::Lightweight,
                site: Site::AfterInstr(pos),
                origins: Vec::new(),
            });
            total += c.num * (plan.scale / c.den);
        }
    }
    plan.total_scaled = total;
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    const MP: &str = "
        shared x
        shared y
        local r1
        local r2
        thread t0 {
          start_thread t1;
          x = 1;
          y = 1;
          end_thread
        }
        thread t1 {
          r1 = y;
          r2 = x;
          end_thread
        }
    ";

    fn run(src: &str, arch: Architecture, strategy: Strategy) -> FencePlan {
        let p = parse_program(src).unwrap();
        let a = analyze(&p, arch, AnalysisOptions::default()).unwrap();
        apply_strategy(&a, strategy, &CostModel::default())
    }

    #[test]
    fn mp_tso_optimal_is_empty() {
        let plan = run(MP, Architecture::Tso, Strategy::Optimal);
        assert!(plan.placements.is_empty());
        assert_eq!(plan.total_scaled, 0);
    }

    #[test]
    fn mp_power_optimal_covers_both_pairs() {
        let p = parse_program(MP).unwrap();
        let a = analyze(&p, Architecture::Power, AnalysisOptions::default()).unwrap();
        let plan = apply_strategy(&a, Strategy::Optimal, &CostModel::default());
        assert_eq!(plan.placements.len(), 2);
        // a cumulative fence on the writer edge
        let writer_edge = plan.placements.iter().any(|pl| {
            matches!(&pl.site, Site::PosEdge { from, to, .. }
                if a.aeg.event(*from).dir == Dir::W && a.aeg.event(*to).dir == Dir::W
                    && matches!(pl.fence, FenceType::Full | FenceType::Lightweight))
        });
        assert!(writer_edge, "write-write pair needs a cumulative fence: {plan:?}");
        // and a fix on the reader pair
        let reader_fix = plan.placements.iter().any(|pl| {
            matches!(&pl.site, Site::PosEdge { from, to, .. }
                if a.aeg.event(*from).dir == Dir::R && a.aeg.event(*to).dir == Dir::R)
                || matches!(&pl.site, Site::DepPair { .. })
        });
        assert!(reader_fix, "read-read pair needs a fix: {plan:?}");
        let verdict =
            crate::oracle::verify_coverage(&a.cycles.cycles, &plan, &a.aeg, Architecture::Power);
        assert!(verdict.covered);
    }

    #[test]
    fn per_access_counts_accessing_instructions() {
        let plan = run(MP, Architecture::Tso, Strategy::EveryAccess);
        assert_eq!(plan.placements.len(), 4);
        assert_eq!(plan.total_scaled, 12); // four full fences at cost 3
    }

    #[test]
    fn heavy_fences_writes_on_tso_and_everything_on_power() {
        let tso = run(MP, Architecture::Tso, Strategy::Heavy);
        assert_eq!(tso.placements.len(), 2); // the two writes
        let power = run(MP, Architecture::Power, Strategy::Heavy);
        assert_eq!(power.placements.len(), 4);
    }

    #[test]
    fn volatile_empty_on_tso_and_warns_without_annotations() {
        let plan = run(MP, Architecture::Tso, Strategy::Volatile);
        assert!(plan.placements.is_empty());
        assert!(!plan.warnings.is_empty());

        let src = "
            shared f volatile
            local r
            thread t0 { start_thread t1; f = 1; end_thread }
            thread t1 { r = f; end_thread }
        ";
        let tso = run(src, Architecture::Tso, Strategy::Volatile);
        assert!(tso.placements.is_empty());
        assert!(tso.warnings.is_empty());
        let power = run(src, Architecture::Power, Strategy::Volatile);
        assert_eq!(power.placements.len(), 2); // lwf before the write, after the read
    }

    #[test]
    fn delay_set_covers_and_costs_at_most_every_access() {
        // classic store-buffering needs fences on both sides under TSO
        let sb = "
            shared x
            shared y
            local r1
            local r2
            thread t0 { start_thread t1; x = 1; r1 = y; end_thread }
            thread t1 { y = 1; r2 = x; end_thread }
        ";
        let p = parse_program(sb).unwrap();
        let a = analyze(&p, Architecture::Tso, AnalysisOptions::default()).unwrap();
        let cm = CostModel::default();
        let m = apply_strategy(&a, Strategy::Optimal, &cm);
        let ds = apply_strategy(&a, Strategy::DelaySet, &cm);
        let e = apply_strategy(&a, Strategy::EveryAccess, &cm);
        assert_eq!(ds.placements.len(), 2);
        for plan in [&m, &ds, &e] {
            let verdict =
                crate::oracle::verify_coverage(&a.cycles.cycles, plan, &a.aeg, Architecture::Tso);
            assert!(verdict.covered, "{:?} plan uncovered", plan.strategy);
        }
        assert!(m.total_scaled * e.scale <= e.total_scaled * m.scale);
        assert!(ds.total_scaled * e.scale <= e.total_scaled * ds.scale);
        assert!(m.total_scaled * ds.scale <= ds.total_scaled * m.scale);
    }
}
