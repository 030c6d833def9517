//! Enumeration of potential critical cycles.
//!
//! A potential critical cycle alternates per-thread program-order hops
//! (`pos⁺`) and competing edges, such that
//!
//! 1. at least one hop is a delay for the target architecture,
//! 2. each thread contributes at most two accesses, on distinct locations,
//! 3. each (fully named) location is accessed at most three times, from
//!    distinct threads.
//!
//! Cycles whose delays are all discharged by fences already present in the
//! program are dropped. Cycles consisting purely of competing edges (a
//! single-location communication chain) or purely of program order (a loop
//! back edge) never witness an SC violation and are rejected as well.
//!
//! The search runs Tarjan's SCC decomposition over the hop graph, then a
//! rooted DFS within each component that only visits events above the root,
//! pruned by the conditions above; every cycle is found exactly once, with
//! its smallest member first, which doubles as the canonical form.

use std::time::{Duration, Instant};

use crate::aeg::{Aeg, Dir, EventId};
use crate::arch::{is_delay, Architecture, DelayKind};
use crate::ilp::delay_covered;

/// Enumeration limits; exceeding one is reported, not silent.
#[derive(Clone, Copy, Debug)]
pub struct Caps {
    pub max_cycles: usize,
    pub scc_time_limit: Duration,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_cycles: 200_000, scc_time_limit: Duration::from_secs(60) }
    }
}

/// One delay of a cycle: either a program-order pair or an external
/// read-from abstracted by a write-to-read competing edge.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Delay {
    pub kind: DelayKind,
    pub from: EventId,
    pub to: EventId,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CriticalCycle {
    /// Accesses of the cycle in traversal order, smallest id first.
    /// Consecutive same-thread members are `pos⁺` hops, thread changes are
    /// competing edges.
    pub members: Vec<EventId>,
    /// All delays, covered or not.
    pub delays: Vec<Delay>,
}

impl CriticalCycle {
    pub fn id(&self) -> String {
        let parts: Vec<String> = self.members.iter().map(|m| m.to_string()).collect();
        format!("c{}", parts.join("-"))
    }

    pub fn describe(&self, g: &Aeg) -> String {
        let parts: Vec<String> = self.members.iter().map(|&m| g.describe_event(m)).collect();
        let delays: Vec<String> = self
            .delays
            .iter()
            .map(|d| {
                format!("{}({},{})", d.kind.token(), g.display_event(d.from), g.display_event(d.to))
            })
            .collect();
        format!("{} | delays: {}", parts.join(" -> "), delays.join(" "))
    }
}

#[derive(Clone, Debug, Default)]
pub struct CycleSet {
    pub cycles: Vec<CriticalCycle>,
    pub capped: bool,
    pub notes: Vec<String>,
}

/// Tag each hop of a raw member cycle with its delay classification.
/// Consecutive same-thread members form a program-order pair whose kind is
/// given by the endpoint directions; a read-after-write competing edge can
/// abstract an external read-from, relaxed only where writes are
/// non-atomic. Pairs already ordered by a dependency are safe.
pub fn classify_delays(g: &Aeg, members: &[EventId], arch: Architecture) -> Vec<Delay> {
    let mut delays = Vec::new();
    let n = members.len();
    for i in 0..n {
        let u = members[i];
        let v = members[(i + 1) % n];
        if g.event(u).thread == g.event(v).thread {
            let kind = match (g.event(u).dir, g.event(v).dir) {
                (Dir::W, Dir::R) => DelayKind::PoWR,
                (Dir::W, Dir::W) => DelayKind::PoWW,
                (Dir::R, Dir::W) => DelayKind::PoRW,
                (Dir::R, Dir::R) => DelayKind::PoRR,
            };
            if is_delay(kind, arch) {
                let dep_safe = matches!(kind, DelayKind::PoRW | DelayKind::PoRR)
                    && arch.preserves_dependencies()
                    && g.dep_exists(u, v);
                if !dep_safe {
                    delays.push(Delay { kind, from: u, to: v });
                }
            }
        } else if arch.has_non_atomic_writes()
            && g.event(u).dir == Dir::W
            && g.event(v).dir == Dir::R
        {
            delays.push(Delay { kind: DelayKind::Rfe, from: u, to: v });
        }
    }
    delays
}

/// Enumerate the potential critical cycles of `g` under `arch`.
pub fn enumerate_critical_cycles(g: &Aeg, arch: Architecture, caps: &Caps) -> CycleSet {
    let n = g.n_events();
    if n == 0 {
        return CycleSet::default();
    }

    // hop successors: pos⁺ within the thread, cmp across threads
    let mut hop_succs: Vec<Vec<EventId>> = vec![Vec::new(); n];
    for u in 0..n as EventId {
        let mut succs = Vec::new();
        for v in 0..n as EventId {
            if v != u && g.event(u).thread == g.event(v).thread && g.pos_plus(u, v) {
                succs.push(v);
            }
        }
        succs.extend(g.cmp_neighbors(u).iter().copied());
        succs.sort_unstable();
        succs.dedup();
        hop_succs[u as usize] = succs;
    }

    let sccs = tarjan_sccs(n, &hop_succs);
    let mut scc_of = vec![usize::MAX; n];
    for (i, scc) in sccs.iter().enumerate() {
        for &v in scc {
            scc_of[v as usize] = i;
        }
    }

    let max_thread = g.events().iter().map(|e| e.thread).max().unwrap_or(0) as usize;
    let mut search = Search {
        g,
        arch,
        hop_succs: &hop_succs,
        scc_of: &scc_of,
        caps,
        path: Vec::new(),
        on_path: vec![false; n],
        thread_events: vec![Vec::new(); max_thread + 1],
        pos_hops: 0,
        cmp_hops: 0,
        out: CycleSet::default(),
        deadline: Instant::now(),
        steps: 0,
        timed_out: false,
    };

    let mut ordered_sccs = sccs;
    for scc in &mut ordered_sccs {
        scc.sort_unstable();
    }
    ordered_sccs.sort();
    'sccs: for scc in &ordered_sccs {
        if scc.len() < 2 {
            continue;
        }
        search.deadline = Instant::now() + caps.scc_time_limit;
        search.timed_out = false;
        for &root in scc {
            // every member of a cycle touches a cmp edge
            if g.cmp_neighbors(root).is_empty() {
                continue;
            }
            search.start(root);
            if search.out.capped && !search.timed_out {
                search.out.notes.push(format!(
                    "cycle cap of {} reached; enumeration truncated",
                    caps.max_cycles
                ));
                break 'sccs;
            }
            if search.timed_out {
                search.out.capped = true;
                search
                    .out
                    .notes
                    .push("per-component time limit exceeded; enumeration truncated".to_string());
                break;
            }
        }
    }

    let mut out = search.out;
    out.cycles.sort_by(|a, b| a.members.cmp(&b.members));
    out.cycles.dedup_by(|a, b| a.members == b.members);
    out
}

struct Search<'a> {
    g: &'a Aeg,
    arch: Architecture,
    hop_succs: &'a [Vec<EventId>],
    scc_of: &'a [usize],
    caps: &'a Caps,
    path: Vec<EventId>,
    on_path: Vec<bool>,
    thread_events: Vec<Vec<EventId>>,
    pos_hops: u32,
    cmp_hops: u32,
    out: CycleSet,
    deadline: Instant,
    steps: u32,
    timed_out: bool,
}

impl<'a> Search<'a> {
    fn start(&mut self, root: EventId) {
        self.path.clear();
        self.pos_hops = 0;
        self.cmp_hops = 0;
        self.push(root);
        self.dfs(root);
        self.pop();
    }

    fn push(&mut self, v: EventId) {
        self.path.push(v);
        self.on_path[v as usize] = true;
        self.thread_events[self.g.event(v).thread as usize].push(v);
    }

    fn pop(&mut self) {
        let v = self.path.pop().unwrap();
        self.on_path[v as usize] = false;
        self.thread_events[self.g.event(v).thread as usize].pop();
    }

    /// Condition (2): at most two accesses per thread, distinct locations.
    /// Condition (3): at most three accesses per named location, from
    /// distinct threads. Star locations may denote different cells, so only
    /// definite equality counts.
    fn admissible(&self, v: EventId) -> bool {
        let ev = self.g.event(v);
        let mates = &self.thread_events[ev.thread as usize];
        if mates.len() >= 2 {
            return false;
        }
        if mates.iter().any(|&m| self.g.event(m).loc.definitely_same(&ev.loc)) {
            return false;
        }
        let same_loc = self
            .path
            .iter()
            .filter(|&&m| self.g.event(m).loc.definitely_same(&ev.loc))
            .count();
        if same_loc >= 3 {
            return false;
        }
        // definite-location accesses must come from distinct threads; the
        // same-thread case is already excluded above
        true
    }

    fn dfs(&mut self, u: EventId) {
        if self.out.capped || self.timed_out {
            return;
        }
        self.steps += 1;
        if self.steps & 0x3ff == 0 && Instant::now() > self.deadline {
            self.timed_out = true;
            return;
        }
        let root = self.path[0];
        let same_thread_root = self.g.event(u).thread == self.g.event(root).thread;
        for i in 0..self.hop_succs[u as usize].len() {
            let v = self.hop_succs[u as usize][i];
            if v == root {
                // closing hop
                let closing_pos = same_thread_root;
                if self.path.len() >= 2 {
                    let pos_hops = self.pos_hops + closing_pos as u32;
                    let cmp_hops = self.cmp_hops + !closing_pos as u32;
                    if pos_hops >= 1 && cmp_hops >= 1 {
                        self.emit();
                    }
                }
                continue;
            }
            if v < root || self.on_path[v as usize] || self.scc_of[v as usize] != self.scc_of[root as usize]
            {
                continue;
            }
            if !self.admissible(v) {
                continue;
            }
            let is_pos = self.g.event(u).thread == self.g.event(v).thread;
            if is_pos {
                self.pos_hops += 1;
            } else {
                self.cmp_hops += 1;
            }
            self.push(v);
            self.dfs(v);
            self.pop();
            if is_pos {
                self.pos_hops -= 1;
            } else {
                self.cmp_hops -= 1;
            }
            if self.out.capped || self.timed_out {
                return;
            }
        }
    }

    fn emit(&mut self) {
        let members = self.path.clone();
        let delays = classify_delays(self.g, &members, self.arch);
        if delays.is_empty() {
            return;
        }
        if delays.iter().all(|d| delay_covered(self.g, d)) {
            return;
        }
        self.out.cycles.push(CriticalCycle { members, delays });
        if self.out.cycles.len() >= self.caps.max_cycles {
            self.out.capped = true;
        }
    }
}

fn tarjan_sccs(n: usize, succs: &[Vec<EventId>]) -> Vec<Vec<EventId>> {
    // iterative Tarjan
    #[derive(Clone, Copy)]
    struct Frame {
        v: EventId,
        succ_idx: usize,
    }
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<EventId> = Vec::new();
    let mut next_index = 0u32;
    let mut sccs = Vec::new();
    let mut frames: Vec<Frame> = Vec::new();

    for start in 0..n as EventId {
        if index[start as usize] != u32::MAX {
            continue;
        }
        frames.push(Frame { v: start, succ_idx: 0 });
        index[start as usize] = next_index;
        low[start as usize] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start as usize] = true;

        while let Some(frame) = frames.last_mut() {
            let v = frame.v;
            if frame.succ_idx < succs[v as usize].len() {
                let w = succs[v as usize][frame.succ_idx];
                frame.succ_idx += 1;
                if index[w as usize] == u32::MAX {
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    frames.push(Frame { v: w, succ_idx: 0 });
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                frames.pop();
                if let Some(parent) = frames.last() {
                    low[parent.v as usize] = low[parent.v as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    let mut scc = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        scc.push(w);
                        if w == v {
                            break;
                        }
                    }
                    sccs.push(scc);
                }
            }
        }
    }
    sccs
}

/// Architectures ordered by how much they relax; used by the monotonicity
/// property `cycles(TSO) ⊆ cycles(PSO) ⊆ cycles(RMO) ⊆ cycles(Power)`.
pub const WEAKENING_ORDER: [Architecture; 4] =
    [Architecture::Tso, Architecture::Pso, Architecture::Rmo, Architecture::Power];

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::aeg::DepCandidates;
    use crate::shared::AbstractLoc;

    fn mp_aeg() -> Aeg {
        // T0: Wx (a), Wy (b); T1: Ry (c), Rx (d)
        Aeg::from_parts(
            vec![
                (Some("a".into()), Dir::W, AbstractLoc::Var("x".into()), 0),
                (Some("b".into()), Dir::W, AbstractLoc::Var("y".into()), 0),
                (Some("c".into()), Dir::R, AbstractLoc::Var("y".into()), 1),
                (Some("d".into()), Dir::R, AbstractLoc::Var("x".into()), 1),
            ],
            &[(0, 1), (2, 3)],
            &[(1, 2), (0, 3)],
            &[],
            &[],
            DepCandidates::Listed(BTreeSet::new()),
            vec!["t0".into(), "t1".into()],
        )
    }

    #[test]
    fn mp_has_no_tso_cycle() {
        let set = enumerate_critical_cycles(&mp_aeg(), Architecture::Tso, &Caps::default());
        assert!(set.cycles.is_empty());
        assert!(!set.capped);
    }

    #[test]
    fn mp_power_cycle_and_delays() {
        let set = enumerate_critical_cycles(&mp_aeg(), Architecture::Power, &Caps::default());
        assert_eq!(set.cycles.len(), 1);
        let c = &set.cycles[0];
        assert_eq!(c.members, vec![0, 1, 2, 3]);
        let kinds: BTreeSet<DelayKind> = c.delays.iter().map(|d| d.kind).collect();
        assert_eq!(
            kinds,
            BTreeSet::from([DelayKind::PoWW, DelayKind::PoRR, DelayKind::Rfe])
        );
        // the rfe is the write-to-read traversal b -> c, not the from-read d -> a
        let rfe = c.delays.iter().find(|d| d.kind == DelayKind::Rfe).unwrap();
        assert_eq!((rfe.from, rfe.to), (1, 2));
    }

    #[test]
    fn direction_kinds() {
        let g = mp_aeg();
        // (Wx, Wy) same thread
        let d = classify_delays(&g, &[0, 1, 2, 3], Architecture::Pso);
        assert!(d.iter().any(|d| d.kind == DelayKind::PoWW && d.from == 0 && d.to == 1));
        // on PSO the read-read pair and the rfe are safe
        assert!(d.iter().all(|d| d.kind == DelayKind::PoWW));
    }

    #[test]
    fn fully_fenced_cycle_dropped() {
        // mp shape with full fences on both pos pairs: every delay is
        // covered (the rfe's cumulative constraint is met by either full
        // fence), so the cycle disappears on every architecture
        let g = Aeg::from_parts(
            vec![
                (None, Dir::W, AbstractLoc::Var("x".into()), 0),
                (None, Dir::W, AbstractLoc::Var("y".into()), 0),
                (None, Dir::R, AbstractLoc::Var("y".into()), 1),
                (None, Dir::R, AbstractLoc::Var("x".into()), 1),
            ],
            &[(0, 1), (2, 3)],
            &[(1, 2), (0, 3)],
            &[((0, 1), crate::ir::FenceType::Full), ((2, 3), crate::ir::FenceType::Full)],
            &[],
            DepCandidates::Listed(BTreeSet::new()),
            vec!["t0".into(), "t1".into()],
        );
        for arch in WEAKENING_ORDER {
            let set = enumerate_critical_cycles(&g, arch, &Caps::default());
            assert!(set.cycles.is_empty(), "covered cycle kept on {arch:?}");
        }
    }

    #[test]
    fn partially_fenced_cycle_kept() {
        // only the writer side is fenced; the reader pair still needs fixing
        let g = Aeg::from_parts(
            vec![
                (None, Dir::W, AbstractLoc::Var("x".into()), 0),
                (None, Dir::W, AbstractLoc::Var("y".into()), 0),
                (None, Dir::R, AbstractLoc::Var("y".into()), 1),
                (None, Dir::R, AbstractLoc::Var("x".into()), 1),
            ],
            &[(0, 1), (2, 3)],
            &[(1, 2), (0, 3)],
            &[((0, 1), crate::ir::FenceType::Full)],
            &[],
            DepCandidates::Listed(BTreeSet::new()),
            vec!["t0".into(), "t1".into()],
        );
        let set = enumerate_critical_cycles(&g, Architecture::Power, &Caps::default());
        assert_eq!(set.cycles.len(), 1);
    }

    #[test]
    fn architecture_monotonicity_on_mp() {
        let g = mp_aeg();
        let mut prev: BTreeSet<Vec<EventId>> = BTreeSet::new();
        for arch in WEAKENING_ORDER {
            let ids: BTreeSet<Vec<EventId>> =
                enumerate_critical_cycles(&g, arch, &Caps::default())
                    .cycles
                    .into_iter()
                    .map(|c| c.members)
                    .collect();
            assert!(prev.is_subset(&ids), "{arch:?} lost cycles");
            prev = ids;
        }
    }

    #[test]
    fn cap_is_reported() {
        let g = mp_aeg();
        let caps = Caps { max_cycles: 1, ..Caps::default() };
        let set = enumerate_critical_cycles(&g, Architecture::Power, &caps);
        assert_eq!(set.cycles.len(), 1);
        assert!(set.capped);
        assert!(!set.notes.is_empty());
    }

    #[test]
    fn canonical_ids_stable() {
        let g = mp_aeg();
        let a = enumerate_critical_cycles(&g, Architecture::Power, &Caps::default());
        let b = enumerate_critical_cycles(&g, Architecture::Power, &Caps::default());
        let ids_a: Vec<String> = a.cycles.iter().map(|c| c.id()).collect();
        let ids_b: Vec<String> = b.cycles.iter().map(|c| c.id()).collect();
        assert_eq!(ids_a, ids_b);
    }
}
