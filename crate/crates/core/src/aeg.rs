//! Abstract event graph construction.
//!
//! An abstract event stands for every dynamic access with the same program
//! point, location and direction. The graph holds the static program order
//! `pos` (per thread), the symmetric competing pairs `cmp` (inter-thread
//! pairs on possibly-aliasing locations with at least one write), the
//! branch-bracketing pairs `poC`, and the fences already present in the
//! program, recorded on the `pos` edges they cross.
//!
//! Construction walks each thread body once. Assignments spawn the reads of
//! the right-hand side (and of the left-hand side minus its target) in
//! parallel, followed by one write per potential target object. Guards fork
//! a bypass edge around the guarded instruction. Function calls are inlined
//! per call site. A backward jump either closes the loop with a `pos` back
//! edge or, when the loop body contains an access that may denote different
//! cells on different iterations, the body is duplicated beforehand by
//! [`duplicate_loop_bodies`] and no back edge is added.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::ir::{
    Body, BodyId, DepSource, Expr, FenceType, InstrKind, Instruction, Lvalue, Position, Program,
};
use crate::shared::{const_index, AbstractLoc, LocationTable, PointsToMap};

pub type EventId = u32;
pub type EdgeId = u32;
pub type ThreadId = u32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Dir {
    R,
    W,
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dir::R => write!(f, "R"),
            Dir::W => write!(f, "W"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AbstractEvent {
    pub id: EventId,
    pub dir: Dir,
    pub loc: AbstractLoc,
    pub thread: ThreadId,
    pub pos: Position,
    /// Set for hand-built graphs so reports read like the source figure.
    pub name: Option<String>,
    /// True when this event is the last one before some conditional branch.
    pub is_branch_boundary: bool,
}

/// Which delay pairs a dependency could be constructed for.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DepCandidates {
    /// Hand-built graphs: every read-first pair is eligible.
    AllPairs,
    /// Program-built graphs: pairs the local def-use chains can realize.
    Listed(BTreeSet<(EventId, EventId)>),
}

#[derive(Clone, Debug)]
pub struct Aeg {
    events: Vec<AbstractEvent>,
    pos_edges: Vec<(EventId, EventId)>,
    edge_index: HashMap<(EventId, EventId), EdgeId>,
    succs: Vec<Vec<EventId>>,
    preds: Vec<Vec<EventId>>,
    /// Strict pos-reachability bitsets, one row per event.
    reach: Vec<Vec<u64>>,
    cmp_edges: Vec<(EventId, EventId)>,
    cmp_adj: Vec<Vec<EventId>>,
    po_c: BTreeSet<(EventId, EventId)>,
    fenced: BTreeMap<EdgeId, BTreeSet<FenceType>>,
    dep_existing: BTreeSet<(EventId, EventId)>,
    dep_candidates: DepCandidates,
    thread_names: Vec<String>,
}

impl Aeg {
    pub fn events(&self) -> &[AbstractEvent] {
        &self.events
    }

    pub fn event(&self, id: EventId) -> &AbstractEvent {
        &self.events[id as usize]
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn thread_names(&self) -> &[String] {
        &self.thread_names
    }

    /// `pos` edges sorted by (source, target); the index is the edge id.
    pub fn pos_edges(&self) -> &[(EventId, EventId)] {
        &self.pos_edges
    }

    pub fn edge(&self, e: EdgeId) -> (EventId, EventId) {
        self.pos_edges[e as usize]
    }

    pub fn edge_id(&self, u: EventId, v: EventId) -> Option<EdgeId> {
        self.edge_index.get(&(u, v)).copied()
    }

    pub fn pos_succs(&self, u: EventId) -> &[EventId] {
        &self.succs[u as usize]
    }

    pub fn pos_preds(&self, u: EventId) -> &[EventId] {
        &self.preds[u as usize]
    }

    /// Strict `pos` reachability (at least one edge).
    pub fn pos_plus(&self, u: EventId, v: EventId) -> bool {
        self.reach[u as usize][v as usize / 64] >> (v % 64) & 1 == 1
    }

    /// Reflexive-transitive `pos` reachability.
    pub fn pos_star(&self, u: EventId, v: EventId) -> bool {
        u == v || self.pos_plus(u, v)
    }

    /// Competing pairs, stored with the smaller id first.
    pub fn cmp_edges(&self) -> &[(EventId, EventId)] {
        &self.cmp_edges
    }

    pub fn cmp_neighbors(&self, u: EventId) -> &[EventId] {
        &self.cmp_adj[u as usize]
    }

    pub fn has_cmp(&self, u: EventId, v: EventId) -> bool {
        let key = (u.min(v), u.max(v));
        self.cmp_edges.binary_search(&key).is_ok()
    }

    pub fn po_c(&self) -> &BTreeSet<(EventId, EventId)> {
        &self.po_c
    }

    pub fn fences_on(&self, e: EdgeId) -> Option<&BTreeSet<FenceType>> {
        self.fenced.get(&e)
    }

    pub fn fenced_edges(&self) -> &BTreeMap<EdgeId, BTreeSet<FenceType>> {
        &self.fenced
    }

    pub fn edge_has_fence(&self, e: EdgeId, f: FenceType) -> bool {
        self.fenced.get(&e).map(|s| s.contains(&f)).unwrap_or(false)
    }

    /// A dependency already orders this pair (syntactically, or via an
    /// inserted dependency pseudo-fence).
    pub fn dep_exists(&self, x: EventId, y: EventId) -> bool {
        self.dep_existing.contains(&(x, y))
    }

    /// A dependency could be created for this pair by rewriting the code.
    pub fn dep_constructible(&self, x: EventId, y: EventId) -> bool {
        if self.event(x).dir != Dir::R {
            return false;
        }
        match &self.dep_candidates {
            DepCandidates::AllPairs => true,
            DepCandidates::Listed(set) => set.contains(&(x, y)),
        }
    }

    pub fn display_event(&self, id: EventId) -> String {
        let ev = self.event(id);
        match &ev.name {
            Some(n) => n.clone(),
            None => format!("e{id}"),
        }
    }

    pub fn describe_event(&self, id: EventId) -> String {
        let ev = self.event(id);
        format!(
            "{}:{}{} ({})",
            self.display_event(id),
            ev.dir,
            ev.loc,
            self.thread_names.get(ev.thread as usize).cloned().unwrap_or_default()
        )
    }

    /// Build a graph directly from its parts; used for hand-encoded figures
    /// and randomized testing. `pos`/`cmp` use event indices, `fenced` puts
    /// pre-existing fences on pos edges, `dep_existing` marks pairs already
    /// ordered by a dependency.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        names: Vec<(Option<String>, Dir, AbstractLoc, ThreadId)>,
        pos: &[(EventId, EventId)],
        cmp: &[(EventId, EventId)],
        fenced: &[((EventId, EventId), FenceType)],
        dep_existing: &[(EventId, EventId)],
        dep_candidates: DepCandidates,
        thread_names: Vec<String>,
    ) -> Aeg {
        let events: Vec<AbstractEvent> = names
            .into_iter()
            .enumerate()
            .map(|(i, (name, dir, loc, thread))| AbstractEvent {
                id: i as EventId,
                dir,
                loc,
                thread,
                pos: Position { body: BodyId::Thread(thread as u16), index: i as u32, line: 0 },
                name,
                is_branch_boundary: false,
            })
            .collect();
        let mut pos_map: BTreeMap<(EventId, EventId), BTreeSet<FenceType>> = BTreeMap::new();
        for &(u, v) in pos {
            pos_map.entry((u, v)).or_default();
        }
        for &((u, v), f) in fenced {
            pos_map.entry((u, v)).or_default().insert(f);
        }
        finish(
            events,
            pos_map,
            cmp.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
            BTreeSet::new(),
            dep_existing.iter().copied().collect(),
            dep_candidates,
            thread_names,
        )
    }

    /// Deterministic DOT rendering: `pos` dashed (with `poC` and fence
    /// annotations), `cmp` undirected.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph aeg {\n");
        for ev in &self.events {
            out.push_str(&format!(
                "  n{} [label=\"{}: {} {} ({})\"];\n",
                ev.id,
                self.display_event(ev.id),
                ev.dir,
                ev.loc,
                self.thread_names.get(ev.thread as usize).cloned().unwrap_or_default(),
            ));
        }
        for (idx, &(u, v)) in self.pos_edges.iter().enumerate() {
            let mut notes = Vec::new();
            if self.po_c.contains(&(u, v)) {
                notes.push("poC".to_string());
            }
            if let Some(fs) = self.fenced.get(&(idx as EdgeId)) {
                for f in fs {
                    notes.push(f.token().to_string());
                }
            }
            if notes.is_empty() {
                out.push_str(&format!("  n{u} -> n{v} [style=dashed];\n"));
            } else {
                out.push_str(&format!(
                    "  n{u} -> n{v} [style=dashed, label=\"{}\"];\n",
                    notes.join(",")
                ));
            }
        }
        for &(u, v) in &self.cmp_edges {
            out.push_str(&format!("  n{u} -> n{v} [dir=none, label=\"cmp\"];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Shared finishing step: freeze edges, compute adjacency, reachability and
/// branch-boundary flags.
fn finish(
    mut events: Vec<AbstractEvent>,
    pos_map: BTreeMap<(EventId, EventId), BTreeSet<FenceType>>,
    cmp_set: BTreeSet<(EventId, EventId)>,
    po_c: BTreeSet<(EventId, EventId)>,
    dep_existing: BTreeSet<(EventId, EventId)>,
    dep_candidates: DepCandidates,
    thread_names: Vec<String>,
) -> Aeg {
    let n = events.len();
    let pos_edges: Vec<(EventId, EventId)> = pos_map.keys().copied().collect();
    let mut edge_index = HashMap::new();
    let mut fenced = BTreeMap::new();
    for (i, &(u, v)) in pos_edges.iter().enumerate() {
        edge_index.insert((u, v), i as EdgeId);
        let fences = &pos_map[&(u, v)];
        if !fences.is_empty() {
            fenced.insert(i as EdgeId, fences.clone());
        }
    }
    let mut succs = vec![Vec::new(); n];
    let mut preds = vec![Vec::new(); n];
    for &(u, v) in &pos_edges {
        succs[u as usize].push(v);
        preds[v as usize].push(u);
    }
    let words = n.div_ceil(64).max(1);
    let mut reach = vec![vec![0u64; words]; n];
    // Plain BFS per event; graphs stay small enough that this is fine.
    let mut queue = Vec::new();
    for s in 0..n {
        queue.clear();
        queue.extend(succs[s].iter().copied());
        let row = &mut reach[s];
        let mut head = 0;
        for &v in &queue {
            row[v as usize / 64] |= 1 << (v % 64);
        }
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &succs[u as usize] {
                let bit = 1u64 << (v % 64);
                if row[v as usize / 64] & bit == 0 {
                    row[v as usize / 64] |= bit;
                    queue.push(v);
                }
            }
        }
    }
    let cmp_edges: Vec<(EventId, EventId)> = cmp_set.into_iter().collect();
    let mut cmp_adj = vec![Vec::new(); n];
    for &(u, v) in &cmp_edges {
        cmp_adj[u as usize].push(v);
        cmp_adj[v as usize].push(u);
    }
    for &(u, _) in &po_c {
        events[u as usize].is_branch_boundary = true;
    }
    Aeg {
        events,
        pos_edges,
        edge_index,
        succs,
        preds,
        reach,
        cmp_edges,
        cmp_adj,
        po_c,
        fenced,
        dep_existing,
        dep_candidates,
        thread_names,
    }
}

// ---------------------------------------------------------------------------
// Loop body duplication
// ---------------------------------------------------------------------------

/// Duplicate the body of every loop that contains an access which may denote
/// different memory cells on different iterations (array accesses whose
/// target is offset-insensitive, dereferences with several or unknown
/// targets). The copy follows the original in sequence and the loop's back
/// jump disappears, so two program-order instances of each such access
/// exist. Loops over scalars only are left untouched. Nested loops are
/// duplicated at most once: the outermost qualifying loop is copied whole.
pub fn duplicate_loop_bodies(p: &Program, table: &LocationTable, pt: &PointsToMap) -> Program {
    let mut out = p.clone();
    let mut trigger_memo: HashMap<String, bool> = HashMap::new();
    for id in p.body_ids() {
        let instrs = &p.body(id).instrs;
        let spans = loop_spans(instrs);
        let chosen = choose_spans(p, table, pt, instrs, &spans, &mut trigger_memo);
        if chosen.is_empty() {
            continue;
        }
        let mut new_instrs = p.body(id).instrs.clone();
        for &(start, end) in chosen.iter().rev() {
            duplicate_span(&mut new_instrs, start, end);
        }
        out.body_mut(id).instrs = new_instrs;
    }
    out
}

/// (label index, last back-jump index) per loop header, overlaps merged.
fn loop_spans(instrs: &[Instruction]) -> Vec<(usize, usize)> {
    let labels: HashMap<&str, usize> = instrs
        .iter()
        .enumerate()
        .filter_map(|(i, ins)| match &ins.kind {
            InstrKind::Label(l) => Some((l.as_str(), i)),
            _ => None,
        })
        .collect();
    let mut by_header: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, instr) in instrs.iter().enumerate() {
        if let Some(target) = goto_target(instr) {
            if let Some(&t) = labels.get(target) {
                if t <= i {
                    let e = by_header.entry(t).or_insert(i);
                    *e = (*e).max(i);
                }
            }
        }
    }
    let mut spans: Vec<(usize, usize)> = by_header.into_iter().collect();
    // merge partial overlaps; keep nesting
    loop {
        let mut merged = false;
        'outer: for i in 0..spans.len() {
            for j in i + 1..spans.len() {
                let (a, b) = (spans[i], spans[j]);
                let overlap = a.0 < b.0 && b.0 <= a.1 && a.1 < b.1;
                if overlap {
                    spans[i] = (a.0, b.1);
                    spans.remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    spans
}

fn goto_target(instr: &Instruction) -> Option<&str> {
    match &instr.kind {
        InstrKind::Goto(l) => Some(l),
        InstrKind::Guard(_, inner) => goto_target(inner),
        _ => None,
    }
}

fn choose_spans(
    p: &Program,
    table: &LocationTable,
    pt: &PointsToMap,
    instrs: &[Instruction],
    spans: &[(usize, usize)],
    memo: &mut HashMap<String, bool>,
) -> Vec<(usize, usize)> {
    let with_trigger: Vec<(usize, usize)> = spans
        .iter()
        .copied()
        .filter(|&(s, e)| instrs[s..=e].iter().any(|i| instr_triggers(p, table, pt, i, memo)))
        .collect();
    // keep only spans not strictly inside another qualifying span
    with_trigger
        .iter()
        .copied()
        .filter(|&(s, e)| {
            !with_trigger
                .iter()
                .any(|&(s2, e2)| (s2, e2) != (s, e) && s2 <= s && e <= e2)
        })
        .collect()
}

fn instr_triggers(
    p: &Program,
    table: &LocationTable,
    pt: &PointsToMap,
    instr: &Instruction,
    memo: &mut HashMap<String, bool>,
) -> bool {
    match &instr.kind {
        InstrKind::Assign(lhs, rhs) => {
            let lhs_trigger = match lhs {
                Lvalue::Index(b, idx) => {
                    (table.is_shared(b) && pt.array_targets(b, const_index(idx)).needs_duplication())
                        || expr_triggers(table, pt, idx)
                }
                Lvalue::Deref(v) => pt.deref_targets(v).needs_duplication(),
                Lvalue::Var(_) => false,
            };
            lhs_trigger || expr_triggers(table, pt, rhs)
        }
        InstrKind::Guard(cond, inner) => {
            expr_triggers(table, pt, cond) || instr_triggers(p, table, pt, inner, memo)
        }
        InstrKind::Assume(e) | InstrKind::Assert(e) => expr_triggers(table, pt, e),
        InstrKind::Call(f) => {
            if let Some(cached) = memo.get(f) {
                return *cached;
            }
            memo.insert(f.clone(), false); // call graph is acyclic; guard anyway
            let result = p
                .function_index(f)
                .map(|idx| {
                    p.functions[idx as usize]
                        .instrs
                        .iter()
                        .any(|i| instr_triggers(p, table, pt, i, memo))
                })
                .unwrap_or(false);
            memo.insert(f.clone(), result);
            result
        }
        _ => false,
    }
}

fn expr_triggers(table: &LocationTable, pt: &PointsToMap, e: &Expr) -> bool {
    match e {
        Expr::Index(b, idx) => {
            (table.is_shared(b) && pt.array_targets(b, const_index(idx)).needs_duplication())
                || expr_triggers(table, pt, idx)
        }
        Expr::Deref(v) => pt.deref_targets(v).needs_duplication(),
        Expr::Unary(_, inner) => expr_triggers(table, pt, inner),
        Expr::Binary(_, l, r) => expr_triggers(table, pt, l) || expr_triggers(table, pt, r),
        _ => false,
    }
}

fn duplicate_span(instrs: &mut Vec<Instruction>, start: usize, end: usize) {
    let header = match &instrs[start].kind {
        InstrKind::Label(l) => l.clone(),
        _ => return, // span starts at the loop header label by construction
    };
    let existing: BTreeSet<String> = instrs
        .iter()
        .filter_map(|i| match &i.kind {
            InstrKind::Label(l) => Some(l.clone()),
            _ => None,
        })
        .collect();
    let fresh = |base: &str, taken: &BTreeSet<String>| -> String {
        let mut k = 2;
        loop {
            let cand = format!("{base}__{k}");
            if !taken.contains(&cand) {
                return cand;
            }
            k += 1;
        }
    };
    // rename map for labels defined inside the span
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    let mut taken = existing.clone();
    for instr in &instrs[start..=end] {
        if let InstrKind::Label(l) = &instr.kind {
            let new = fresh(l, &taken);
            taken.insert(new.clone());
            rename.insert(l.clone(), new);
        }
    }
    let header_copy = rename[&header].clone();

    let mut copy: Vec<Instruction> = instrs[start..=end].to_vec();
    for instr in &mut copy {
        rewrite_labels(instr, &rename, &header, LoopCopy::Second);
    }
    for instr in &mut instrs[start..=end] {
        rewrite_back_jump(instr, &header, &header_copy);
    }
    let insert_at = end + 1;
    instrs.splice(insert_at..insert_at, copy);
}

enum LoopCopy {
    Second,
}

/// In the copied body: rename labels, and turn jumps back to the (renamed)
/// header into skips so the copy does not iterate.
fn rewrite_labels(
    instr: &mut Instruction,
    rename: &BTreeMap<String, String>,
    header: &str,
    _which: LoopCopy,
) {
    match &mut instr.kind {
        InstrKind::Label(l) => {
            if let Some(new) = rename.get(l) {
                *l = new.clone();
            }
        }
        InstrKind::Goto(l) => {
            if l == header {
                instr.kind = InstrKind::Skip;
            } else if let Some(new) = rename.get(l) {
                *l = new.clone();
            }
        }
        InstrKind::Guard(_, inner) => rewrite_labels(inner, rename, header, LoopCopy::Second),
        InstrKind::Fence { dep_source: Some(src), .. } => {
            if let Some(new) = rename.get(&src.label) {
                src.label = new.clone();
            }
        }
        _ => {}
    }
}

/// In the first copy: jumps back to the header now continue into the copy.
fn rewrite_back_jump(instr: &mut Instruction, header: &str, header_copy: &str) {
    match &mut instr.kind {
        InstrKind::Goto(l) => {
            if l == header {
                *l = header_copy.to_string();
            }
        }
        InstrKind::Guard(_, inner) => rewrite_back_jump(inner, header, header_copy),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Graph construction
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
struct LabelKey {
    instance: u32,
    label: String,
}

#[derive(Clone, Debug)]
enum EndPoint {
    Entry,
    Event(EventId),
    /// Entry point of a visited label; edges out of it become loop
    /// connectors rather than real edges.
    Marker(LabelKey),
}

#[derive(Clone, Debug)]
struct End {
    point: EndPoint,
    fences: BTreeSet<FenceType>,
    branch: bool,
}

struct DepFenceRecord {
    source: Option<(LabelKey, String)>,
    prev_reads: Vec<EventId>,
    targets: Vec<EventId>,
}

struct Walker<'a> {
    p: &'a Program,
    table: &'a LocationTable,
    pt: &'a PointsToMap,
    events: Vec<AbstractEvent>,
    pos: BTreeMap<(EventId, EventId), BTreeSet<FenceType>>,
    edge_seen: BTreeSet<(EventId, EventId)>,
    po_c: BTreeSet<(EventId, EventId)>,
    dep_existing: BTreeSet<(EventId, EventId)>,
    dep_candidates: BTreeSet<(EventId, EventId)>,
    thread: ThreadId,
    env: HashMap<String, BTreeSet<EventId>>,
    connectors: HashMap<LabelKey, Vec<(EventId, BTreeSet<FenceType>)>>,
    pending: HashMap<LabelKey, Vec<End>>,
    label_events: HashMap<LabelKey, Vec<EventId>>,
    awaiting_labels: Vec<LabelKey>,
    dep_fences: Vec<DepFenceRecord>,
    awaiting_dep: Vec<usize>,
    last_reads: Vec<EventId>,
    instance_counter: u32,
}

/// Build the abstract event graph of a (validated, loop-duplicated) program.
pub fn build_aeg(p: &Program, table: &LocationTable, pt: &PointsToMap) -> Aeg {
    let mut w = Walker {
        p,
        table,
        pt,
        events: Vec::new(),
        pos: BTreeMap::new(),
        edge_seen: BTreeSet::new(),
        po_c: BTreeSet::new(),
        dep_existing: BTreeSet::new(),
        dep_candidates: BTreeSet::new(),
        thread: 0,
        env: HashMap::new(),
        connectors: HashMap::new(),
        pending: HashMap::new(),
        label_events: HashMap::new(),
        awaiting_labels: Vec::new(),
        dep_fences: Vec::new(),
        awaiting_dep: Vec::new(),
        last_reads: Vec::new(),
        instance_counter: 0,
    };
    for t in 0..p.threads.len() {
        w.thread = t as ThreadId;
        w.env.clear();
        w.awaiting_labels.clear();
        w.awaiting_dep.clear();
        w.last_reads.clear();
        let instance = w.fresh_instance();
        let entry = vec![End { point: EndPoint::Entry, fences: BTreeSet::new(), branch: false }];
        w.walk_body(BodyId::Thread(t as u16), entry, instance);
    }
    w.resolve_dep_fences();

    // Competing pairs: all inter-thread pairs on possibly-aliasing
    // locations with at least one write. This abstracts the external
    // read-from, from-read and coherence at once.
    let mut cmp = BTreeSet::new();
    for a in &w.events {
        for b in &w.events {
            if a.id < b.id
                && a.thread != b.thread
                && (a.dir == Dir::W || b.dir == Dir::W)
                && a.loc.may_alias(&b.loc)
            {
                cmp.insert((a.id, b.id));
            }
        }
    }

    let thread_names = p.threads.iter().map(|t| t.name.clone()).collect();
    finish(
        w.events,
        w.pos,
        cmp,
        w.po_c,
        w.dep_existing,
        DepCandidates::Listed(w.dep_candidates),
        thread_names,
    )
}

impl<'a> Walker<'a> {
    fn fresh_instance(&mut self) -> u32 {
        self.instance_counter += 1;
        self.instance_counter
    }

    fn walk_body(&mut self, id: BodyId, mut frontier: Vec<End>, instance: u32) -> Vec<End> {
        let body: &Body = self.p.body(id);
        let labels: HashMap<String, usize> = body
            .instrs
            .iter()
            .enumerate()
            .filter_map(|(i, ins)| match &ins.kind {
                InstrKind::Label(l) => Some((l.clone(), i)),
                _ => None,
            })
            .collect();
        for (idx, instr) in body.instrs.iter().enumerate() {
            frontier = self.walk_instr(instr, idx, &labels, instance, frontier);
        }
        frontier
    }

    fn walk_instr(
        &mut self,
        instr: &Instruction,
        idx: usize,
        labels: &HashMap<String, usize>,
        instance: u32,
        mut frontier: Vec<End>,
    ) -> Vec<End> {
        match &instr.kind {
            InstrKind::Label(l) => {
                let key = LabelKey { instance, label: l.clone() };
                if let Some(mut pend) = self.pending.remove(&key) {
                    frontier.append(&mut pend);
                }
                frontier.push(End { point: EndPoint::Marker(key.clone()), fences: BTreeSet::new(), branch: false });
                self.awaiting_labels.push(key);
                merge_ends(frontier)
            }
            InstrKind::Assign(lhs, rhs) => self.walk_assign(instr, lhs, rhs, frontier),
            InstrKind::Guard(_, inner) => {
                let mut tagged = frontier;
                for end in &mut tagged {
                    end.branch = true;
                }
                let through = self.walk_instr(inner, idx, labels, instance, tagged.clone());
                let mut merged = through;
                merged.extend(tagged);
                merge_ends(merged)
            }
            InstrKind::Goto(l) => {
                let target = labels.get(l).copied();
                let key = LabelKey { instance, label: l.clone() };
                match target {
                    Some(t) if t <= idx => {
                        // backward jump: close the loop against the entry
                        // points recorded when the label was first reached
                        let connectors = self.connectors.get(&key).cloned().unwrap_or_default();
                        for end in &frontier {
                            match &end.point {
                                EndPoint::Event(u) => {
                                    for (v, lead) in &connectors {
                                        let mut fences = end.fences.clone();
                                        fences.extend(lead.iter().copied());
                                        self.add_pos_edge(*u, *v, fences, end.branch);
                                    }
                                }
                                EndPoint::Marker(mk) => {
                                    // degenerate loop entered straight from a
                                    // label: alias its connectors
                                    let snap = connectors.clone();
                                    self.connectors.entry(mk.clone()).or_default().extend(snap);
                                }
                                EndPoint::Entry => {}
                            }
                        }
                        Vec::new()
                    }
                    _ => {
                        self.pending.entry(key).or_default().extend(frontier);
                        Vec::new()
                    }
                }
            }
            InstrKind::Assume(_) | InstrKind::Assert(_) | InstrKind::Skip => frontier,
            InstrKind::AtomicBegin | InstrKind::AtomicEnd => {
                for end in &mut frontier {
                    end.fences.insert(FenceType::Full);
                }
                frontier
            }
            InstrKind::StartThread(_) => frontier,
            InstrKind::Call(f) => {
                if let Some(fi) = self.p.function_index(f) {
                    let inner_instance = self.fresh_instance();
                    self.walk_body(BodyId::Func(fi), frontier, inner_instance)
                } else {
                    frontier
                }
            }
            InstrKind::Fence { fence, dep_source } => {
                if *fence == FenceType::Dependency {
                    let source = dep_source.as_ref().map(|DepSource { label, base }| {
                        (LabelKey { instance, label: label.clone() }, base.clone())
                    });
                    self.dep_fences.push(DepFenceRecord {
                        source,
                        prev_reads: self.last_reads.clone(),
                        targets: Vec::new(),
                    });
                    self.awaiting_dep.push(self.dep_fences.len() - 1);
                } else {
                    for end in &mut frontier {
                        end.fences.insert(*fence);
                    }
                }
                frontier
            }
            InstrKind::EndThread | InstrKind::EndFunction => frontier,
        }
    }

    fn walk_assign(
        &mut self,
        instr: &Instruction,
        lhs: &Lvalue,
        rhs: &Expr,
        frontier: Vec<End>,
    ) -> Vec<End> {
        // ---- gather reads (rhs first, then address parts of the lhs) ----
        let mut read_locs: Vec<AbstractLoc> = Vec::new();
        let mut rhs_read_events: Vec<usize> = Vec::new(); // indices into read_locs
        self.expr_reads(rhs, &mut read_locs);
        let rhs_read_count = read_locs.len();
        rhs_read_events.extend(0..rhs_read_count);

        let lhs_addr_first = read_locs.len();
        let mut write_locs: Vec<AbstractLoc> = Vec::new();
        match lhs {
            Lvalue::Var(v) => {
                if self.table.is_shared(v) && !self.table.is_array(v) {
                    write_locs.push(AbstractLoc::Var(v.clone()));
                }
            }
            Lvalue::Index(b, idx) => {
                self.expr_reads(idx, &mut read_locs);
                if self.table.is_shared(b) {
                    write_locs.extend(self.pt.array_targets(b, const_index(idx)).event_locs());
                }
            }
            Lvalue::Deref(v) => {
                if self.table.is_shared(v) {
                    read_locs.push(AbstractLoc::Var(v.clone()));
                }
                write_locs.extend(self.pt.deref_targets(v).event_locs());
            }
        }
        let lhs_addr_count = read_locs.len() - lhs_addr_first;

        // dedupe by location, keeping first occurrence order
        let mut seen = BTreeSet::new();
        let mut dedup_reads = Vec::new();
        let mut remap = vec![0usize; read_locs.len()];
        for (i, loc) in read_locs.iter().enumerate() {
            if seen.insert(loc.clone()) {
                remap[i] = dedup_reads.len();
                dedup_reads.push(loc.clone());
            } else {
                remap[i] = dedup_reads.iter().position(|l| l == loc).unwrap();
            }
        }
        let mut wseen = BTreeSet::new();
        let write_locs: Vec<AbstractLoc> =
            write_locs.into_iter().filter(|l| wseen.insert(l.clone())).collect();

        if dedup_reads.is_empty() && write_locs.is_empty() {
            self.update_env_pure(lhs, rhs);
            return frontier;
        }

        // ---- create events ----
        let read_ids: Vec<EventId> =
            dedup_reads.iter().map(|loc| self.new_event(Dir::R, loc.clone(), instr.origin)).collect();
        let write_ids: Vec<EventId> =
            write_locs.iter().map(|loc| self.new_event(Dir::W, loc.clone(), instr.origin)).collect();

        // ---- connect ----
        let firsts: Vec<EventId> =
            if read_ids.is_empty() { write_ids.clone() } else { read_ids.clone() };
        self.connect_frontier(&frontier, &firsts);
        for &r in &read_ids {
            for &w in &write_ids {
                self.add_pos_edge(r, w, BTreeSet::new(), false);
            }
        }
        let new_frontier: Vec<EventId> =
            if write_ids.is_empty() { read_ids.clone() } else { write_ids.clone() };

        // ---- dependency bookkeeping ----
        let all_events: Vec<EventId> =
            read_ids.iter().chain(write_ids.iter()).copied().collect();
        self.record_label_events(&all_events);
        self.record_dep_targets(&all_events);
        self.last_reads = read_ids.clone();

        let mut mentioned_locals: Vec<String> = Vec::new();
        let mut all_vars = Vec::new();
        rhs.vars(&mut all_vars);
        match lhs {
            Lvalue::Index(b, idx) => {
                all_vars.push(b.clone());
                idx.vars(&mut all_vars);
            }
            Lvalue::Deref(v) => all_vars.push(v.clone()),
            Lvalue::Var(_) => {}
        }
        for v in &all_vars {
            if !self.table.is_shared(v) {
                mentioned_locals.push(v.clone());
            }
        }
        let mut env_sources: BTreeSet<EventId> = BTreeSet::new();
        for l in &mentioned_locals {
            if let Some(srcs) = self.env.get(l) {
                env_sources.extend(srcs.iter().copied());
            }
        }
        // constructible: any prior read feeding a mentioned local, or a read
        // of this instruction, can anchor an artificial dependency to any of
        // this instruction's accesses
        let mut sources: BTreeSet<EventId> = env_sources.clone();
        sources.extend(read_ids.iter().copied());
        for &s in &sources {
            for &t in &all_events {
                if s != t {
                    self.dep_candidates.insert((s, t));
                }
            }
        }
        // existing data deps: rhs value sources order every write
        let mut rhs_value_sources: BTreeSet<EventId> = rhs_read_events
            .iter()
            .map(|&i| read_ids[remap[i]])
            .collect();
        let mut rhs_locals = Vec::new();
        rhs.vars(&mut rhs_locals);
        for v in rhs_locals {
            if !self.table.is_shared(&v) {
                if let Some(srcs) = self.env.get(&v) {
                    rhs_value_sources.extend(srcs.iter().copied());
                }
            }
        }
        for &s in &rhs_value_sources {
            for &w in &write_ids {
                if s != w {
                    self.dep_existing.insert((s, w));
                }
            }
        }
        // existing address deps: index/base sources order the accesses they
        // address (the lhs write, and rhs indexed reads)
        let mut lhs_addr_sources: BTreeSet<EventId> = (0..lhs_addr_count)
            .map(|k| read_ids[remap[lhs_addr_first + k]])
            .collect();
        let mut lhs_addr_locals = Vec::new();
        match lhs {
            Lvalue::Index(_, idx) => idx.vars(&mut lhs_addr_locals),
            Lvalue::Deref(v) => lhs_addr_locals.push(v.clone()),
            Lvalue::Var(_) => {}
        }
        for v in lhs_addr_locals {
            if !self.table.is_shared(&v) {
                if let Some(srcs) = self.env.get(&v) {
                    lhs_addr_sources.extend(srcs.iter().copied());
                }
            }
        }
        for &s in &lhs_addr_sources {
            for &w in &write_ids {
                if s != w {
                    self.dep_existing.insert((s, w));
                }
            }
        }
        self.record_rhs_addr_deps(rhs, &dedup_reads, &read_ids);

        // ---- env update ----
        if let Lvalue::Var(v) = lhs {
            if !self.table.is_shared(v) {
                self.env.insert(v.clone(), rhs_value_sources);
            }
        }
        let _ = lhs_addr_first;

        new_frontier
            .into_iter()
            .map(|ev| End { point: EndPoint::Event(ev), fences: BTreeSet::new(), branch: false })
            .collect()
    }

    /// Address dependencies inside the rhs: reads feeding an index order the
    /// indexed read itself.
    fn record_rhs_addr_deps(&mut self, e: &Expr, locs: &[AbstractLoc], ids: &[EventId]) {
        match e {
            Expr::Index(b, idx) => {
                if self.table.is_shared(b) {
                    let targets: Vec<EventId> = self
                        .pt
                        .array_targets(b, const_index(idx))
                        .event_locs()
                        .into_iter()
                        .filter_map(|l| {
                            locs.iter().position(|x| *x == l).map(|i| ids[i])
                        })
                        .collect();
                    let mut srcs: BTreeSet<EventId> = BTreeSet::new();
                    let mut idx_vars = Vec::new();
                    idx.vars(&mut idx_vars);
                    for v in &idx_vars {
                        if self.table.is_shared(v) && !self.table.is_array(v) {
                            if let Some(i) = locs.iter().position(|x| *x == AbstractLoc::Var(v.clone())) {
                                srcs.insert(ids[i]);
                            }
                        } else if let Some(s) = self.env.get(v) {
                            srcs.extend(s.iter().copied());
                        }
                    }
                    for &s in &srcs {
                        for &t in &targets {
                            if s != t {
                                self.dep_existing.insert((s, t));
                            }
                        }
                    }
                }
                self.record_rhs_addr_deps(idx, locs, ids);
            }
            Expr::Deref(v) => {
                let targets: Vec<EventId> = self
                    .pt
                    .deref_targets(v)
                    .event_locs()
                    .into_iter()
                    .filter_map(|l| locs.iter().position(|x| *x == l).map(|i| ids[i]))
                    .collect();
                let mut srcs: BTreeSet<EventId> = BTreeSet::new();
                if self.table.is_shared(v) {
                    if let Some(i) = locs.iter().position(|x| *x == AbstractLoc::Var(v.clone())) {
                        srcs.insert(ids[i]);
                    }
                } else if let Some(s) = self.env.get(v) {
                    srcs.extend(s.iter().copied());
                }
                for &s in &srcs {
                    for &t in &targets {
                        if s != t {
                            self.dep_existing.insert((s, t));
                        }
                    }
                }
            }
            Expr::Unary(_, inner) => self.record_rhs_addr_deps(inner, locs, ids),
            Expr::Binary(_, l, r) => {
                self.record_rhs_addr_deps(l, locs, ids);
                self.record_rhs_addr_deps(r, locs, ids);
            }
            _ => {}
        }
    }

    fn update_env_pure(&mut self, lhs: &Lvalue, rhs: &Expr) {
        if let Lvalue::Var(v) = lhs {
            if !self.table.is_shared(v) {
                let mut srcs: BTreeSet<EventId> = BTreeSet::new();
                let mut vars = Vec::new();
                rhs.vars(&mut vars);
                for r in vars {
                    if let Some(s) = self.env.get(&r) {
                        srcs.extend(s.iter().copied());
                    }
                }
                self.env.insert(v.clone(), srcs);
            }
        }
    }

    /// Shared reads of an expression, in syntactic order.
    fn expr_reads(&self, e: &Expr, out: &mut Vec<AbstractLoc>) {
        match e {
            Expr::Var(v) => {
                if self.table.is_shared(v) && !self.table.is_array(v) {
                    out.push(AbstractLoc::Var(v.clone()));
                }
            }
            Expr::Index(b, idx) => {
                self.expr_reads(idx, out);
                if self.table.is_shared(b) {
                    out.extend(self.pt.array_targets(b, const_index(idx)).event_locs());
                }
            }
            Expr::Deref(v) => {
                if self.table.is_shared(v) {
                    out.push(AbstractLoc::Var(v.clone()));
                }
                out.extend(self.pt.deref_targets(v).event_locs());
            }
            Expr::AddrOf(_) | Expr::Lit(_) | Expr::Nondet => {}
            Expr::Unary(_, inner) => self.expr_reads(inner, out),
            Expr::Binary(_, l, r) => {
                self.expr_reads(l, out);
                self.expr_reads(r, out);
            }
        }
    }

    fn new_event(&mut self, dir: Dir, loc: AbstractLoc, pos: Position) -> EventId {
        let id = self.events.len() as EventId;
        self.events.push(AbstractEvent {
            id,
            dir,
            loc,
            thread: self.thread,
            pos,
            name: None,
            is_branch_boundary: false,
        });
        id
    }

    fn connect_frontier(&mut self, frontier: &[End], firsts: &[EventId]) {
        for end in frontier {
            match &end.point {
                EndPoint::Event(u) => {
                    for &v in firsts {
                        self.add_pos_edge(*u, v, end.fences.clone(), end.branch);
                    }
                }
                EndPoint::Marker(key) => {
                    let entry = self.connectors.entry(key.clone()).or_default();
                    for &v in firsts {
                        entry.push((v, end.fences.clone()));
                    }
                }
                EndPoint::Entry => {}
            }
        }
    }

    fn add_pos_edge(&mut self, u: EventId, v: EventId, fences: BTreeSet<FenceType>, branch: bool) {
        if u == v {
            return;
        }
        if self.edge_seen.insert((u, v)) {
            self.pos.insert((u, v), fences);
        } else {
            // an edge realizable along several syntactic paths is only
            // protected by fences common to all of them
            let entry = self.pos.get_mut(&(u, v)).unwrap();
            *entry = entry.intersection(&fences).copied().collect();
        }
        if branch {
            self.po_c.insert((u, v));
        }
    }

    fn record_label_events(&mut self, events: &[EventId]) {
        for key in self.awaiting_labels.drain(..) {
            self.label_events.entry(key).or_default().extend(events.iter().copied());
        }
    }

    fn record_dep_targets(&mut self, events: &[EventId]) {
        for idx in self.awaiting_dep.drain(..) {
            self.dep_fences[idx].targets = events.to_vec();
        }
    }

    fn resolve_dep_fences(&mut self) {
        for rec in &self.dep_fences {
            let sources: Vec<EventId> = match &rec.source {
                Some((key, base)) => self
                    .label_events
                    .get(key)
                    .map(|evs| {
                        evs.iter()
                            .copied()
                            .filter(|&e| {
                                let ev = &self.events[e as usize];
                                ev.dir == Dir::R && ev.loc.base() == Some(base.as_str())
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
                None => rec.prev_reads.clone(),
            };
            for &s in &sources {
                for &t in &rec.targets {
                    if s != t && self.events[s as usize].thread == self.events[t as usize].thread {
                        self.dep_existing.insert((s, t));
                    }
                }
            }
        }
    }
}

/// Merge frontier ends that denote the same point: fences a pair (u, next)
/// can avoid on some path are not guaranteed, so sets intersect; branch
/// tags accumulate.
fn merge_ends(ends: Vec<End>) -> Vec<End> {
    let mut out: Vec<End> = Vec::new();
    'next: for end in ends {
        for have in &mut out {
            let same = match (&have.point, &end.point) {
                (EndPoint::Entry, EndPoint::Entry) => true,
                (EndPoint::Event(a), EndPoint::Event(b)) => a == b,
                (EndPoint::Marker(a), EndPoint::Marker(b)) => a == b,
                _ => false,
            };
            if same {
                have.fences = have.fences.intersection(&end.fences).copied().collect();
                have.branch |= end.branch;
                continue 'next;
            }
        }
        out.push(end);
    }
    out
}

impl crate::shared::TargetSet {
    /// Locations that become abstract events for this access: unknown
    /// targets collapse to a single any-shared event rather than one event
    /// per object.
    pub fn event_locs(&self) -> Vec<AbstractLoc> {
        match self {
            crate::shared::TargetSet::Precise(s) => s.iter().cloned().collect(),
            crate::shared::TargetSet::IndexInsensitive(a) => vec![AbstractLoc::ArrayAny(a.clone())],
            crate::shared::TargetSet::Unknown => vec![AbstractLoc::AnyShared],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::shared::{classify_locations, points_to, Precision};

    fn build(src: &str) -> Aeg {
        build_with(src, Precision::Precise)
    }

    fn build_with(src: &str, precision: Precision) -> Aeg {
        let p = parse_program(src).unwrap();
        assert!(crate::ir::validate(&p).is_empty(), "test program invalid");
        let table = classify_locations(&p).unwrap();
        let pt = points_to(&p, &table, precision);
        let dup = duplicate_loop_bodies(&p, &table, &pt);
        build_aeg(&dup, &table, &pt)
    }

    fn find(aeg: &Aeg, thread: ThreadId, dir: Dir, loc: &str, nth: usize) -> EventId {
        aeg.events()
            .iter()
            .filter(|e| e.thread == thread && e.dir == dir && e.loc.to_string() == loc)
            .nth(nth)
            .unwrap_or_else(|| panic!("no event {dir:?} {loc} #{nth} in thread {thread}"))
            .id
    }

    const FIG5: &str = "
        shared x
        shared y
        shared z
        local input
        local tmp
        local r1
        local r2
        local r3
        local r4
        thread t1 {
          start_thread t2;
          x = input;
          tmp = nondet();
          [!tmp] goto L1;
          y = 1;
          goto L2;
        L1: r1 = z;
        L2: x = 1;
          end_thread
        }
        thread t2 { r2 = y; r3 = z; r4 = x; end_thread }
    ";

    #[test]
    fn fig5_shape() {
        let aeg = build(FIG5);
        assert_eq!(aeg.n_events(), 7);
        let a = find(&aeg, 0, Dir::W, "x", 0);
        let b1 = find(&aeg, 0, Dir::W, "y", 0);
        let b2 = find(&aeg, 0, Dir::R, "z", 0);
        let c = find(&aeg, 0, Dir::W, "x", 1);
        let d = find(&aeg, 1, Dir::R, "y", 0);
        let e = find(&aeg, 1, Dir::R, "z", 0);
        let f = find(&aeg, 1, Dir::R, "x", 0);
        let mut pos: Vec<(EventId, EventId)> = aeg.pos_edges().to_vec();
        pos.sort();
        let mut expect = vec![(a, b1), (a, b2), (b1, c), (b2, c), (d, e), (e, f)];
        expect.sort();
        assert_eq!(pos, expect);
        let mut cmp: Vec<(EventId, EventId)> = aeg.cmp_edges().to_vec();
        cmp.sort();
        let mut expect_cmp = vec![
            (a.min(f), a.max(f)),
            (b1.min(d), b1.max(d)),
            (c.min(f), c.max(f)),
        ];
        expect_cmp.sort();
        assert_eq!(cmp, expect_cmp);
        // guard bypass: both a path through y=1 / r1=z and direct pos edges
        assert!(aeg.pos_plus(a, c));
        // poC pairs bracket the branch
        assert!(aeg.po_c().contains(&(a, b1)));
        assert!(aeg.po_c().contains(&(a, b2)));
        assert!(aeg.event(a).is_branch_boundary);
    }

    #[test]
    fn no_shared_access_no_events() {
        let aeg = build("local a\nlocal b\nthread t0 { a = 1; b = a + 2; end_thread }");
        assert_eq!(aeg.n_events(), 0);
    }

    #[test]
    fn two_writers_single_cmp_pair() {
        let aeg = build(
            "shared x
             thread t0 { start_thread t1; x = 1; end_thread }
             thread t1 { x = 2; end_thread }",
        );
        assert_eq!(aeg.n_events(), 2);
        assert_eq!(aeg.cmp_edges().len(), 1);
    }

    #[test]
    fn reads_never_compete() {
        let aeg = build(
            "shared x
             local a
             local b
             thread t0 { start_thread t1; a = x; end_thread }
             thread t1 { b = x; end_thread }",
        );
        assert_eq!(aeg.n_events(), 2);
        assert!(aeg.cmp_edges().is_empty());
    }

    #[test]
    fn thread_locality_of_edges() {
        let aeg = build(FIG5);
        for &(u, v) in aeg.pos_edges() {
            assert_eq!(aeg.event(u).thread, aeg.event(v).thread);
        }
        for &(u, v) in aeg.cmp_edges() {
            assert_ne!(aeg.event(u).thread, aeg.event(v).thread);
        }
    }

    #[test]
    fn atomic_section_fences_recorded() {
        let aeg = build(
            "shared x
             shared y
             shared z
             thread t0 { x = 1; atomic_begin; y = 1; atomic_end; z = 1; end_thread }",
        );
        let wx = find(&aeg, 0, Dir::W, "x", 0);
        let wy = find(&aeg, 0, Dir::W, "y", 0);
        let wz = find(&aeg, 0, Dir::W, "z", 0);
        let in_edge = aeg.edge_id(wx, wy).unwrap();
        let out_edge = aeg.edge_id(wy, wz).unwrap();
        assert!(aeg.edge_has_fence(in_edge, FenceType::Full));
        assert!(aeg.edge_has_fence(out_edge, FenceType::Full));
    }

    #[test]
    fn pre_existing_fence_lands_on_edge() {
        let aeg = build(
            "shared x
             shared y
             thread t0 { x = 1; fence(f); y = 1; end_thread }",
        );
        let wx = find(&aeg, 0, Dir::W, "x", 0);
        let wy = find(&aeg, 0, Dir::W, "y", 0);
        let e = aeg.edge_id(wx, wy).unwrap();
        assert!(aeg.edge_has_fence(e, FenceType::Full));
    }

    #[test]
    fn guard_bypass_leaves_edge_unfenced() {
        // the fence sits on the guarded path only; the pair (Wx, Wy) can
        // also happen via the bypass, so the edge must not count as fenced
        let aeg = build(
            "shared x
             shared y
             local c
             thread t0 { x = 1; [c] fence(f); y = 1; end_thread }",
        );
        let wx = find(&aeg, 0, Dir::W, "x", 0);
        let wy = find(&aeg, 0, Dir::W, "y", 0);
        let e = aeg.edge_id(wx, wy).unwrap();
        assert!(!aeg.edge_has_fence(e, FenceType::Full));
    }

    #[test]
    fn backward_jump_adds_back_edge() {
        let aeg = build(
            "shared x
             shared y
             local c
             thread t0 {
             L:
               x = 1;
               y = 1;
               [c] goto L;
               end_thread
             }",
        );
        let wx = find(&aeg, 0, Dir::W, "x", 0);
        let wy = find(&aeg, 0, Dir::W, "y", 0);
        assert!(aeg.edge_id(wx, wy).is_some());
        assert!(aeg.edge_id(wy, wx).is_some(), "loop back edge missing");
        assert!(aeg.pos_plus(wy, wy), "loop makes events self-reachable");
    }

    #[test]
    fn scalar_loop_not_duplicated() {
        let p = parse_program(
            "shared x
             local c
             thread t0 { L: x = 1; [c] goto L; end_thread }",
        )
        .unwrap();
        let table = classify_locations(&p).unwrap();
        let pt = points_to(&p, &table, Precision::Precise);
        let dup = duplicate_loop_bodies(&p, &table, &pt);
        assert_eq!(dup, p);
    }

    #[test]
    fn array_loop_duplicated_without_back_edge() {
        let src = "
            shared t[4]
            local i
            local c
            thread t0 {
            L:
              t[i] = 1;
              [c] goto L;
              end_thread
            }";
        let p = parse_program(src).unwrap();
        let table = classify_locations(&p).unwrap();
        let pt = points_to(&p, &table, Precision::Precise);
        let dup = duplicate_loop_bodies(&p, &table, &pt);
        let writes = dup.threads[0]
            .instrs
            .iter()
            .filter(|i| matches!(i.kind, InstrKind::Assign(..)))
            .count();
        assert_eq!(writes, 2, "loop body should appear twice:\n{}", crate::ir::pretty_print(&dup));

        let aeg = build_aeg(&dup, &table, &pt);
        // two W t[*] instances in program order, no back edge
        let w1 = find(&aeg, 0, Dir::W, "t[*]", 0);
        let w2 = find(&aeg, 0, Dir::W, "t[*]", 1);
        assert!(aeg.pos_plus(w1, w2));
        assert!(!aeg.pos_plus(w2, w1), "duplicated loop must not keep its back edge");
    }

    #[test]
    fn nested_array_loops_duplicated_once() {
        let src = "
            shared t[4]
            local i
            local c
            thread t0 {
            OUTER:
              t[i] = 1;
            INNER:
              t[i] = 2;
              [c] goto INNER;
              [c] goto OUTER;
              end_thread
            }";
        let p = parse_program(src).unwrap();
        let table = classify_locations(&p).unwrap();
        let pt = points_to(&p, &table, Precision::Precise);
        let dup = duplicate_loop_bodies(&p, &table, &pt);
        // the outer body is copied once; the inner loop appears once per copy
        let assigns = dup.threads[0]
            .instrs
            .iter()
            .filter(|i| matches!(i.kind, InstrKind::Assign(..)))
            .count();
        assert_eq!(assigns, 4, "each sub-body exactly twice:\n{}", crate::ir::pretty_print(&dup));
        let inner_labels = dup.threads[0]
            .instrs
            .iter()
            .filter(|i| matches!(&i.kind, InstrKind::Label(l) if l.starts_with("INNER")))
            .count();
        assert_eq!(inner_labels, 2);
    }

    #[test]
    fn deterministic_construction() {
        let a = build(FIG5);
        let b = build(FIG5);
        let ids_a: Vec<_> = a.events().iter().map(|e| (e.id, e.dir, e.loc.clone(), e.thread)).collect();
        let ids_b: Vec<_> = b.events().iter().map(|e| (e.id, e.dir, e.loc.clone(), e.thread)).collect();
        assert_eq!(ids_a, ids_b);
        assert_eq!(a.pos_edges(), b.pos_edges());
        assert_eq!(a.cmp_edges(), b.cmp_edges());
        assert_eq!(a.to_dot(), b.to_dot());
    }

    #[test]
    fn dot_export_shapes() {
        let empty = Aeg::from_parts(vec![], &[], &[], &[], &[], DepCandidates::AllPairs, vec![]);
        assert_eq!(empty.to_dot(), "digraph aeg {\n}\n");

        let aeg = build(FIG5);
        let dot = aeg.to_dot();
        assert_eq!(dot.matches("style=dashed").count(), 6);
        assert_eq!(dot.matches("dir=none").count(), 3);
        assert!(dot.contains("poC"));
    }

    #[test]
    fn dependency_chains_recorded() {
        // r1 = x; t[r1] = 1; gives an existing address dependency Rx -> Wt
        let aeg = build(
            "shared x
             shared t[4]
             local r1
             thread t0 { r1 = x; t[r1] = 1; end_thread }",
        );
        let rx = find(&aeg, 0, Dir::R, "x", 0);
        let wt = find(&aeg, 0, Dir::W, "t[*]", 0);
        assert!(aeg.dep_exists(rx, wt));
        assert!(aeg.dep_constructible(rx, wt));
    }

    #[test]
    fn no_dependency_between_unrelated_reads() {
        // mp receiver: r1 = y; r2 = x; no dependency between the two reads
        let aeg = build(
            "shared x
             shared y
             local r1
             local r2
             thread t0 { r1 = y; r2 = x; end_thread }",
        );
        let ry = find(&aeg, 0, Dir::R, "y", 0);
        let rx = find(&aeg, 0, Dir::R, "x", 0);
        assert!(!aeg.dep_exists(ry, rx));
        assert!(!aeg.dep_constructible(ry, rx));
    }

    #[test]
    fn dep_fence_annotation_resolves() {
        let aeg = build(
            "shared x
             shared y
             local r1
             local r2
             thread t0 {
             S:
               r1 = y;
               fence(dp, S, y);
               r2 = x;
               end_thread
             }",
        );
        let ry = find(&aeg, 0, Dir::R, "y", 0);
        let rx = find(&aeg, 0, Dir::R, "x", 0);
        assert!(aeg.dep_exists(ry, rx));
    }

    #[test]
    fn unknown_pointer_becomes_any_shared_event() {
        let aeg = build_with(
            "shared x
             shared y
             local p
             thread t0 { p = nondet(); *p = 1; end_thread }",
            Precision::Imprecise,
        );
        assert_eq!(aeg.n_events(), 1);
        assert_eq!(aeg.event(0).loc, AbstractLoc::AnyShared);
        assert_eq!(aeg.event(0).dir, Dir::W);
    }

    #[test]
    fn inlined_call_creates_events_per_site() {
        let aeg = build(
            "shared x
             func wx { x = 1; end_function }
             thread t0 { call wx; call wx; end_thread }",
        );
        assert_eq!(aeg.n_events(), 2);
        let w0 = find(&aeg, 0, Dir::W, "x", 0);
        let w1 = find(&aeg, 0, Dir::W, "x", 1);
        assert!(aeg.edge_id(w0, w1).is_some());
    }
}
