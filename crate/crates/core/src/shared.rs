//! Shared/local classification and the points-to abstraction.
//!
//! The fence analyses only care about accesses to shared memory; everything
//! else is thread-local noise. Pointer dereferences are resolved by a
//! flow-insensitive Andersen-style propagation over the whole program, with
//! three selectable precision levels:
//!
//! * `precise` — constant array indices resolve to individual elements,
//!   dereferences to the propagated target sets;
//! * `index-insensitive` — array elements collapse to `t[*]` (any offset);
//! * `imprecise` — every dereference is treated as possibly touching any
//!   shared object.
//!
//! Lowering the precision never shrinks a target set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ir::{Expr, InstrKind, Instruction, Lvalue, Program};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LocKind {
    Shared,
    Local,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LocationInfo {
    pub kind: LocKind,
    pub is_array: bool,
    pub array_size: Option<u64>,
    pub is_volatile: bool,
}

/// Per-variable classification table.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LocationTable {
    map: BTreeMap<String, LocationInfo>,
}

impl LocationTable {
    pub fn get(&self, name: &str) -> Option<&LocationInfo> {
        self.map.get(name)
    }

    pub fn is_shared(&self, name: &str) -> bool {
        self.map.get(name).map(|i| i.kind == LocKind::Shared).unwrap_or(false)
    }

    pub fn is_array(&self, name: &str) -> bool {
        self.map.get(name).map(|i| i.is_array).unwrap_or(false)
    }

    pub fn is_volatile(&self, name: &str) -> bool {
        self.map.get(name).map(|i| i.is_volatile).unwrap_or(false)
    }

    pub fn shared_names(&self) -> impl Iterator<Item = &str> {
        self.map.iter().filter(|(_, i)| i.kind == LocKind::Shared).map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LocationInfo)> {
        self.map.iter().map(|(n, i)| (n.as_str(), i))
    }

    /// All shared objects as abstract locations (scalars and whole arrays).
    pub fn all_shared_locs(&self) -> BTreeSet<AbstractLoc> {
        self.map
            .iter()
            .filter(|(_, i)| i.kind == LocKind::Shared)
            .map(|(n, i)| {
                if i.is_array {
                    AbstractLoc::ArrayAny(n.clone())
                } else {
                    AbstractLoc::Var(n.clone())
                }
            })
            .collect()
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum SharedError {
    #[error("reference to undeclared variable `{0}`")]
    Undeclared(String),
}

/// Classify every referenced variable as shared or local.
pub fn classify_locations(p: &Program) -> Result<LocationTable, SharedError> {
    let mut map = BTreeMap::new();
    for d in &p.shared {
        map.insert(
            d.name.clone(),
            LocationInfo {
                kind: LocKind::Shared,
                is_array: d.array_size.is_some(),
                array_size: d.array_size,
                is_volatile: d.volatile,
            },
        );
    }
    for l in &p.locals {
        map.insert(
            l.clone(),
            LocationInfo { kind: LocKind::Local, is_array: false, array_size: None, is_volatile: false },
        );
    }
    // Every referenced variable must be declared.
    let check = |name: &str| -> Result<(), SharedError> {
        if map.contains_key(name) {
            Ok(())
        } else {
            Err(SharedError::Undeclared(name.to_string()))
        }
    };
    for id in p.body_ids() {
        for instr in &p.body(id).instrs {
            for v in instr_vars(instr) {
                check(&v)?;
            }
        }
    }
    Ok(LocationTable { map })
}

fn instr_vars(instr: &Instruction) -> Vec<String> {
    let mut out = Vec::new();
    collect_instr_vars(instr, &mut out);
    out
}

fn collect_instr_vars(instr: &Instruction, out: &mut Vec<String>) {
    match &instr.kind {
        InstrKind::Assign(lhs, rhs) => {
            match lhs {
                Lvalue::Var(v) | Lvalue::Deref(v) => out.push(v.clone()),
                Lvalue::Index(b, idx) => {
                    out.push(b.clone());
                    idx.vars(out);
                }
            }
            rhs.vars(out);
        }
        InstrKind::Guard(cond, inner) => {
            cond.vars(out);
            collect_instr_vars(inner, out);
        }
        InstrKind::Assume(e) | InstrKind::Assert(e) => e.vars(out),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Abstract locations
// ---------------------------------------------------------------------------

/// What an abstract event reads or writes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AbstractLoc {
    /// A scalar shared variable.
    Var(String),
    /// A specific array element `t[k]`.
    Elem(String, i64),
    /// Some element of an array, offset unknown: `t[*]`.
    ArrayAny(String),
    /// Could be any shared object.
    AnyShared,
}

impl AbstractLoc {
    /// Could two accesses touch the same memory cell?
    pub fn may_alias(&self, other: &AbstractLoc) -> bool {
        use AbstractLoc::*;
        match (self, other) {
            (AnyShared, _) | (_, AnyShared) => true,
            (Var(a), Var(b)) => a == b,
            (Elem(a, i), Elem(b, j)) => a == b && i == j,
            (Elem(a, _), ArrayAny(b)) | (ArrayAny(a), Elem(b, _)) => a == b,
            (ArrayAny(a), ArrayAny(b)) => a == b,
            _ => false,
        }
    }

    /// Do two accesses definitely touch the same cell? Star locations may
    /// stand for different cells, so only fully named locations qualify.
    pub fn definitely_same(&self, other: &AbstractLoc) -> bool {
        use AbstractLoc::*;
        match (self, other) {
            (Var(a), Var(b)) => a == b,
            (Elem(a, i), Elem(b, j)) => a == b && i == j,
            _ => false,
        }
    }

    /// The syntactic base object, when the location names one.
    pub fn base(&self) -> Option<&str> {
        match self {
            AbstractLoc::Var(n) | AbstractLoc::Elem(n, _) | AbstractLoc::ArrayAny(n) => Some(n),
            AbstractLoc::AnyShared => None,
        }
    }
}

impl fmt::Display for AbstractLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractLoc::Var(n) => write!(f, "{n}"),
            AbstractLoc::Elem(n, i) => write!(f, "{n}[{i}]"),
            AbstractLoc::ArrayAny(n) => write!(f, "{n}[*]"),
            AbstractLoc::AnyShared => write!(f, "*"),
        }
    }
}

// ---------------------------------------------------------------------------
// Points-to
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Precision {
    Precise,
    IndexInsensitive,
    Imprecise,
}

impl Precision {
    pub fn from_token(s: &str) -> Option<Precision> {
        match s {
            "precise" => Some(Precision::Precise),
            "index-insensitive" => Some(Precision::IndexInsensitive),
            "imprecise" => Some(Precision::Imprecise),
            _ => None,
        }
    }
}

/// Resolved targets of one access site.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TargetSet {
    /// Exactly these shared objects.
    Precise(BTreeSet<AbstractLoc>),
    /// Any offset of one array.
    IndexInsensitive(String),
    /// Any shared object in the program.
    Unknown,
}

impl TargetSet {
    /// Expand to concrete abstract locations; `Unknown` enumerates every
    /// shared object.
    pub fn locs(&self, table: &LocationTable) -> BTreeSet<AbstractLoc> {
        match self {
            TargetSet::Precise(s) => s.clone(),
            TargetSet::IndexInsensitive(a) => {
                let mut s = BTreeSet::new();
                s.insert(AbstractLoc::ArrayAny(a.clone()));
                s
            }
            TargetSet::Unknown => table.all_shared_locs(),
        }
    }

    /// Set inclusion up to subsumption: every location of `self` is covered
    /// by some location of `other`.
    pub fn subsumed_by(&self, other: &TargetSet, table: &LocationTable) -> bool {
        if matches!(other, TargetSet::Unknown) {
            return true;
        }
        let covers = |small: &AbstractLoc, big: &AbstractLoc| -> bool {
            use AbstractLoc::*;
            match (small, big) {
                (_, AnyShared) => true,
                (a, b) if a == b => true,
                (Elem(a, _), ArrayAny(b)) => a == b,
                _ => false,
            }
        };
        let big = other.locs(table);
        self.locs(table).iter().all(|s| big.iter().any(|b| covers(s, b)))
    }

    /// True when placing this access in a loop requires duplicating the loop
    /// body: the site may denote different cells on different iterations.
    pub fn needs_duplication(&self) -> bool {
        match self {
            TargetSet::Precise(s) => {
                s.len() > 1
                    || s.iter().any(|l| matches!(l, AbstractLoc::ArrayAny(_) | AbstractLoc::AnyShared))
            }
            TargetSet::IndexInsensitive(_) => true,
            TargetSet::Unknown => true,
        }
    }
}

/// Flow-insensitive points-to result for one program and precision level.
#[derive(Clone, Debug)]
pub struct PointsToMap {
    pub precision: Precision,
    /// Shared-object targets per pointer-holding variable.
    pointer_targets: BTreeMap<String, PtSet>,
    all_shared: BTreeSet<AbstractLoc>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct PtSet {
    locs: BTreeSet<AbstractLoc>,
    unknown: bool,
}

/// An access site that goes through an index or a pointer, with its
/// resolved targets. Used by diagnostics and tests.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SiteTargets {
    pub position: crate::ir::Position,
    pub site: String,
    pub targets: TargetSet,
}

impl PointsToMap {
    /// Targets of an array access with the given (possibly constant) index.
    pub fn array_targets(&self, base: &str, index: Option<i64>) -> TargetSet {
        match (self.precision, index) {
            (Precision::Precise, Some(k)) => {
                let mut s = BTreeSet::new();
                s.insert(AbstractLoc::Elem(base.to_string(), k));
                TargetSet::Precise(s)
            }
            _ => TargetSet::IndexInsensitive(base.to_string()),
        }
    }

    /// Shared targets of `*ptr`.
    pub fn deref_targets(&self, ptr: &str) -> TargetSet {
        if self.precision == Precision::Imprecise {
            return TargetSet::Unknown;
        }
        match self.pointer_targets.get(ptr) {
            None => TargetSet::Precise(BTreeSet::new()),
            Some(set) if set.unknown => TargetSet::Unknown,
            Some(set) => {
                let mut locs: BTreeSet<AbstractLoc> = set
                    .locs
                    .iter()
                    .filter(|l| self.is_shared_loc(l))
                    .cloned()
                    .collect();
                if self.precision == Precision::IndexInsensitive {
                    locs = locs
                        .into_iter()
                        .map(|l| match l {
                            AbstractLoc::Elem(a, _) => AbstractLoc::ArrayAny(a),
                            other => other,
                        })
                        .collect();
                }
                TargetSet::Precise(locs)
            }
        }
    }

    fn is_shared_loc(&self, l: &AbstractLoc) -> bool {
        match l {
            AbstractLoc::AnyShared => true,
            AbstractLoc::Var(n) => self.all_shared.contains(&AbstractLoc::Var(n.clone())),
            AbstractLoc::Elem(n, _) | AbstractLoc::ArrayAny(n) => {
                self.all_shared.contains(&AbstractLoc::ArrayAny(n.clone()))
            }
        }
    }
}

/// Compute the points-to abstraction at the requested precision.
pub fn points_to(p: &Program, table: &LocationTable, precision: Precision) -> PointsToMap {
    // Andersen-style set propagation over variables. Arrays double as
    // containers: `t[i] = &x` stores into the container of `t`, `p = t[i]`
    // loads from it.
    let mut locs: HashMap<String, PtSet> = HashMap::new();
    let mut copies: HashMap<String, BTreeSet<String>> = HashMap::new(); // dst <- src

    let add_loc = |locs: &mut HashMap<String, PtSet>, dst: &str, l: AbstractLoc| {
        locs.entry(dst.to_string()).or_default().locs.insert(l);
    };

    let container = |base: &str| format!("{base}\u{1}contents");

    let handle_assign = |lhs: &Lvalue, rhs: &Expr,
                             locs: &mut HashMap<String, PtSet>,
                             copies: &mut HashMap<String, BTreeSet<String>>| {
        // Destination node(s) of this assignment, as variable keys.
        let dests: Vec<String> = match lhs {
            Lvalue::Var(v) => vec![v.clone()],
            Lvalue::Index(b, _) => vec![container(b)],
            // *p = rhs stores through p; model with a deref-destination node
            // resolved after propagation (kept simple: store into the
            // containers/vars p may point to once known — approximated by a
            // dedicated node per pointer).
            Lvalue::Deref(v) => vec![format!("{v}\u{1}deref")],
        };
        let mut srcs: Vec<String> = Vec::new();
        let mut direct: Vec<AbstractLoc> = Vec::new();
        let mut unknown = false;
        collect_rhs(rhs, table, &mut srcs, &mut direct, &mut unknown, &container);
        for d in &dests {
            for l in &direct {
                add_loc(locs, d, l.clone());
            }
            if unknown {
                locs.entry(d.clone()).or_default().unknown = true;
            }
            for s in &srcs {
                copies.entry(d.clone()).or_default().insert(s.clone());
            }
        }
    };

    for id in p.body_ids() {
        for instr in &p.body(id).instrs {
            visit_assigns(instr, &mut |lhs, rhs| handle_assign(lhs, rhs, &mut locs, &mut copies));
        }
    }

    // Deref-destination nodes flow into what the pointer may point at.
    // Iterate copies + deref flows to a fixpoint.
    loop {
        let mut changed = false;
        // dst <- src copies
        let copy_list: Vec<(String, String)> = copies
            .iter()
            .flat_map(|(d, ss)| ss.iter().map(move |s| (d.clone(), s.clone())))
            .collect();
        for (dst, src) in &copy_list {
            let src_set = locs.get(src).cloned().unwrap_or_default();
            let entry = locs.entry(dst.clone()).or_default();
            let before = (entry.locs.len(), entry.unknown);
            entry.locs.extend(src_set.locs.iter().cloned());
            entry.unknown |= src_set.unknown;
            if (entry.locs.len(), entry.unknown) != before {
                changed = true;
            }
        }
        // *p = ... : contents of the deref node flow into pointed-to vars
        // and array containers.
        let deref_nodes: Vec<String> = locs
            .keys()
            .filter(|k| k.ends_with("\u{1}deref"))
            .cloned()
            .collect();
        for node in deref_nodes {
            let ptr = node.trim_end_matches("\u{1}deref").to_string();
            let ptr_set = locs.get(&ptr).cloned().unwrap_or_default();
            let payload = locs.get(&node).cloned().unwrap_or_default();
            for target in &ptr_set.locs {
                let key = match target {
                    AbstractLoc::Var(v) => v.clone(),
                    AbstractLoc::Elem(a, _) | AbstractLoc::ArrayAny(a) => container(a),
                    AbstractLoc::AnyShared => continue,
                };
                let entry = locs.entry(key).or_default();
                let before = (entry.locs.len(), entry.unknown);
                entry.locs.extend(payload.locs.iter().cloned());
                entry.unknown |= payload.unknown;
                if (entry.locs.len(), entry.unknown) != before {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let pointer_targets = locs
        .into_iter()
        .filter(|(k, _)| !k.contains('\u{1}'))
        .collect::<BTreeMap<_, _>>();

    PointsToMap { precision, pointer_targets, all_shared: table.all_shared_locs() }
}

fn collect_rhs(
    e: &Expr,
    table: &LocationTable,
    srcs: &mut Vec<String>,
    direct: &mut Vec<AbstractLoc>,
    unknown: &mut bool,
    container: &impl Fn(&str) -> String,
) {
    match e {
        Expr::AddrOf(x) => {
            if table.is_array(x) {
                direct.push(AbstractLoc::ArrayAny(x.clone()));
            } else {
                direct.push(AbstractLoc::Var(x.clone()));
            }
        }
        Expr::Var(v) => srcs.push(v.clone()),
        Expr::Index(b, idx) => {
            srcs.push(container(b));
            collect_rhs(idx, table, srcs, direct, unknown, container);
        }
        Expr::Deref(v) => {
            // Loading a pointer through a pointer; approximate as unknown
            // unless it never carries addresses, which propagation sorts out.
            srcs.push(format!("{v}\u{1}deref"));
            // what *v yields is whatever the pointed-to cells hold; flowing
            // the deref node suffices because stores into it are mirrored
            // into those cells' nodes.
            let _ = v;
        }
        Expr::Unary(_, inner) => collect_rhs(inner, table, srcs, direct, unknown, container),
        Expr::Binary(_, l, r) => {
            collect_rhs(l, table, srcs, direct, unknown, container);
            collect_rhs(r, table, srcs, direct, unknown, container);
        }
        Expr::Lit(_) | Expr::Nondet => {}
    }
}

fn visit_assigns(instr: &Instruction, f: &mut impl FnMut(&Lvalue, &Expr)) {
    match &instr.kind {
        InstrKind::Assign(lhs, rhs) => f(lhs, rhs),
        InstrKind::Guard(_, inner) => visit_assigns(inner, f),
        _ => {}
    }
}

/// List every index/deref site with its resolved targets, for tests and
/// debugging output.
pub fn site_targets(p: &Program, table: &LocationTable, pt: &PointsToMap) -> Vec<SiteTargets> {
    let mut out = Vec::new();
    for id in p.body_ids() {
        for instr in &p.body(id).instrs {
            collect_sites(instr, table, pt, &mut out);
        }
    }
    out
}

fn collect_sites(
    instr: &Instruction,
    table: &LocationTable,
    pt: &PointsToMap,
    out: &mut Vec<SiteTargets>,
) {
    let pos = instr.origin;
    let expr_sites = |e: &Expr, out: &mut Vec<SiteTargets>| {
        collect_expr_sites(e, pos, table, pt, out);
    };
    match &instr.kind {
        InstrKind::Assign(lhs, rhs) => {
            match lhs {
                Lvalue::Index(b, idx) if table.is_shared(b) => {
                    out.push(SiteTargets {
                        position: pos,
                        site: format!("{b}[.]"),
                        targets: pt.array_targets(b, const_index(idx)),
                    });
                    expr_sites(idx, out);
                }
                Lvalue::Deref(v) => {
                    out.push(SiteTargets {
                        position: pos,
                        site: format!("*{v}"),
                        targets: pt.deref_targets(v),
                    });
                }
                _ => {}
            }
            expr_sites(rhs, out);
        }
        InstrKind::Guard(cond, inner) => {
            expr_sites(cond, out);
            collect_sites(inner, table, pt, out);
        }
        InstrKind::Assume(e) | InstrKind::Assert(e) => expr_sites(e, out),
        _ => {}
    }
}

fn collect_expr_sites(
    e: &Expr,
    pos: crate::ir::Position,
    table: &LocationTable,
    pt: &PointsToMap,
    out: &mut Vec<SiteTargets>,
) {
    match e {
        Expr::Index(b, idx) => {
            if table.is_shared(b) {
                out.push(SiteTargets {
                    position: pos,
                    site: format!("{b}[.]"),
                    targets: pt.array_targets(b, const_index(idx)),
                });
            }
            collect_expr_sites(idx, pos, table, pt, out);
        }
        Expr::Deref(v) => out.push(SiteTargets {
            position: pos,
            site: format!("*{v}"),
            targets: pt.deref_targets(v),
        }),
        Expr::Unary(_, inner) => collect_expr_sites(inner, pos, table, pt, out),
        Expr::Binary(_, l, r) => {
            collect_expr_sites(l, pos, table, pt, out);
            collect_expr_sites(r, pos, table, pt, out);
        }
        _ => {}
    }
}

pub fn const_index(e: &Expr) -> Option<i64> {
    match e {
        Expr::Lit(v) => Some(*v),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn fig5() -> Program {
        parse_program(
            "shared x
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
             thread t2 { r2 = y; r3 = z; r4 = x; end_thread }",
        )
        .unwrap()
    }

    #[test]
    fn fig5_classification() {
        let table = classify_locations(&fig5()).unwrap();
        for s in ["x", "y", "z"] {
            assert!(table.is_shared(s), "{s} should be shared");
        }
        for l in ["input", "tmp", "r1", "r2", "r3", "r4"] {
            assert!(!table.is_shared(l), "{l} should be local");
        }
    }

    #[test]
    fn locals_only_program() {
        let p = parse_program("local a\nthread t0 { a = 1; end_thread }").unwrap();
        let table = classify_locations(&p).unwrap();
        assert_eq!(table.shared_names().count(), 0);
    }

    #[test]
    fn shared_array_flagged() {
        let p = parse_program("shared t[4]\nthread t0 { t[0] = 1; end_thread }").unwrap();
        let table = classify_locations(&p).unwrap();
        let info = table.get("t").unwrap();
        assert_eq!(info.kind, LocKind::Shared);
        assert!(info.is_array);
        assert_eq!(info.array_size, Some(4));
    }

    #[test]
    fn undeclared_reference_rejected() {
        let p = parse_program("thread t0 { q = 1; end_thread }").unwrap();
        assert_eq!(classify_locations(&p), Err(SharedError::Undeclared("q".into())));
    }

    #[test]
    fn pointer_into_array_resolves_to_array() {
        // *(&t + y + r) = z + 3, expressed with an explicit pointer local.
        let p = parse_program(
            "shared t[8]
             shared y
             shared z
             local r
             local p
             thread t0 { p = &t + y + r; *p = z + 3; end_thread }",
        )
        .unwrap();
        let table = classify_locations(&p).unwrap();
        let pt = points_to(&p, &table, Precision::Precise);
        let targets = pt.deref_targets("p");
        assert_eq!(
            targets,
            TargetSet::Precise(BTreeSet::from([AbstractLoc::ArrayAny("t".into())]))
        );
    }

    #[test]
    fn array_site_precision_ladder() {
        let p = parse_program(
            "shared t[4]
             local i
             thread t0 { t[i] = 1; t[2] = 1; end_thread }",
        )
        .unwrap();
        let table = classify_locations(&p).unwrap();
        let precise = points_to(&p, &table, Precision::Precise);
        let ii = points_to(&p, &table, Precision::IndexInsensitive);
        let imp = points_to(&p, &table, Precision::Imprecise);

        // symbolic index collapses to t[*] at every precision
        assert_eq!(precise.array_targets("t", None), TargetSet::IndexInsensitive("t".into()));
        // constant index: element at precise, t[*] below
        assert_eq!(
            precise.array_targets("t", Some(2)),
            TargetSet::Precise(BTreeSet::from([AbstractLoc::Elem("t".into(), 2)]))
        );
        assert_eq!(ii.array_targets("t", Some(2)), TargetSet::IndexInsensitive("t".into()));
        assert_eq!(imp.array_targets("t", Some(2)), TargetSet::IndexInsensitive("t".into()));
    }

    #[test]
    fn unresolvable_pointer_is_unknown_when_imprecise() {
        let p = parse_program(
            "shared x
             shared y
             local p
             thread t0 { p = nondet(); *p = 1; end_thread }",
        )
        .unwrap();
        let table = classify_locations(&p).unwrap();
        let imp = points_to(&p, &table, Precision::Imprecise);
        assert_eq!(imp.deref_targets("p"), TargetSet::Unknown);
        // expansion covers every shared object
        let locs = imp.deref_targets("p").locs(&table);
        assert!(locs.contains(&AbstractLoc::Var("x".into())));
        assert!(locs.contains(&AbstractLoc::Var("y".into())));
    }

    #[test]
    fn monotone_in_precision() {
        let p = parse_program(
            "shared t[4]
             shared x
             local p
             local i
             thread t0 { p = &x; *p = t[i]; t[1] = *p; end_thread }",
        )
        .unwrap();
        let table = classify_locations(&p).unwrap();
        let precise = points_to(&p, &table, Precision::Precise);
        let ii = points_to(&p, &table, Precision::IndexInsensitive);
        let imp = points_to(&p, &table, Precision::Imprecise);
        for (hi, lo) in [(&precise, &ii), (&ii, &imp)] {
            for s in site_targets(&p, &table, hi) {
                let lo_site = site_targets(&p, &table, lo)
                    .into_iter()
                    .find(|t| t.position == s.position && t.site == s.site)
                    .unwrap();
                assert!(
                    s.targets.subsumed_by(&lo_site.targets, &table),
                    "site {} lost targets when lowering precision",
                    s.site
                );
            }
        }
    }

    #[test]
    fn address_of_local_never_shared() {
        let p = parse_program(
            "shared x
             local r
             local p
             thread t0 { p = &r; *p = x; end_thread }",
        )
        .unwrap();
        let table = classify_locations(&p).unwrap();
        let pt = points_to(&p, &table, Precision::Precise);
        // the write through p only touches the local r: no shared target
        assert_eq!(pt.deref_targets("p"), TargetSet::Precise(BTreeSet::new()));
    }
}
