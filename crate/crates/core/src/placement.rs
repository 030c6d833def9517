//! Mapping solved fence locations back into the program text.
//!
//! Full and lightweight fences on a pos edge go just after the edge's first
//! instruction or just before its last, depending on the position policy.
//! Control fences always go before the read they protect. Dependencies
//! cannot be expressed as a standalone instruction; they become an
//! annotated pseudo-fence `fence(dp, <label>, <base>);` in front of the
//! target access, with a label marking the source instruction, for a
//! back-end to lower.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::aeg::Aeg;
use crate::ilp::Cost;
use crate::ir::{DepSource, FenceType, InstrKind, Instruction, Position, Program};
use crate::strategies::{FencePlan, Site};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum PositionPolicy {
    #[default]
    AfterFirst,
    BeforeLast,
}

impl PositionPolicy {
    pub fn from_token(s: &str) -> Option<PositionPolicy> {
        match s {
            "after-first" => Some(PositionPolicy::AfterFirst),
            "before-last" => Some(PositionPolicy::BeforeLast),
            _ => None,
        }
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum PlacementError {
    #[error("plan refers to {0}, which does not exist in this program (stale plan?)")]
    StalePosition(Position),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SlotKind {
    Label,
    Fence,
}

/// Insert a fence plan into the program the plan was computed for,
/// returning the fenced program. The original instruction order is
/// preserved; only fences (and dependency source labels) are added.
pub fn insert_fences(
    program: &Program,
    plan: &FencePlan,
    policy: PositionPolicy,
) -> Result<Program, PlacementError> {
    // (position, before?) -> ordered slot inserts
    let mut before: BTreeMap<Position, Vec<(SlotKind, InstrKind)>> = BTreeMap::new();
    let mut after: BTreeMap<Position, Vec<(SlotKind, InstrKind)>> = BTreeMap::new();
    let mut dep_labels: BTreeMap<Position, String> = BTreeMap::new();
    let mut fresh_counter = 0usize;

    let check = |pos: Position| -> Result<(), PlacementError> {
        let body = match pos.body {
            crate::ir::BodyId::Thread(i) => program.threads.get(i as usize),
            crate::ir::BodyId::Func(i) => program.functions.get(i as usize),
        };
        match body {
            Some(b) if (pos.index as usize) < b.instrs.len() => Ok(()),
            _ => Err(PlacementError::StalePosition(pos)),
        }
    };

    let all_labels: BTreeSet<String> = program
        .body_ids()
        .flat_map(|id| program.body(id).instrs.iter())
        .filter_map(|i| match &i.kind {
            InstrKind::Label(l) => Some(l.clone()),
            _ => None,
        })
        .collect();

    for placement in &plan.placements {
        match (&placement.site, placement.fence) {
            (Site::PosEdge { to_pos, .. }, FenceType::Control) => {
                check(*to_pos)?;
                push_unique(
                    &mut before,
                    *to_pos,
                    (SlotKind::Fence, InstrKind::Fence { fence: FenceType::Control, dep_source: None }),
                );
            }
            (Site::PosEdge { from_pos, to_pos, .. }, fence) => match policy {
                PositionPolicy::AfterFirst => {
                    check(*from_pos)?;
                    push_unique(
                        &mut after,
                        *from_pos,
                        (SlotKind::Fence, InstrKind::Fence { fence, dep_source: None }),
                    );
                }
                PositionPolicy::BeforeLast => {
                    check(*to_pos)?;
                    push_unique(
                        &mut before,
                        *to_pos,
                        (SlotKind::Fence, InstrKind::Fence { fence, dep_source: None }),
                    );
                }
            },
            (Site::DepPair { source_pos, target_pos, source_base, .. }, _) => {
                check(*source_pos)?;
                check(*target_pos)?;
                let label = dep_labels.entry(*source_pos).or_insert_with(|| {
                    // reuse a label already naming the source instruction
                    let body = program.body(source_pos.body);
                    let idx = source_pos.index as usize;
                    if idx > 0 {
                        if let InstrKind::Label(l) = &body.instrs[idx - 1].kind {
                            return l.clone();
                        }
                    }
                    loop {
                        let cand = format!("__dp{fresh_counter}");
                        fresh_counter += 1;
                        if !all_labels.contains(&cand) {
                            return cand;
                        }
                    }
                });
                if label.starts_with("__dp") {
                    push_unique(&mut before, *source_pos, (SlotKind::Label, InstrKind::Label(label.clone())));
                }
                push_unique(
                    &mut before,
                    *target_pos,
                    (
                        SlotKind::Fence,
                        InstrKind::Fence {
                            fence: FenceType::Dependency,
                            dep_source: Some(DepSource {
                                label: label.clone(),
                                base: source_base.clone(),
                            }),
                        },
                    ),
                );
            }
            (Site::AfterInstr(pos), fence) => {
                check(*pos)?;
                push_unique(&mut after, *pos, (SlotKind::Fence, InstrKind::Fence { fence, dep_source: None }));
            }
            (Site::BeforeInstr(pos), fence) => {
                check(*pos)?;
                push_unique(&mut before, *pos, (SlotKind::Fence, InstrKind::Fence { fence, dep_source: None }));
            }
        }
    }

    let mut out = program.clone();
    for id in program.body_ids() {
        let src = &program.body(id).instrs;
        let mut instrs = Vec::with_capacity(src.len());
        for (idx, instr) in src.iter().enumerate() {
            let pos = Position { body: id, index: idx as u32, line: instr.line };
            let key = instr.origin; // parsed programs: origin == own position
            let _ = pos;
            if let Some(mut slots) = before.remove(&key) {
                slots.sort_by_key(|(k, _)| *k);
                for (_, kind) in slots {
                    instrs.push(Instruction { kind, line: instr.line, origin: instr.origin });
                }
            }
            instrs.push(instr.clone());
            if let Some(mut slots) = after.remove(&key) {
                slots.sort_by_key(|(k, _)| *k);
                for (_, kind) in slots {
                    instrs.push(Instruction { kind, line: instr.line, origin: instr.origin });
                }
            }
        }
        out.body_mut(id).instrs = instrs;
    }
    // anything not consumed referred to a position that does not exist
    if let Some((&pos, _)) = before.iter().next() {
        return Err(PlacementError::StalePosition(pos));
    }
    if let Some((&pos, _)) = after.iter().next() {
        return Err(PlacementError::StalePosition(pos));
    }
    // re-number origins so the fenced program stands on its own
    for id in out.body_ids().collect::<Vec<_>>() {
        let body = out.body_mut(id);
        for (idx, instr) in body.instrs.iter_mut().enumerate() {
            instr.origin = Position { body: id, index: idx as u32, line: instr.line };
        }
    }
    Ok(out)
}

fn push_unique(
    map: &mut BTreeMap<Position, Vec<(SlotKind, InstrKind)>>,
    pos: Position,
    entry: (SlotKind, InstrKind),
) {
    let slots = map.entry(pos).or_default();
    if !slots.contains(&entry) {
        slots.push(entry);
    }
}

/// Human-readable placement report: one line per placement, totals per
/// type, total cost.
pub fn report(plan: &FencePlan, g: &Aeg) -> String {
    let mut out = String::new();
    let mut lines: Vec<String> = Vec::new();
    for p in &plan.placements {
        let origins = if p.origins.is_empty() {
            String::new()
        } else {
            format!(" | cycles: {}", p.origins.join(" "))
        };
        let line = match &p.site {
            Site::PosEdge { from, to, from_pos, to_pos } => format!(
                "{} on edge ({}, {}) [{} -> {}]{}",
                p.fence,
                g.display_event(*from),
                g.display_event(*to),
                from_pos,
                to_pos,
                origins
            ),
            Site::DepPair { source, target, source_pos, target_pos, .. } => format!(
                "dp from {} [{}] to {} [{}]{}",
                g.display_event(*source),
                source_pos,
                g.display_event(*target),
                target_pos,
                origins
            ),
            Site::AfterInstr(pos) => format!("{} after {}{}", p.fence, pos, origins),
            Site::BeforeInstr(pos) => format!("{} before {}{}", p.fence, pos, origins),
        };
        lines.push(line);
    }
    lines.sort();
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    let totals: Vec<String> = FenceType::ALL
        .iter()
        .map(|&f| format!("{}={}", f.token(), plan.count_of(f)))
        .collect();
    out.push_str(&format!("totals: {}\n", totals.join(" ")));
    out.push_str(&format!(
        "{} fences, cost {}\n",
        plan.placements.len(),
        Cost::new(plan.total_scaled, plan.scale).display()
    ));
    if plan.capped {
        out.push_str("warning: enumeration or solving hit a configured cap; plan may be partial\n");
    }
    for w in &plan.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Architecture;
    use crate::ilp::CostModel;
    use crate::ir::{parse_program, pretty_print, validate};
    use crate::strategies::{analyze, apply_strategy, AnalysisOptions, Strategy};

    const SB: &str = "
        shared x
        shared y
        local r1
        local r2
        thread t0 { start_thread t1; x = 1; r1 = y; end_thread }
        thread t1 { y = 1; r2 = x; end_thread }
    ";

    #[test]
    fn empty_plan_unchanged() {
        let p = parse_program(SB).unwrap();
        let plan = FencePlan::empty(Strategy::Optimal, Architecture::Tso);
        let fenced = insert_fences(&p, &plan, PositionPolicy::AfterFirst).unwrap();
        assert_eq!(pretty_print(&fenced), pretty_print(&p));
        let a = analyze(&p, Architecture::Tso, AnalysisOptions::default()).unwrap();
        assert!(report(&plan, &a.aeg).contains("0 fences, cost 0"));
    }

    #[test]
    fn after_first_and_before_last() {
        let p = parse_program(SB).unwrap();
        let a = analyze(&p, Architecture::Tso, AnalysisOptions::default()).unwrap();
        let plan = apply_strategy(&a, Strategy::Optimal, &CostModel::default());
        assert_eq!(plan.placements.len(), 2);

        let fenced = insert_fences(&p, &plan, PositionPolicy::AfterFirst).unwrap();
        let printed = pretty_print(&fenced);
        // fence directly after each write
        assert!(
            printed.contains("x = 1;\n  fence(f);"),
            "after-first placement missing:\n{printed}"
        );
        assert!(printed.contains("y = 1;\n  fence(f);"));

        let fenced = insert_fences(&p, &plan, PositionPolicy::BeforeLast).unwrap();
        let printed = pretty_print(&fenced);
        assert!(
            printed.contains("fence(f);\n  r1 = y;"),
            "before-last placement missing:\n{printed}"
        );
        assert!(printed.contains("fence(f);\n  r2 = x;"));
    }

    #[test]
    fn insertion_preserves_validity() {
        let p = parse_program(SB).unwrap();
        let a = analyze(&p, Architecture::Power, AnalysisOptions::default()).unwrap();
        let plan = apply_strategy(&a, Strategy::Optimal, &CostModel::default());
        let fenced = insert_fences(&p, &plan, PositionPolicy::AfterFirst).unwrap();
        assert!(validate(&fenced).is_empty(), "{:?}", validate(&fenced));
        // and it round-trips through the printer
        let reparsed = parse_program(&pretty_print(&fenced)).unwrap();
        assert!(validate(&reparsed).is_empty());
    }

    #[test]
    fn stale_plan_rejected() {
        let p = parse_program(SB).unwrap();
        let other = parse_program("shared z\nthread t0 { z = 1; end_thread }").unwrap();
        let a = analyze(&p, Architecture::Tso, AnalysisOptions::default()).unwrap();
        let plan = apply_strategy(&a, Strategy::Optimal, &CostModel::default());
        assert!(insert_fences(&other, &plan, PositionPolicy::AfterFirst).is_err());
    }

    #[test]
    fn dependency_becomes_annotated_pseudo_fence() {
        // force a dp by making it constructible and the cheapest fix
        let src = "
            shared x
            shared y
            shared t[4]
            local r1
            local r2
            thread t0 { start_thread t1; x = 1; y = 1; end_thread }
            thread t1 { r1 = y; r2 = t[r1] + x; end_thread }
        ";
        let p = parse_program(src).unwrap();
        let a = analyze(&p, Architecture::Power, AnalysisOptions::default()).unwrap();
        let plan = apply_strategy(&a, Strategy::Optimal, &CostModel::default());
        if plan.placements.iter().any(|pl| matches!(pl.site, Site::DepPair { .. })) {
            let fenced = insert_fences(&p, &plan, PositionPolicy::AfterFirst).unwrap();
            let printed = pretty_print(&fenced);
            assert!(printed.contains("fence(dp,"), "dp annotation missing:\n{printed}");
            assert!(validate(&fenced).is_empty());
        }
    }
}
