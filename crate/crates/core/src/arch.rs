//! Per-architecture delay classification and fence coverage.
//!
//! A program-order pair is a *delay* when the target architecture may
//! execute it out of order. TSO relaxes write-read pairs; PSO additionally
//! write-write; RMO relaxes all four direction combinations but preserves
//! dependencies; Power relaxes all four and, because its writes are not
//! atomic, additionally the external read-from (`rfe`).
//!
//! The SC/x86/Power rows come straight from the usual ppo/fence table; the
//! PSO and RMO rows follow standard Sparc semantics and are our extension
//! (the table only prints SC, x86 and Power).

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ir::FenceType;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Architecture {
    Sc,
    Tso,
    Pso,
    Rmo,
    Power,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Sc,
        Architecture::Tso,
        Architecture::Pso,
        Architecture::Rmo,
        Architecture::Power,
    ];

    /// Parse a CLI token. `arm` is an alias for Power: fence synthesis
    /// treats the two alike.
    pub fn from_token(s: &str) -> Option<Architecture> {
        match s {
            "sc" => Some(Architecture::Sc),
            "tso" | "x86" => Some(Architecture::Tso),
            "pso" => Some(Architecture::Pso),
            "rmo" => Some(Architecture::Rmo),
            "power" | "arm" => Some(Architecture::Power),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Architecture::Sc => "sc",
            Architecture::Tso => "tso",
            Architecture::Pso => "pso",
            Architecture::Rmo => "rmo",
            Architecture::Power => "power",
        }
    }

    /// Writes may become visible to different threads at different times.
    /// Cumulativity constraints are only needed where this holds.
    pub fn has_non_atomic_writes(self) -> bool {
        matches!(self, Architecture::Power)
    }

    /// Data/address dependencies order the instructions they connect on
    /// every architecture that relaxes read-first pairs at all.
    pub fn preserves_dependencies(self) -> bool {
        true
    }
}

/// Kinds of relaxable pairs: same-thread pairs by endpoint directions, and
/// the external read-from abstracted by a write-to-read competing edge.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum DelayKind {
    PoWR,
    PoWW,
    PoRW,
    PoRR,
    Rfe,
}

impl DelayKind {
    pub fn token(self) -> &'static str {
        match self {
            DelayKind::PoWR => "poWR",
            DelayKind::PoWW => "poWW",
            DelayKind::PoRW => "poRW",
            DelayKind::PoRR => "poRR",
            DelayKind::Rfe => "rfe",
        }
    }
}

/// Is this kind of pair relaxable on the architecture?
pub fn is_delay(kind: DelayKind, arch: Architecture) -> bool {
    use Architecture::*;
    use DelayKind::*;
    match arch {
        Sc => false,
        Tso => kind == PoWR,
        Pso => matches!(kind, PoWR | PoWW),
        Rmo => matches!(kind, PoWR | PoWW | PoRW | PoRR),
        Power => true,
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum ArchError {
    #[error("{kind:?} is not a delay on {arch:?}")]
    NotADelay { kind: DelayKind, arch: Architecture },
}

/// Fence types able to restore order across a delay of the given kind.
///
/// For `rfe` only cumulative fences apply; the further lightweight-fence
/// restriction (no lwf on write-read or read-write shaped edges) is enforced
/// where the covering constraints are built.
pub fn fence_options(kind: DelayKind, arch: Architecture) -> Result<BTreeSet<FenceType>, ArchError> {
    use FenceType::*;
    if !is_delay(kind, arch) {
        return Err(ArchError::NotADelay { kind, arch });
    }
    let opts: &[FenceType] = match kind {
        DelayKind::PoWR => &[Full],
        DelayKind::PoWW => &[Full, Lightweight],
        DelayKind::PoRW => &[Full, Lightweight, Dependency],
        DelayKind::PoRR => &[Full, Lightweight, Dependency, Control],
        DelayKind::Rfe => &[Full, Lightweight],
    };
    Ok(opts.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tso_relaxes_only_write_read() {
        assert!(is_delay(DelayKind::PoWR, Architecture::Tso));
        assert!(!is_delay(DelayKind::PoWW, Architecture::Tso));
        assert!(!is_delay(DelayKind::PoRW, Architecture::Tso));
        assert!(!is_delay(DelayKind::PoRR, Architecture::Tso));
        assert!(!is_delay(DelayKind::Rfe, Architecture::Tso));
    }

    #[test]
    fn rfe_only_relaxed_on_power() {
        for arch in Architecture::ALL {
            assert_eq!(is_delay(DelayKind::Rfe, arch), arch == Architecture::Power);
        }
    }

    #[test]
    fn sc_has_no_delays() {
        for kind in [DelayKind::PoWR, DelayKind::PoWW, DelayKind::PoRW, DelayKind::PoRR, DelayKind::Rfe] {
            assert!(!is_delay(kind, Architecture::Sc));
        }
    }

    #[test]
    fn power_read_read_options() {
        let opts = fence_options(DelayKind::PoRR, Architecture::Power).unwrap();
        assert_eq!(
            opts,
            BTreeSet::from([
                FenceType::Full,
                FenceType::Lightweight,
                FenceType::Dependency,
                FenceType::Control
            ])
        );
    }

    #[test]
    fn power_write_read_needs_full_fence() {
        let opts = fence_options(DelayKind::PoWR, Architecture::Power).unwrap();
        assert_eq!(opts, BTreeSet::from([FenceType::Full]));
    }

    #[test]
    fn pso_write_write_options() {
        let opts = fence_options(DelayKind::PoWW, Architecture::Pso).unwrap();
        assert_eq!(opts, BTreeSet::from([FenceType::Full, FenceType::Lightweight]));
    }

    #[test]
    fn non_delay_query_is_an_error() {
        assert!(fence_options(DelayKind::PoWW, Architecture::Tso).is_err());
    }

    #[test]
    fn option_sets_grow_with_weaker_kinds() {
        // poWR ⊆ poWW ⊆ poRW ⊆ poRR wherever all four are delays
        for arch in [Architecture::Rmo, Architecture::Power] {
            let wr = fence_options(DelayKind::PoWR, arch).unwrap();
            let ww = fence_options(DelayKind::PoWW, arch).unwrap();
            let rw = fence_options(DelayKind::PoRW, arch).unwrap();
            let rr = fence_options(DelayKind::PoRR, arch).unwrap();
            assert!(wr.is_subset(&ww));
            assert!(ww.is_subset(&rw));
            assert!(rw.is_subset(&rr));
        }
    }

    #[test]
    fn full_fence_everywhere() {
        for arch in Architecture::ALL {
            for kind in [DelayKind::PoWR, DelayKind::PoWW, DelayKind::PoRW, DelayKind::PoRR, DelayKind::Rfe] {
                if let Ok(opts) = fence_options(kind, arch) {
                    assert!(opts.contains(&FenceType::Full));
                }
            }
        }
    }
}
