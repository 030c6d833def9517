//! Static inference of memory fences that restore sequential consistency
//! for concurrent programs running on weak architectures.
//!
//! The pipeline: parse a goto-style IR ([`ir`]), classify locations and
//! resolve pointers ([`shared`]), build an abstract event graph ([`aeg`]),
//! enumerate potential critical cycles ([`cycles`]), derive a covering
//! integer program over fence placements ([`ilp`]), solve it exactly
//! ([`solver`]), and map the chosen placements back into the program text
//! ([`placement`]). [`strategies`] packages this pipeline next to four
//! simpler fencing policies for comparison, and [`oracle`] holds
//! independent brute-force implementations the tests check everything
//! against.

pub mod aeg;
pub mod arch;
pub mod cycles;
pub mod ilp;
pub mod ir;
pub mod oracle;
pub mod placement;
pub mod shared;
pub mod solver;
pub mod strategies;

pub use aeg::{build_aeg, duplicate_loop_bodies, Aeg};
pub use arch::{Architecture, DelayKind};
pub use cycles::{enumerate_critical_cycles, Caps, CriticalCycle};
pub use ilp::{build_ilp, CostModel, IlpProblem};
pub use ir::{parse_program, pretty_print, validate, FenceType, Program};
pub use oracle::{brute_cycles, verify_coverage};
pub use placement::{insert_fences, report, PositionPolicy};
pub use shared::{classify_locations, points_to, Precision};
pub use solver::{brute_force_solve, export_lp, parse_lp, solve, Solution};
pub use strategies::{analyze, apply_strategy, Analysis, AnalysisOptions, FencePlan, Strategy};
