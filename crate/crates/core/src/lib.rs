//! Conservation-of-value accounting and simulation.
//!
//! Every cycle of value moves four flows per tick (value added, extracted,
//! lost and gained) bound by `VA + VE = VL + VG`. This crate provides exact
//! ledgers for those flows, a small scenario language, a deterministic tick
//! engine, finite-difference analysis of the recorded series, and the
//! market-level experiments built on top.

pub mod analysis;
pub mod calculus;
pub mod demos;
pub mod dsl;
pub mod engine;
pub mod ledger;
pub mod market;
pub mod output;

pub use calculus::{DerivativeSet, Event, EventKind, MotionClass, Series};
pub use dsl::{check_scenario, format_scenario, parse_scenario, Diagnostic, ScenarioAst, Severity};
pub use engine::{run, total_system_value, SimulationResult, WorldState};
pub use ledger::{Coefficient, CycleLedger, TickFlows, ValueAmount};
