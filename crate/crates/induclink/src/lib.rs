//! Simulator and design tool for transcutaneous inductive power links that
//! drive implanted devices.
//!
//! Two tuned topologies are modeled in closed form (series-tuned primary,
//! and series-tuned primary with a parallel-tuned secondary): complex
//! voltage gain, link efficiency, and mesh currents. An independent nodal
//! AC solver over generic RLC netlists with mutual coupling verifies every
//! closed-form result, a sweep engine regenerates the reference figure data
//! as CSV, and a tuner/optimizer picks resonant capacitors and searches the
//! design space under the tissue-safety coupling constraint k ≤ 0.45.

pub mod cli;
pub mod error;
pub mod link;
pub mod mna;
pub mod netlist;
pub mod phasor;
pub mod sweep;
pub mod tuner;
pub mod verify;

pub use error::{Error, Result};
pub use link::{
    branch_a, branch_b, efficiency_series, efficiency_sp, gain_series, gain_sp,
    mutual_inductance, solve_link, validate_safety, zload_parallel, CoilPair, LinkDesign,
    LoadSpec, SafetyReport, SolveResult, SourceSpec, Topology, TuningSpec, K_SAFETY_LIMIT,
};
pub use mna::{power_audit, solve_ac, AcSolution, PowerAudit};
pub use netlist::{netlist_from_design, parse_netlist, serialize, Element, Netlist};
pub use phasor::{
    combine, impedance_of_element, AngularFrequency, CombineMode, ComplexValue, Impedance,
    PassiveElement,
};
pub use sweep::{figure_preset, run_sweep, Figure, SweepSpec, SweepTable, SweepVariable};
pub use tuner::{
    optimize, parallel_tank_cap, series_resonance_cap, tune_design, FreeVariable, Objective,
    OptimizationOutcome, OptimizationProblem, TuneResult,
};
