//! Numerical workbench for the scalar Chern-Simons equation
//! `-Δu + e^u(e^u - 1) = μ` and the Chern-Simons system with measure data on
//! rectangles.
//!
//! The crate covers exact reduced-measure calculus ([`reduced`]), mollified
//! approximation schedules ([`mollifier`], [`schedule`]), a finite-difference
//! solver ([`solver`]), flux-based atom recovery ([`defect`]) and the
//! scenario runner behind the `rml` binary ([`harness`]).
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! harness and file formats work in `f64`, exposed through the aliases below.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defect;
pub mod error;
pub mod grid;
pub mod harness;
pub mod literal;
pub mod measure;
pub mod mollifier;
pub mod oracle;
pub mod real;
pub mod reduced;
pub mod schedule;
pub mod solver;

pub use defect::{
    atom_estimate, contour_flux, run_schedule, ConvergenceReport, FluxProbe, Problem,
};
pub use error::{Error, Result};
pub use grid::{l1_gap, GridFunction};
pub use measure::{Atom, Domain, FiniteMeasure, Point};
pub use mollifier::{mollify, weakstar_gap, KernelShape, MollifierFamily, TestFunction};
pub use real::Real;
pub use reduced::{
    good_measure_scalar, good_measure_system, scalar_reduced, system_reduced_atoms,
    system_reduced_sum, Nonlinearity, NonlinearityKind, ResolutionStatus, SystemAtomResolution,
};
pub use schedule::{ApproximationSchedule, MIndexRule, ScheduleKind};
pub use solver::{newtonian_potential, solve_poisson, solve_scalar, solve_system, SolverConfig};

pub type Measure = FiniteMeasure<f64>;
pub type Grid = GridFunction<f64>;
pub type MeasureDomain = Domain<f64>;
pub type Schedule = ApproximationSchedule<f64>;
pub type Probe = FluxProbe<f64>;
pub type Report = ConvergenceReport<f64>;
