//! Optimal polychromatic driving of Raman transitions in a degenerate
//! three-level Lambda system.
//!
//! A periodic drive couples both ground states `|1⟩`, `|2⟩` to the excited
//! state `|3⟩`. Its one-period propagator defines an effective Hamiltonian
//! whose ground-state coupling should reproduce a target Raman rate `Ω_tg`.
//! This crate
//!
//! * evaluates the closed-form constraint sets on the pulse's Fourier
//!   components ([`magnus`]),
//! * solves for the components that minimise the fluctuations around the
//!   target dynamics ([`optimizer`]),
//! * propagates the full three-level dynamics and measures the fluctuations
//!   per driving period ([`simulator`]),
//! * and estimates how robust an optimal pulse is to random amplitude errors
//!   ([`robustness`]).
//!
//! Units: ω = 1, so `T = 2π`; amplitudes are in units of ω.

pub mod error;
pub mod linalg;
pub mod magnus;
pub mod optimizer;
pub mod problem;
pub mod robustness;
pub mod simulator;

pub use error::{Error, Result};
pub use magnus::{ConstraintReport, Order};
pub use optimizer::{solve_second_order, solve_third_order, SolverOptions};
pub use problem::{mc_pulse, DrivingConfig, OptimizationResult, Pulse};
pub use robustness::{Execution, RobustnessConfig, RobustnessSummary};
pub use simulator::{FidelityReport, IntegratorOptions, TargetFrame, UnitaryTrajectory};
