//! Reference solutions, stress recovery, convergence tables and the
//! benchmark drivers behind the `cutmem` binary.

pub mod benchmarks;
pub mod config;
pub mod convergence;
pub mod exact;
pub mod output;
pub mod stress;

pub use benchmarks::{
    bending_beam, conditioning_sweep, cylinder, oblate, solve_membrane, stiffened_beam, BeamOutcome,
    ConditioningRow, DirichletSpec, MembraneProblem, MembraneSolution, Study,
};
pub use convergence::{fill_rates, fitted_rate, rate, ConvergenceRow};
pub use exact::{cylinder_load, exact_cylinder_stress, oblate_manufactured, CylinderPull, OblateManufactured};
pub use stress::{recover_stress, stress_error_l2, StressSample};
