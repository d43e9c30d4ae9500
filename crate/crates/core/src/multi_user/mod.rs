//! Multi-user design: ZF precoding, PSO placement of every PA and SCA power
//! allocation, alternated by block coordinate descent.

pub mod bcd;
pub mod pso;
pub mod sca;
pub mod trace;
pub mod zf;

pub use bcd::{bcd_solve, layout_lambda, power_only, BcdConfig, BcdRecord, BcdSolution, BcdTrace};
pub use pso::{feasible_interval, layout_transmit_power, minimize_interval, pso_optimize_pa, PsoConfig, PsoOutcome};
pub use sca::{evaluate_power, initial_power, sca_power, ScaConfig, ScaIterate, ScaOutcome, TaylorOrder};
pub use trace::{penalized, trace_objective_sm, waveguide_columns, TraceEvaluator};
pub use zf::{gram_inverse, transmit_power, zf_build, ZfState, RANK_TOL};
