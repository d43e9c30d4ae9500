//! Block coordinate descent alternating PA placement and power allocation.

use serde::{Deserialize, Serialize};

use super::pso::{pso_optimize_pa, PsoConfig};
use super::sca::{sca_power, ScaConfig, ScaIterate, ScaOutcome};
use super::zf::{gram_inverse, lambda_diag};
use crate::channel::build_channels;
use crate::error::{Error, Result};
use crate::layout::{PinchLayout, UserSet};
use crate::metrics::{Efficiency, PowerAllocation};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcdConfig {
    pub pso: PsoConfig,
    pub sca: ScaConfig,
    pub max_outer: usize,
    pub tol: f64,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            pso: PsoConfig::default(),
            sca: ScaConfig::default(),
            max_outer: 50,
            tol: 1e-6,
        }
    }
}

/// State after one outer iteration; iteration 0 is the initial power solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdRecord {
    pub iteration: usize,
    pub objective: f64,
    pub se: f64,
    pub ee: f64,
    pub transmit_power: f64,
    /// Transmit power at the previous `P` after the placement step.
    pub placement_trace: Option<f64>,
    pub pso_evaluations: usize,
    pub pso_reverted: bool,
    pub sca: Vec<ScaIterate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdTrace {
    pub records: Vec<BcdRecord>,
    pub converged: bool,
    pub non_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdSolution {
    pub layout: PinchLayout,
    pub powers: PowerAllocation,
    pub efficiency: Efficiency,
    pub objective: f64,
    pub transmit_power: f64,
    pub trace: BcdTrace,
}

fn check_dimensions(params: &SystemParams, users: &UserSet) -> Result<()> {
    params.validate()?;
    if users.is_empty() {
        return Err(Error::InvalidParams("no users".into()));
    }
    if users.len() > params.waveguide_count {
        return Err(Error::InvalidParams(format!(
            "ZF needs at least as many waveguides ({}) as users ({})",
            params.waveguide_count,
            users.len()
        )));
    }
    users.validate_in(params)
}

/// `Lambda` diagonal of a layout.
pub fn layout_lambda(params: &SystemParams, layout: &PinchLayout, users: &UserSet) -> Result<Vec<f64>> {
    let channels = build_channels(layout, params, users)?;
    let (lambda, _) = gram_inverse(&channels.psi)?;
    Ok(lambda_diag(&lambda))
}

fn record(iteration: usize, out: &ScaOutcome) -> BcdRecord {
    BcdRecord {
        iteration,
        objective: out.objective,
        se: out.efficiency.se,
        ee: out.efficiency.ee,
        transmit_power: out.transmit_power,
        placement_trace: None,
        pso_evaluations: 0,
        pso_reverted: false,
        sca: out.iterations.clone(),
    }
}

/// Power allocation only, at a fixed layout.
pub fn power_only(params: &SystemParams, users: &UserSet, layout: &PinchLayout, sca: &ScaConfig) -> Result<BcdSolution> {
    check_dimensions(params, users)?;
    let lambda = layout_lambda(params, layout, users)?;
    let out = sca_power(params, &lambda, None, sca)?;
    let converged = out.converged;
    let non_monotone = out.non_monotone;
    Ok(BcdSolution {
        layout: layout.clone(),
        powers: out.powers.clone(),
        efficiency: out.efficiency,
        objective: out.objective,
        transmit_power: out.transmit_power,
        trace: BcdTrace {
            records: vec![record(0, &out)],
            converged,
            non_monotone,
        },
    })
}

fn outer_seed(seed: u64, outer: usize) -> u64 {
    seed ^ (outer as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Power for `init_layout`, then alternate PSO placement at fixed `P` with a
/// warm-started power solve until the objective stops increasing.
pub fn bcd_solve(params: &SystemParams, users: &UserSet, init_layout: &PinchLayout, cfg: &BcdConfig) -> Result<BcdSolution> {
    check_dimensions(params, users)?;
    let initial = power_only(params, users, init_layout, &cfg.sca)?;
    let mut layout = initial.layout;
    let mut powers = initial.powers;
    let mut efficiency = initial.efficiency;
    let mut objective = initial.objective;
    let mut transmit = initial.transmit_power;
    let mut records = initial.trace.records;
    let mut non_monotone = initial.trace.non_monotone;
    let mut converged = false;

    for outer in 1..=cfg.max_outer {
        let pso_cfg = PsoConfig {
            seed: outer_seed(cfg.pso.seed, outer),
            ..cfg.pso
        };
        let placed = pso_optimize_pa(params, &layout, users, &powers, &pso_cfg)?;
        let lambda = layout_lambda(params, &placed.layout, users)?;
        let out = sca_power(params, &lambda, Some(&powers), &cfg.sca)?;
        non_monotone |= out.non_monotone;

        let mut rec = record(outer, &out);
        rec.placement_trace = Some(placed.transmit_power());
        rec.pso_evaluations = placed.evaluations;
        rec.pso_reverted = placed.reverted;
        records.push(rec);

        let change = (out.objective - objective) / objective.abs().max(1.0);
        if out.objective < objective - 1e-9 * objective.abs().max(1.0) {
            log::warn!("BCD objective fell from {objective:.12} to {:.12}; keeping the best", out.objective);
            non_monotone = true;
            break;
        }
        if out.objective >= objective {
            layout = placed.layout;
            powers = out.powers;
            efficiency = out.efficiency;
            objective = out.objective;
            transmit = out.transmit_power;
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged && !non_monotone {
        log::warn!("BCD hit {} outer iterations", cfg.max_outer);
    }

    Ok(BcdSolution {
        layout,
        powers,
        efficiency,
        objective,
        transmit_power: transmit,
        trace: BcdTrace {
            records,
            converged,
            non_monotone,
        },
    })
}
