//! Single-user design: PA placement by phase alignment, then the optimal
//! transmit power for the resulting beamforming gain.

pub mod icr;
pub mod placement;
pub mod power;

use serde::{Deserialize, Serialize};

pub use icr::{icr_refine, IcrContext, IcrSolution, QuadraticCoeffs, RefineDirection, DEFAULT_K_CAP};
pub use placement::{
    coarse_comb, coarse_placement, place_all, place_all_traced, reference_index, PlacementTrace,
    RefinementRecord,
};
pub use power::{
    ee_peak_power, ee_slope_numerator, g2_eval, g2_monotone_condition, g2_terms, optimal_power, PowerRegime,
};

use crate::error::Result;
use crate::layout::{PinchLayout, Point3};
use crate::metrics::{se_ee_single, single_user_gain, Efficiency};
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleUserSolution {
    pub layout: PinchLayout,
    pub power: f64,
    pub zeta: f64,
    pub efficiency: Efficiency,
    pub regime: PowerRegime,
    pub warnings: Vec<String>,
}

impl SingleUserSolution {
    pub fn objective(&self, beta: f64) -> f64 {
        self.efficiency.weighted_objective(beta)
    }
}

/// Placement, then power. The placement does not depend on the power.
pub fn solve_single_user(params: &SystemParams, user: &Point3) -> Result<SingleUserSolution> {
    let trace = place_all_traced(params, user)?;
    let mut solution = solve_with_layout(params, trace.layout, user)?;
    solution.warnings = trace.warnings;
    Ok(solution)
}

/// Optimal power for a fixed layout.
pub fn solve_with_layout(params: &SystemParams, layout: PinchLayout, user: &Point3) -> Result<SingleUserSolution> {
    let zeta = single_user_gain(params, &layout, user)?;
    let (power, regime) = optimal_power(zeta, params)?;
    Ok(SingleUserSolution {
        layout,
        power,
        zeta,
        efficiency: se_ee_single(params, zeta, power),
        regime,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_metrics_match_definition() {
        let params = SystemParams::default();
        let user = Point3::ground(6.5, 2.5);
        let sol = solve_single_user(&params, &user).unwrap();
        let e = se_ee_single(&params, sol.zeta, sol.power);
        assert_eq!(e, sol.efficiency);
        assert!(sol.power > 0.0 && sol.power <= params.power_budget);
    }

    #[test]
    fn beats_uniform_layout() {
        let params = SystemParams::default();
        let user = Point3::ground(2.0, 9.0);
        let sol = solve_single_user(&params, &user).unwrap();
        let uniform = PinchLayout::uniform(&params).unwrap();
        let zeta = single_user_gain(&params, &uniform, &user).unwrap();
        let base = se_ee_single(&params, zeta, sol.power).weighted_objective(params.beta);
        assert!(sol.objective(params.beta) >= base);
    }
}
