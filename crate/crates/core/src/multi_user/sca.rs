//! Successive convex approximation of the power subproblem at a fixed layout.

use serde::{Deserialize, Serialize};

use crate::convex::{hessian_bound, solve_subproblem, SolveStatus, SubproblemSpec};
use crate::error::{Error, Result};
use crate::metrics::{se_ee_multi, Efficiency, PowerAllocation};
use crate::params::SystemParams;

/// Expansion used for `e^{mu2/(1-beta)} kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaylorOrder {
    First,
    Second,
}

impl TaylorOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            TaylorOrder::First => "first",
            TaylorOrder::Second => "second",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaConfig {
    pub order: TaylorOrder,
    /// Stop once the fractional change of the objective drops below this and
    /// the geometric extrapolation of the remaining increase below a tenth
    /// of it.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            order: TaylorOrder::First,
            tol: 1e-6,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaIterate {
    pub objective: f64,
    pub subproblem_objective: f64,
    pub kkt_residual: f64,
    pub newton_steps: usize,
    /// Fraction of the subproblem step that was kept.
    pub step: f64,
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaOutcome {
    pub powers: PowerAllocation,
    pub efficiency: Efficiency,
    pub objective: f64,
    pub transmit_power: f64,
    pub iterations: Vec<ScaIterate>,
    pub converged: bool,
    /// Some iterate lowered the objective by more than `1e-9` even after
    /// backtracking; the best iterate is returned.
    pub non_monotone: bool,
}

/// Objective and transmit power of an allocation.
pub fn evaluate_power(params: &SystemParams, lambda_diag: &[f64], powers: &[f64]) -> (Efficiency, f64, f64) {
    let tr: f64 = lambda_diag.iter().zip(powers).map(|(l, p)| l * p).sum();
    let eff = se_ee_multi(params, &PowerAllocation(powers.to_vec()), tr);
    (eff, eff.weighted_objective(params.beta), tr)
}

fn floors(params: &SystemParams, k: usize) -> Vec<f64> {
    (0..k).map(|i| params.sinr_threshold * params.noise_for(i)).collect()
}

/// Budget-tight start: the QoS floors plus an equal share of the leftover
/// transmit power per user.
pub fn initial_power(params: &SystemParams, lambda_diag: &[f64]) -> Result<Vec<f64>> {
    let k = lambda_diag.len();
    let floor = floors(params, k);
    let used: f64 = lambda_diag.iter().zip(&floor).map(|(l, f)| l * f).sum();
    let spare = params.power_budget - used;
    if spare <= 0.0 {
        return Err(Error::Infeasible(format!(
            "QoS floors need {used:.6e} W, above the budget {:.6e} W",
            params.power_budget
        )));
    }
    Ok(floor
        .iter()
        .zip(lambda_diag)
        .map(|(f, l)| f + spare / (k as f64 * l))
        .collect())
}

fn usable_warm_start(params: &SystemParams, lambda_diag: &[f64], warm: &[f64]) -> bool {
    if warm.len() != lambda_diag.len() {
        return false;
    }
    let floor = floors(params, warm.len());
    let tr: f64 = lambda_diag.iter().zip(warm).map(|(l, p)| l * p).sum();
    tr <= params.power_budget * (1.0 + 1e-12) && warm.iter().zip(&floor).all(|(p, f)| *p >= f * (1.0 - 1e-12))
}

/// Maximise `beta ln SE + (1 - beta) ln EE` over the ZF power coefficients
/// for a fixed `Lambda` diagonal.
///
/// Every iteration re-expands at the current point with tight slacks. A
/// subproblem step that lowers the true objective is shortened by halving.
pub fn sca_power(
    params: &SystemParams,
    lambda_diag: &[f64],
    warm_start: Option<&PowerAllocation>,
    cfg: &ScaConfig,
) -> Result<ScaOutcome> {
    let k = lambda_diag.len();
    if k == 0 || lambda_diag.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidParams("Lambda diagonal must be positive".into()));
    }
    let beta = params.beta;
    let mut p = match warm_start {
        Some(w) if usable_warm_start(params, lambda_diag, w.as_slice()) => w.0.clone(),
        Some(_) => {
            log::debug!("warm start violates the constraints; using the budget-tight start");
            initial_power(params, lambda_diag)?
        }
        None => initial_power(params, lambda_diag)?,
    };
    let noise: Vec<f64> = (0..k).map(|i| params.noise_for(i)).collect();
    let (mut eff, mut f, _) = evaluate_power(params, lambda_diag, &p);
    let mut best = (p.clone(), f);
    let mut iterations = Vec::new();
    let mut converged = false;
    let mut non_monotone = false;
    let mut last_change = f64::NAN;

    for _ in 0..cfg.max_iterations {
        let tr: f64 = lambda_diag.iter().zip(&p).map(|(l, q)| l * q).sum();
        let kappa = tr + params.fixed_circuit_power + params.rate_power_coeff * eff.se;
        let mu2 = if beta < 1.0 { (1.0 - beta) * eff.ee.ln() } else { 0.0 };
        let delta = match cfg.order {
            TaylorOrder::Second if beta < 1.0 => hessian_bound(beta, mu2, kappa),
            _ => 0.0,
        };
        let spec = SubproblemSpec {
            lambda_diag: lambda_diag.to_vec(),
            noise: noise.clone(),
            sinr_threshold: vec![params.sinr_threshold; k],
            power_budget: params.power_budget,
            beta,
            local_power: p.clone(),
            local_mu2: mu2,
            local_kappa: kappa,
            delta,
            fixed_circuit_power: params.fixed_circuit_power,
            rate_power_coeff: params.rate_power_coeff,
        };
        let sol = solve_subproblem(&spec)?;

        let mut step = 1.0;
        let mut candidate = sol.power.clone();
        let (mut cand_eff, mut cand_f, _) = evaluate_power(params, lambda_diag, &candidate);
        while cand_f < f && step > 1e-6 {
            step *= 0.5;
            candidate = p.iter().zip(&sol.power).map(|(a, b)| a + step * (b - a)).collect();
            (cand_eff, cand_f, _) = evaluate_power(params, lambda_diag, &candidate);
        }
        if cand_f < f - 1e-9 * f.abs().max(1.0) {
            non_monotone = true;
            log::warn!("SCA objective fell from {f:.12} to {cand_f:.12}");
        }
        iterations.push(ScaIterate {
            objective: cand_f,
            subproblem_objective: sol.objective,
            kkt_residual: sol.kkt_residual,
            newton_steps: sol.newton_steps,
            step,
            stalled: sol.status == SolveStatus::Stalled,
        });
        let change = (cand_f - f) / f.abs().max(1.0);
        p = candidate;
        eff = cand_eff;
        f = cand_f;
        if f > best.1 {
            best = (p.clone(), f);
        }
        let rate = if last_change > 0.0 && change > 0.0 {
            (change / last_change).min(0.999)
        } else {
            0.0
        };
        last_change = change;
        if change.abs() < cfg.tol && change.max(0.0) * rate / (1.0 - rate) < 0.1 * cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("SCA hit {} iterations without converging", cfg.max_iterations);
    }

    let (efficiency, objective, transmit_power) = evaluate_power(params, lambda_diag, &best.0);
    Ok(ScaOutcome {
        powers: PowerAllocation(best.0),
        efficiency,
        objective,
        transmit_power,
        iterations,
        converged,
        non_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64) -> SystemParams {
        SystemParams::default().with_beta(beta)
    }

    const LAMBDA: [f64; 3] = [2.0e7, 5.0e7, 1.1e8];

    #[test]
    fn start_is_budget_tight_and_qos_feasible() {
        let p = params(0.5);
        let start = initial_power(&p, &LAMBDA).unwrap();
        let tr: f64 = LAMBDA.iter().zip(&start).map(|(l, q)| l * q).sum();
        assert!((tr - p.power_budget).abs() < 1e-12);
        assert!(start.iter().enumerate().all(|(k, q)| *q >= p.sinr_threshold * p.noise_for(k)));
    }

    #[test]
    fn objective_never_decreases() {
        for beta in [0.0, 0.3, 0.5, 0.9, 1.0] {
            for order in [TaylorOrder::First, TaylorOrder::Second] {
                let cfg = ScaConfig { order, ..ScaConfig::default() };
                let out = sca_power(&params(beta), &LAMBDA, None, &cfg).unwrap();
                assert!(!out.non_monotone);
                assert!(out.converged, "beta {beta} {order:?}");
                let mut prev = f64::NEG_INFINITY;
                for it in &out.iterations {
                    assert!(it.objective >= prev - 1e-9);
                    prev = it.objective;
                }
                assert!(out.transmit_power <= params(beta).power_budget * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn orders_agree() {
        for beta in [0.0, 0.25, 0.5, 0.75] {
            let first = sca_power(&params(beta), &LAMBDA, None, &ScaConfig {
                order: TaylorOrder::First,
                ..ScaConfig::default()
            })
            .unwrap();
            let second = sca_power(&params(beta), &LAMBDA, None, &ScaConfig {
                order: TaylorOrder::Second,
                ..ScaConfig::default()
            })
            .unwrap();
            let gap = (first.objective - second.objective).abs() / first.objective.abs().max(1.0);
            assert!(gap < 1e-6, "beta {beta}: {} vs {}", first.objective, second.objective);
        }
    }

    #[test]
    fn se_only_uses_whole_budget() {
        let out = sca_power(&params(1.0), &LAMBDA, None, &ScaConfig::default()).unwrap();
        assert!((out.transmit_power - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_floors_are_reported() {
        let mut p = params(0.5);
        p.power_budget = 1e-9;
        assert!(matches!(initial_power(&p, &LAMBDA), Err(Error::Infeasible(_))));
    }
}
