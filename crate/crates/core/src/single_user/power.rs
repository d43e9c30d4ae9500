//! Closed-form optimal transmit power of the single-user link.
//!
//! With `zeta` fixed by the PA layout, EE is unimodal in `P` with a unique
//! peak `P*`, and the weighted objective's stationarity condition reduces to
//! `g2(P) = 1 - beta` with `g2` strictly decreasing.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Relative bisection tolerance on `P`.
pub const POWER_REL_TOL: f64 = 1e-10;
/// Bisection iteration cap.
pub const POWER_MAX_ITER: usize = 200;
/// Lower end of the power search domain; `ln SE` diverges at zero.
pub const MIN_POWER: f64 = 1e-12;

const MAX_BRACKET_DOUBLINGS: usize = 2000;

/// Which branch of the closed-form solution produced the optimal power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerRegime {
    /// The whole budget `P_T` is spent.
    BudgetLimited,
    /// Interior root `P**` of `g2(P) = 1 - beta`.
    Interior,
}

impl PowerRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            PowerRegime::BudgetLimited => "budget-limited",
            PowerRegime::Interior => "interior",
        }
    }
}

/// Numerator of `dEE/dP`: `zeta (P + P_f) - (1 + zeta P) ln(1 + zeta P)`.
pub fn ee_slope_numerator(zeta: f64, params: &SystemParams, power: f64) -> f64 {
    let rho = zeta * power;
    zeta * (power + params.fixed_circuit_power) - (1.0 + rho) * rho.ln_1p()
}

/// Unique EE-maximizing power `P*`, the root of [`ee_slope_numerator`].
pub fn ee_peak_power(zeta: f64, params: &SystemParams) -> Result<f64> {
    if !(zeta > 0.0 && params.fixed_circuit_power > 0.0) {
        return Err(Error::InvalidParams(format!(
            "ee_peak_power needs zeta > 0 and P_f > 0 (zeta = {zeta})"
        )));
    }
    let g = |p: f64| ee_slope_numerator(zeta, params, p);
    let mut lo = 0.0;
    let mut hi = params.fixed_circuit_power.max(1.0 / zeta);
    let mut doublings = 0;
    while g(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(Error::BracketFailure(format!(
                "no sign change of the EE slope up to P = {hi:e}"
            )));
        }
    }
    Ok(bisect_decreasing(g, lo, hi))
}

/// `g2(P)`, the part of the objective's derivative numerator compared
/// against `1 - beta`. `chi` enters scaled by `1 / ln 2`.
pub fn g2_eval(zeta: f64, params: &SystemParams, power: f64) -> f64 {
    let chi = params.rate_power_coeff / LN_2;
    let log_term = (zeta * power).ln_1p();
    zeta * (power + params.fixed_circuit_power + chi * log_term)
        / ((1.0 + zeta * power + chi * zeta) * log_term)
}

/// The three additive pieces of `g2`: transmit-power, circuit-power and
/// rate-power terms.
pub fn g2_terms(zeta: f64, params: &SystemParams, power: f64) -> [f64; 3] {
    let a = params.rate_power_coeff * zeta / LN_2;
    let log_term = (zeta * power).ln_1p();
    let denom = (1.0 + zeta * power + a) * log_term;
    [
        zeta * power / denom,
        zeta * params.fixed_circuit_power / denom,
        a / (1.0 + zeta * power + a),
    ]
}

/// Whether `A = chi zeta / ln 2 <= 1 + zeta P`, the sufficient condition
/// under which `g2` is provably decreasing at `P`.
pub fn g2_monotone_condition(zeta: f64, params: &SystemParams, power: f64) -> bool {
    params.rate_power_coeff * zeta / LN_2 <= 1.0 + zeta * power
}

/// Optimal transmit power in `(0, P_T]` for the weighted objective
/// `beta ln SE + (1 - beta) ln EE` at gain `zeta`.
pub fn optimal_power(zeta: f64, params: &SystemParams) -> Result<(f64, PowerRegime)> {
    let budget = params.power_budget;
    let beta = params.beta;
    let peak = ee_peak_power(zeta, params)?;
    if budget <= peak {
        return Ok((budget, PowerRegime::BudgetLimited));
    }
    let target = 1.0 - beta;
    if g2_eval(zeta, params, budget) > target {
        return Ok((budget, PowerRegime::BudgetLimited));
    }
    if beta == 0.0 {
        return Ok((peak, PowerRegime::Interior));
    }
    let root = bisect_decreasing(|p| g2_eval(zeta, params, p) - target, peak, budget);
    Ok((root, PowerRegime::Interior))
}

/// Root of a decreasing function with `f(lo) >= 0 >= f(hi)`.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..POWER_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= POWER_REL_TOL * hi {
            return mid;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::se_ee_single;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn objective(zeta: f64, params: &SystemParams, p: f64) -> f64 {
        se_ee_single(params, zeta, p).weighted_objective(params.beta)
    }

    #[test]
    fn peak_is_root_of_slope() {
        let params = SystemParams::default();
        for zeta in [1e3, 1e5, 1e6, 1e8] {
            let peak = ee_peak_power(zeta, &params).unwrap();
            let scaled = ee_slope_numerator(zeta, &params, peak) / (zeta * params.fixed_circuit_power);
            assert!(scaled.abs() < 1e-9, "zeta {zeta}: {scaled}");
        }
    }

    #[test]
    fn g2_is_one_at_peak() {
        let params = SystemParams::default();
        for zeta in [1e2, 1e4, 1e6, 1e9] {
            let peak = ee_peak_power(zeta, &params).unwrap();
            assert!((g2_eval(zeta, &params, peak) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn ee_is_stationary_at_peak() {
        let params = SystemParams::default();
        let zeta = 2.5e5;
        let peak = ee_peak_power(zeta, &params).unwrap();
        let ee = |p: f64| se_ee_single(&params, zeta, p).ee;
        let slope = |p: f64| {
            let h = 1e-6 * p;
            (ee(p + h) - ee(p - h)) / (2.0 * h)
        };
        let scale = ee(peak) / peak;
        assert!(slope(peak).abs() / scale < 1e-6);
        assert!(slope(1.1 * peak) < 0.0);
        assert!(slope(0.9 * peak) > 0.0);
    }

    #[test]
    fn g2_split_matches_direct() {
        let params = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let zeta = 10f64.powf(rng.random_range(2.0..8.0));
            let p = 10f64.powf(rng.random_range(-6.0..1.0));
            let direct = g2_eval(zeta, &params, p);
            let split: f64 = g2_terms(zeta, &params, p).iter().sum();
            assert!((direct - split).abs() <= 1e-12 * direct.abs());
        }
    }

    #[test]
    fn budget_below_peak_spends_budget() {
        let zeta = 1e6;
        let base = SystemParams::default();
        let peak = ee_peak_power(zeta, &base).unwrap();
        for beta in [0.0, 0.3, 1.0] {
            let params = base.with_budget(0.5 * peak).with_beta(beta);
            let (p, regime) = optimal_power(zeta, &params).unwrap();
            assert_eq!(p, 0.5 * peak);
            assert_eq!(regime, PowerRegime::BudgetLimited);
        }
    }

    #[test]
    fn pure_ee_weight_returns_peak() {
        let zeta = 1e6;
        let params = SystemParams::default().with_beta(0.0);
        let peak = ee_peak_power(zeta, &params).unwrap();
        assert!(params.power_budget > peak);
        let (p, regime) = optimal_power(zeta, &params).unwrap();
        assert_eq!(p, peak);
        assert_eq!(regime, PowerRegime::Interior);
        let (p, regime) = optimal_power(zeta, &params.with_beta(1.0)).unwrap();
        assert_eq!(p, params.power_budget);
        assert_eq!(regime, PowerRegime::BudgetLimited);
    }

    #[test]
    fn interior_root_is_objective_maximum() {
        let zeta = 3e5;
        let params = SystemParams::default().with_beta(0.4);
        let (p, regime) = optimal_power(zeta, &params).unwrap();
        assert_eq!(regime, PowerRegime::Interior);
        let f0 = objective(zeta, &params, p);
        for factor in [0.9, 0.99, 1.01, 1.1] {
            assert!(objective(zeta, &params, p * factor) < f0);
        }
    }

    #[test]
    fn rejects_nonpositive_gain() {
        let params = SystemParams::default();
        assert!(matches!(ee_peak_power(0.0, &params), Err(Error::InvalidParams(_))));
    }
}
