//! Element-wise particle swarm placement: one PA at a time, every other PA
//! fixed, minimising the transmit power needed by ZF at fixed `P`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace::{penalized, waveguide_columns, TraceEvaluator};
use super::zf::{gram_inverse, transmit_power};
use crate::channel::{build_channels, pa_contribution};
use crate::error::{Error, Result};
use crate::layout::{PinchLayout, UserSet};
use crate::metrics::PowerAllocation;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Weight of the squared budget excess.
    pub penalty: f64,
    /// Sweeps stop once the fractional decrease of the transmit power is
    /// below this.
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    /// Stop a swarm after this many iterations without improving its best;
    /// zero disables the check.
    pub stall_iterations: usize,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            particles: 30,
            iterations: 300,
            inertia: 0.7298,
            cognitive: 1.4962,
            social: 1.4962,
            penalty: 1e4,
            sweep_tol: 1e-6,
            max_sweeps: 20,
            stall_iterations: 0,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.iterations == 0 || self.max_sweeps == 0 {
            return Err(Error::InvalidParams("PSO needs particles, iterations and sweeps".into()));
        }
        if !(self.penalty >= 0.0 && self.sweep_tol >= 0.0) {
            return Err(Error::InvalidParams("PSO penalty and tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoOutcome {
    pub layout: PinchLayout,
    /// Transmit power before the first sweep and after each sweep.
    pub sweep_traces: Vec<f64>,
    pub evaluations: usize,
    /// The last sweep broke the budget and was undone.
    pub reverted: bool,
}

impl PsoOutcome {
    pub fn transmit_power(&self) -> f64 {
        *self.sweep_traces.last().unwrap()
    }
}

/// Minimum of `cost` over `[lo, hi]` found by a swarm seeded with
/// `incumbent`. Returns the point, its cost and the number of evaluations.
pub fn minimize_interval<F, R>(mut cost: F, lo: f64, hi: f64, incumbent: f64, cfg: &PsoConfig, rng: &mut R) -> (f64, f64, usize)
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let width = hi - lo;
    if width <= 0.0 {
        let x = incumbent.clamp(lo.min(hi), hi.max(lo));
        return (x, cost(x), 1);
    }
    let vmax = 0.5 * width;
    let n = cfg.particles;
    let mut x: Vec<f64> = (0..n)
        .map(|i| if i == 0 { incumbent.clamp(lo, hi) } else { rng.random_range(lo..=hi) })
        .collect();
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..=0.1) * width).collect();
    let mut best_x = x.clone();
    let mut best_f: Vec<f64> = x.iter().map(|&xi| cost(xi)).collect();
    let mut evals = n;
    let mut g = argmin(&best_f);
    let mut stall = 0;

    for _ in 0..cfg.iterations {
        let before = best_f[g];
        for i in 0..n {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let vi = cfg.inertia * v[i] + cfg.cognitive * r1 * (best_x[i] - x[i]) + cfg.social * r2 * (best_x[g] - x[i]);
            let mut vi = vi.clamp(-vmax, vmax);
            let mut xi = x[i] + vi;
            if xi > hi {
                xi = 2.0 * hi - xi;
                vi = -vi;
            } else if xi < lo {
                xi = 2.0 * lo - xi;
                vi = -vi;
            }
            xi = xi.clamp(lo, hi);
            x[i] = xi;
            v[i] = vi;
            let fi = cost(xi);
            evals += 1;
            if fi < best_f[i] {
                best_f[i] = fi;
                best_x[i] = xi;
            }
        }
        g = argmin(&best_f);
        if cfg.stall_iterations > 0 {
            if best_f[g] < before {
                stall = 0;
            } else {
                stall += 1;
                if stall >= cfg.stall_iterations {
                    break;
                }
            }
        }
    }
    (best_x[g], best_f[g], evals)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Feasible interval for PA `(m, n)`: the minimum spacing from both
/// neighbours, inside `[0, D_x]`.
pub fn feasible_interval(params: &SystemParams, layout: &PinchLayout, m: usize, n: usize) -> Result<(f64, f64)> {
    let col = layout.column(m);
    let lo = if n == 0 { 0.0 } else { col[n - 1] + params.min_spacing };
    let hi = if n + 1 == col.len() { params.region_x } else { col[n + 1] - params.min_spacing };
    let lo = lo.max(0.0);
    let hi = hi.min(params.region_x);
    if lo > hi + 1e-12 {
        return Err(Error::EmptyFeasibleRange {
            waveguide: m,
            index: n,
            lo,
            hi,
        });
    }
    Ok((lo, hi.max(lo)))
}

/// Exact transmit power of a layout at fixed `P`.
pub fn layout_transmit_power(
    params: &SystemParams,
    layout: &PinchLayout,
    users: &UserSet,
    powers: &PowerAllocation,
) -> Result<f64> {
    let channels = build_channels(layout, params, users)?;
    let (lambda, _) = gram_inverse(&channels.psi)?;
    Ok(transmit_power(&super::zf::lambda_diag(&lambda), powers))
}

fn stream_id(sweep: usize, m: usize, n: usize) -> u64 {
    ((sweep as u64) << 32) | ((m as u64) << 16) | n as u64
}

/// Sweeps over every PA, replacing each by the swarm's best coordinate when
/// that strictly lowers the penalised transmit power.
pub fn pso_optimize_pa(
    params: &SystemParams,
    layout: &PinchLayout,
    users: &UserSet,
    powers: &PowerAllocation,
    cfg: &PsoConfig,
) -> Result<PsoOutcome> {
    cfg.validate()?;
    let budget = params.power_budget;
    let start = layout_transmit_power(params, layout, users, powers)?;
    let mut current = layout.clone();
    let mut traces = vec![start];
    let mut evaluations = 0;
    let mut reverted = false;
    let p = powers.as_slice();

    for sweep in 0..cfg.max_sweeps {
        let sweep_start = current.clone();
        let channels = build_channels(&current, params, users)?;
        let mut columns = waveguide_columns(&channels);
        for m in 0..current.waveguides() {
            for n in 0..current.pas_per_waveguide() {
                let (lo, hi) = feasible_interval(params, &current, m, n)?;
                let x_old = current.x(m, n);
                let partial: DVector<Complex64> = DVector::from_iterator(
                    users.len(),
                    users
                        .iter()
                        .enumerate()
                        .map(|(k, u)| columns[m][k] - pa_contribution(params, &current, u, m, x_old)),
                );
                let evaluator = TraceEvaluator::new(&columns, m, p);
                let candidate = |x: f64| -> DVector<Complex64> {
                    DVector::from_iterator(
                        users.len(),
                        users
                            .iter()
                            .enumerate()
                            .map(|(k, u)| partial[k] + pa_contribution(params, &current, u, m, x)),
                    )
                };
                let cost = |x: f64| {
                    let tr = evaluator.trace(&candidate(x));
                    if tr.is_finite() && tr > 0.0 {
                        penalized(tr, budget, cfg.penalty)
                    } else {
                        f64::INFINITY
                    }
                };
                let incumbent = cost(x_old);
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(stream_id(sweep, m, n));
                let (x_new, f_new, evals) = minimize_interval(cost, lo, hi, x_old, cfg, &mut rng);
                evaluations += evals + 1;
                if f_new < incumbent && x_new != x_old {
                    columns[m] = candidate(x_new);
                    current = current.with_position(params, m, n, x_new)?;
                }
            }
        }
        let tr = layout_transmit_power(params, &current, users, powers)?;
        if tr > budget * (1.0 + 1e-12) {
            log::warn!("PSO sweep {sweep} left the budget ({tr:.6e} W); reverting");
            current = sweep_start;
            reverted = true;
            break;
        }
        let prev = *traces.last().unwrap();
        traces.push(tr);
        if (prev - tr) / prev.abs().max(f64::MIN_POSITIVE) < cfg.sweep_tol {
            break;
        }
    }

    Ok(PsoOutcome {
        layout: current,
        sweep_traces: traces,
        evaluations,
        reverted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_user::sca::initial_power;

    #[test]
    fn swarm_finds_parabola_minimum() {
        let cfg = PsoConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, f, _) = minimize_interval(|x| (x - 0.37).powi(2), -1.0, 2.0, 1.9, &cfg, &mut rng);
        assert!((x - 0.37).abs() < 1e-6);
        assert!(f < 1e-12);
    }

    #[test]
    fn swarm_keeps_incumbent_when_best() {
        let cfg = PsoConfig {
            iterations: 5,
            ..PsoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, _, _) = minimize_interval(|x| (x - 1.0).abs(), 0.0, 1.0, 1.0, &cfg, &mut rng);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn interval_respects_neighbours() {
        let params = SystemParams::default();
        let layout = PinchLayout::uniform(&params).unwrap();
        let (lo, hi) = feasible_interval(&params, &layout, 0, 1).unwrap();
        assert!((lo - (layout.x(0, 0) + params.min_spacing)).abs() < 1e-12);
        assert!((hi - (layout.x(0, 2) - params.min_spacing)).abs() < 1e-12);
        let (lo, _) = feasible_interval(&params, &layout, 0, 0).unwrap();
        assert_eq!(lo, 0.0);
    }

    #[test]
    fn placement_lowers_transmit_power() {
        let params = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let users = UserSet::uniform(&params, 3, &mut rng);
        let layout = PinchLayout::uniform(&params).unwrap();
        let channels = build_channels(&layout, &params, &users).unwrap();
        let (lambda, _) = gram_inverse(&channels.psi).unwrap();
        let powers = PowerAllocation(initial_power(&params, &super::super::zf::lambda_diag(&lambda)).unwrap());
        let cfg = PsoConfig {
            iterations: 60,
            max_sweeps: 3,
            ..PsoConfig::default()
        };
        let out = pso_optimize_pa(&params, &layout, &users, &powers, &cfg).unwrap();
        assert!(!out.reverted);
        assert!(out.transmit_power() < out.sweep_traces[0]);
        for w in out.sweep_traces.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let exact = layout_transmit_power(&params, &out.layout, &users, &powers).unwrap();
        assert!((exact - out.transmit_power()).abs() <= 1e-9 * exact);
        let again = pso_optimize_pa(&params, &layout, &users, &powers, &cfg).unwrap();
        assert_eq!(again.layout, out.layout);
    }
}
