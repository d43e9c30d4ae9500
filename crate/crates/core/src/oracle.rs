//! Brute-force references for the fast solvers. Slow on purpose, and written
//! from the model definitions rather than from the routines they check.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::convex::SubproblemSpec;
use crate::error::{Error, Result};
use crate::single_user::{IcrContext, RefineDirection};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
}

/// One oracle-versus-fast-path comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub fast: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: Tolerance,
    pub seed: Option<u64>,
    pub passed: bool,
}

impl OracleReport {
    pub fn compare(quantity: impl Into<String>, oracle: f64, fast: f64, tolerance: Tolerance, seed: Option<u64>) -> Self {
        let abs_error = (oracle - fast).abs();
        let rel_error = if oracle != 0.0 { abs_error / oracle.abs() } else { abs_error };
        let passed = match tolerance {
            Tolerance::Absolute(t) => abs_error <= t,
            Tolerance::Relative(t) => rel_error <= t,
        };
        Self {
            quantity: quantity.into(),
            oracle,
            fast,
            abs_error,
            rel_error,
            tolerance,
            seed,
            passed,
        }
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, tol) = match self.tolerance {
            Tolerance::Absolute(t) => ("abs", t),
            Tolerance::Relative(t) => ("rel", t),
        };
        write!(
            f,
            "{} {}: oracle {:.12e} fast {:.12e} abs {:.3e} rel {:.3e} ({kind} tol {tol:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.quantity,
            self.oracle,
            self.fast,
            self.abs_error,
            self.rel_error
        )?;
        if let Some(seed) = self.seed {
            write!(f, " seed {seed}")?;
        }
        Ok(())
    }
}

/// Single-user weighted objective written out from the rate and power
/// model.
fn single_user_objective(zeta: f64, params: &SystemParams, p: f64) -> f64 {
    let rate = (1.0 + zeta * p).log2();
    let consumed = p + params.fixed_circuit_power + params.rate_power_coeff * rate;
    let beta = params.beta;
    let mut value = 0.0;
    if beta > 0.0 {
        value += beta * rate.ln();
    }
    if beta < 1.0 {
        value += (1.0 - beta) * (rate / consumed).ln();
    }
    value
}

/// Best point of the single-user objective on the grid
/// `P_T i / grid_size`, `i = 1..=grid_size`.
pub fn grid_power_oracle(zeta: f64, params: &SystemParams, grid_size: usize) -> f64 {
    let step = params.power_budget / grid_size as f64;
    let mut best = (step, f64::NEG_INFINITY);
    for i in 1..=grid_size {
        let p = step * i as f64;
        let v = single_user_objective(zeta, params, p);
        if v >= best.1 {
            best = (p, v);
        }
    }
    best.0
}

/// Number of strict local maxima of the single-user objective on the same
/// grid as [`grid_power_oracle`].
pub fn grid_local_maxima(zeta: f64, params: &SystemParams, grid_size: usize) -> usize {
    let step = params.power_budget / grid_size as f64;
    let values: Vec<f64> = (1..=grid_size)
        .map(|i| single_user_objective(zeta, params, step * i as f64))
        .collect();
    (0..values.len())
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i + 1 == values.len() || values[i] >= values[i + 1];
            left && right
        })
        .count()
}

/// Received phase of a PA at `(x, y, h)`: free-space path plus the guided
/// path from the feed.
fn received_phase(params: &SystemParams, x: f64, y: f64, ctx: &IcrContext) -> f64 {
    let u = ctx.user;
    let h = params.waveguide_height;
    let d = ((x - u.x).powi(2) + (y - u.y).powi(2) + (h - u.z).powi(2)).sqrt();
    let lambda = 299_792_458.0 / params.carrier_frequency;
    let guided = lambda / params.effective_index;
    let feed = -params.region_x / 2.0;
    2.0 * PI * d / lambda + 2.0 * PI * (x - feed) / guided
}

/// Phase gap at offset `delta`, growing with `delta`.
fn scan_gap(params: &SystemParams, ctx: &IcrContext, delta: f64) -> f64 {
    let anchor = received_phase(params, ctx.anchor.x, ctx.anchor.y, ctx);
    match ctx.direction {
        RefineDirection::NegativeX => anchor - received_phase(params, ctx.base_x - delta, ctx.waveguide_y, ctx),
        _ => received_phase(params, ctx.base_x + delta, ctx.waveguide_y, ctx) - anchor,
    }
}

/// Smallest offset in `[0, range]` at which the phase gap equals an allowed
/// multiple of `2 pi` (positive on the same waveguide, any across
/// waveguides). Scans with `step`, then polishes the bracket by bisection.
pub fn phase_scan_oracle(ctx: &IcrContext, params: &SystemParams, step: f64, range: f64) -> Result<f64> {
    let lambda = 299_792_458.0 / params.carrier_frequency;
    if !(step > 0.0 && step <= lambda / 100.0) {
        return Err(Error::InvalidParams(format!("scan step {step} must be in (0, lambda/100]")));
    }
    let allowed = |k: f64| ctx.direction == RefineDirection::CrossWaveguide || k >= 1.0;
    let two_pi = 2.0 * PI;
    let g0 = scan_gap(params, ctx, 0.0);
    let k0 = (g0 / two_pi).round();
    if allowed(k0) && (g0 - k0 * two_pi).abs() <= 1e-9 * two_pi {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut g_lo = g0;
    let steps = (range / step).ceil() as usize;
    for i in 1..=steps {
        let hi = (i as f64 * step).min(range);
        let g_hi = scan_gap(params, ctx, hi);
        let (a, b) = if g_lo <= g_hi { (g_lo, g_hi) } else { (g_hi, g_lo) };
        let first = (a / two_pi).floor() as i64 + 1;
        let last = (b / two_pi).floor() as i64;
        let target = (first..=last)
            .map(|k| k as f64)
            .find(|&k| allowed(k) && k * two_pi > a && k * two_pi <= b);
        if let Some(k) = target {
            let f = |d: f64| scan_gap(params, ctx, d) - k * two_pi;
            let (mut l, mut r) = (lo, hi);
            let mut fl = f(l);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                let fm = f(mid);
                if fm == 0.0 {
                    return Ok(mid);
                }
                if (fm < 0.0) == (fl < 0.0) {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
                if r - l <= 1e-15 * r.max(1.0) {
                    break;
                }
            }
            return Ok(0.5 * (l + r));
        }
        lo = hi;
        g_lo = g_hi;
    }
    Err(Error::NoZeroInRange)
}

/// Alignment residual at `delta` wrapped into `(-pi, pi]`.
pub fn phase_residual(ctx: &IcrContext, params: &SystemParams, delta: f64) -> f64 {
    let g = scan_gap(params, ctx, delta);
    let r = g.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Inverse of a Hermitian positive definite matrix by Gauss-Jordan
/// elimination with partial pivoting.
fn gauss_jordan_inverse(a: &[Vec<Complex64>]) -> Option<Vec<Vec<Complex64>>> {
    let n = a.len();
    let scale = a.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    let mut m: Vec<Vec<Complex64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))?;
        if m[pivot][col].norm() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let factor = m[row][col];
                if factor != Complex64::new(0.0, 0.0) {
                    for j in 0..2 * n {
                        let sub = factor * m[col][j];
                        m[row][j] -= sub;
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `tr((Psi^H Psi)^-1 P)` by explicit Gram matrix and dense inversion.
pub fn direct_trace_oracle(psi: &DMatrix<Complex64>, powers: &[f64]) -> Result<f64> {
    let (rows, cols) = psi.shape();
    if powers.len() != cols {
        return Err(Error::InvalidParams("one power per column of Psi".into()));
    }
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); cols]; cols];
    for i in 0..cols {
        for j in 0..cols {
            gram[i][j] = (0..rows).map(|r| psi[(r, i)].conj() * psi[(r, j)]).sum();
        }
    }
    let inv = gauss_jordan_inverse(&gram).ok_or(Error::RankDeficient { ratio: 0.0 })?;
    Ok((0..cols).map(|k| inv[k][k].re * powers[k]).sum())
}

/// Empirical SINR of every user from `trials` symbol and noise draws.
///
/// The received sample of user `k` is `h_k^H G W s + n_k`, with unit-power
/// circular Gaussian symbols and noise of power `noise[k]`; the desired,
/// interfering and noise parts are accumulated separately.
pub fn sinr_simulation_oracle(
    channels: &ChannelState,
    w: &DMatrix<Complex64>,
    noise: &[f64],
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    let users = channels.h.ncols();
    let streams = w.ncols();
    let gw = &channels.g * w;
    let mut coeff = vec![vec![Complex64::new(0.0, 0.0); streams]; users];
    for k in 0..users {
        for j in 0..streams {
            coeff[k][j] = (0..channels.h.nrows()).map(|i| channels.h[(i, k)].conj() * gw[(i, j)]).sum();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    let mut desired = vec![0.0; users];
    let mut interference = vec![0.0; users];
    let mut noise_acc = vec![0.0; users];
    for _ in 0..trials {
        let s: Vec<Complex64> = (0..streams).map(|_| gauss()).collect();
        for k in 0..users {
            let own = if k < streams { coeff[k][k] * s[k] } else { Complex64::new(0.0, 0.0) };
            let others: Complex64 = (0..streams).filter(|&j| j != k).map(|j| coeff[k][j] * s[j]).sum();
            let n = gauss() * noise[k].sqrt();
            desired[k] += own.norm_sqr();
            interference[k] += others.norm_sqr();
            noise_acc[k] += n.norm_sqr();
        }
    }
    (0..users)
        .map(|k| desired[k] / (interference[k] + noise_acc[k]))
        .collect()
}

/// Best value of a two-user convex subproblem found by a zoomed grid over
/// the power triangle, with every slack set to its best value in closed
/// form for the gridded powers.
pub fn subproblem_grid_oracle(spec: &SubproblemSpec, grid: usize, zooms: usize) -> Result<(f64, Vec<f64>)> {
    if spec.lambda_diag.len() != 2 {
        return Err(Error::InvalidParams("the grid oracle handles two users".into()));
    }
    let l = &spec.lambda_diag;
    let floor: Vec<f64> = (0..2).map(|k| spec.sinr_threshold[k] * spec.noise[k]).collect();
    let spare = spec.power_budget - l[0] * floor[0] - l[1] * floor[1];
    if spare <= 0.0 {
        return Err(Error::Infeasible("floors exceed the budget".into()));
    }
    let powers = |u: f64, v: f64| {
        let p0 = floor[0] + u * spare / l[0];
        let p1 = floor[1] + v * (1.0 - u) * spare / l[1];
        [p0, p1]
    };
    let value = |p: [f64; 2]| subproblem_value(spec, &p);

    let (mut u_lo, mut u_hi, mut v_lo, mut v_hi) = (0.0, 1.0, 0.0, 1.0);
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0], 0.0, 0.0);
    for _ in 0..=zooms {
        for i in 0..=grid {
            let u = u_lo + (u_hi - u_lo) * i as f64 / grid as f64;
            for j in 0..=grid {
                let v = v_lo + (v_hi - v_lo) * j as f64 / grid as f64;
                let p = powers(u, v);
                let f = value(p);
                if f > best.0 {
                    best = (f, p, u, v);
                }
            }
        }
        let du = 2.0 * (u_hi - u_lo) / grid as f64;
        let dv = 2.0 * (v_hi - v_lo) / grid as f64;
        u_lo = (best.2 - du).max(0.0);
        u_hi = (best.2 + du).min(1.0);
        v_lo = (best.3 - dv).max(0.0);
        v_hi = (best.3 + dv).min(1.0);
    }
    if !best.0.is_finite() {
        return Err(Error::Infeasible("no grid point admits the slack constraints".into()));
    }
    Ok((best.0, best.1.to_vec()))
}

/// Subproblem objective at fixed powers with the slacks eliminated.
fn subproblem_value(spec: &SubproblemSpec, p: &[f64]) -> f64 {
    let beta = spec.beta;
    let rate: f64 = p
        .iter()
        .zip(&spec.noise)
        .map(|(pk, n)| (1.0 + pk / n).log2())
        .sum();
    let mut value = 0.0;
    if beta > 0.0 {
        value += beta * rate.ln();
    }
    if beta < 1.0 {
        let transmit: f64 = p.iter().zip(&spec.lambda_diag).map(|(pk, l)| pk * l).sum();
        let rate_bound: f64 = p
            .iter()
            .zip(&spec.local_power)
            .zip(&spec.noise)
            .map(|((pk, pl), n)| (1.0 + pl / n).log2() + (pk - pl) / ((n + pl) * std::f64::consts::LN_2))
            .sum();
        let cost = transmit + spec.fixed_circuit_power + spec.rate_power_coeff * rate_bound;
        let w = 1.0 / (1.0 - beta);
        let growth = (spec.local_mu2 * w).exp();
        let a = growth * spec.local_kappa * w;
        let b = growth;
        let d = spec.delta;
        let kappa = if d > 0.0 { cost.max(spec.local_kappa - b / d) } else { cost };
        let dk = kappa - spec.local_kappa;
        let c = growth * spec.local_kappa + b * dk + 0.5 * d * dk * dk - rate;
        let x = if d > 0.0 {
            let disc = a * a - 2.0 * d * c;
            if disc < 0.0 {
                return f64::NEG_INFINITY;
            }
            (-a + disc.sqrt()) / d
        } else {
            -c / a
        };
        value += spec.local_mu2 + x;
    }
    value
}
