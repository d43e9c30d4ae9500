//! Transmit power `tr((Psi^H Psi)^-1 P)` when a single waveguide's column
//! changes, via a rank-one update of the fixed remainder.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelState;

/// Below this ratio of extreme Cholesky pivots the remainder is treated as
/// singular and the evaluator inverts the full Gram matrix instead.
const PIVOT_RATIO_TOL: f64 = 1e-12;

/// `a_m`, the coefficients of waveguide `m` towards every user, so that
/// `Psi^H Psi = sum_m a_m a_m^H`.
pub fn waveguide_columns(channels: &ChannelState) -> Vec<DVector<Complex64>> {
    (0..channels.waveguides()).map(|m| channels.column_vector(m)).collect()
}

#[derive(Debug, Clone)]
enum Mode {
    RankOne {
        b_inv: DMatrix<Complex64>,
        base: f64,
    },
    Direct {
        rest: DMatrix<Complex64>,
    },
}

/// Evaluates the transmit power for candidate columns `a_m` of one waveguide
/// with every other column held fixed. Built once per waveguide and reused
/// for all candidates.
#[derive(Debug, Clone)]
pub struct TraceEvaluator {
    mode: Mode,
    powers: Vec<f64>,
}

impl TraceEvaluator {
    pub fn new(columns: &[DVector<Complex64>], m: usize, powers: &[f64]) -> Self {
        let k = powers.len();
        let mut rest = DMatrix::<Complex64>::zeros(k, k);
        for (i, a) in columns.iter().enumerate() {
            if i != m {
                rest += a * a.adjoint();
            }
        }
        let mode = if columns.len() > k {
            match rest.clone().cholesky() {
                Some(ch) if pivot_ratio(ch.l_dirty()) >= PIVOT_RATIO_TOL => {
                    let b_inv = ch.inverse();
                    let base = (0..k).map(|i| b_inv[(i, i)].re * powers[i]).sum();
                    Mode::RankOne { b_inv, base }
                }
                _ => {
                    log::debug!("remainder of waveguide {m} is singular; inverting directly");
                    Mode::Direct { rest }
                }
            }
        } else {
            Mode::Direct { rest }
        };
        Self {
            mode,
            powers: powers.to_vec(),
        }
    }

    pub fn uses_rank_one_update(&self) -> bool {
        matches!(self.mode, Mode::RankOne { .. })
    }

    /// Transmit power with column `a` in place of `a_m`; infinite if the
    /// resulting Gram matrix is singular.
    pub fn trace(&self, a: &DVector<Complex64>) -> f64 {
        match &self.mode {
            Mode::RankOne { b_inv, base } => {
                let v = b_inv * a;
                let denom = 1.0 + a.dotc(&v).re;
                let correction: f64 = v
                    .iter()
                    .zip(&self.powers)
                    .map(|(vk, p)| p * vk.norm_sqr())
                    .sum();
                base - correction / denom
            }
            Mode::Direct { rest } => {
                let gram = rest + a * a.adjoint();
                match gram.cholesky() {
                    Some(ch) => {
                        let inv = ch.inverse();
                        (0..self.powers.len()).map(|i| inv[(i, i)].re * self.powers[i]).sum()
                    }
                    None => f64::INFINITY,
                }
            }
        }
    }
}

fn pivot_ratio(l: &DMatrix<Complex64>) -> f64 {
    let d: Vec<f64> = l.diagonal().iter().map(|c| c.norm_sqr()).collect();
    let max = d.iter().copied().fold(0.0, f64::max);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// Transmit power with column `m` replaced by `candidate`.
pub fn trace_objective_sm(
    columns: &[DVector<Complex64>],
    m: usize,
    candidate: &DVector<Complex64>,
    powers: &[f64],
) -> f64 {
    TraceEvaluator::new(columns, m, powers).trace(candidate)
}

/// Transmit power plus the quadratic exterior penalty on the budget.
pub fn penalized(trace: f64, budget: f64, tau: f64) -> f64 {
    let excess = (trace - budget).max(0.0);
    trace + tau * excess * excess
}
