//! Spectral/energy efficiency evaluation shared by both designs.

use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{build_channels, ChannelState};
use crate::error::Result;
use crate::layout::{PinchLayout, Point3, UserSet};
use crate::params::SystemParams;

/// A (SE, EE) pair in bit/s/Hz and bit/s/Hz/W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub se: f64,
    pub ee: f64,
}

impl Efficiency {
    /// `beta ln SE + (1 - beta) ln EE`. A zero weight drops its term, so
    /// the endpoints stay finite even when the other metric vanishes.
    pub fn weighted_objective(&self, beta: f64) -> f64 {
        let mut value = 0.0;
        if beta > 0.0 {
            value += beta * self.se.ln();
        }
        if beta < 1.0 {
            value += (1.0 - beta) * self.ee.ln();
        }
        value
    }
}

/// Per-user ZF power coefficients `P = diag(P_1, ..., P_K)`, in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation(pub Vec<f64>);

impl PowerAllocation {
    pub fn uniform(users: usize, power: f64) -> Self {
        Self(vec![power; users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|p| p * factor).collect())
    }
}

/// Normalized beamforming gain `zeta = ||h^H G||^2 / sigma^2` of a single user.
pub fn snr_gain(channels: &ChannelState, params: &SystemParams) -> f64 {
    channels.psi.column(0).norm_squared() / params.noise_for(0)
}

/// `zeta` for a layout and single user, building the channel on the way.
pub fn single_user_gain(params: &SystemParams, layout: &PinchLayout, user: &Point3) -> Result<f64> {
    let users = UserSet::new(vec![*user])?;
    Ok(snr_gain(&build_channels(layout, params, &users)?, params))
}

/// Received SNR under MRT at transmit power `power`.
pub fn snr_single(params: &SystemParams, layout: &PinchLayout, user: &Point3, power: f64) -> Result<f64> {
    Ok(power * single_user_gain(params, layout, user)?)
}

/// Unit-norm MRT direction scaled to power `power`: `sqrt(P) (h^H G)^H / ||h^H G||`.
pub fn mrt_beamformer(channels: &ChannelState, power: f64) -> DVector<Complex64> {
    let dir = channels.psi.column(0).into_owned();
    let norm = dir.norm();
    dir * Complex64::new(power.sqrt() / norm, 0.0)
}

/// SE and EE of a single user at beamforming gain `zeta` and power `power`.
pub fn se_ee_single(params: &SystemParams, zeta: f64, power: f64) -> Efficiency {
    let se = (zeta * power).ln_1p() / LN_2;
    let ee = se / (power + params.fixed_circuit_power + params.rate_power_coeff * se);
    Efficiency { se, ee }
}

/// SE and EE of the ZF multi-user link. Under ZF the SINR of user `k` is
/// `P_k / sigma_k^2`; `transmit_power` is `tr(Lambda P)`.
pub fn se_ee_multi(params: &SystemParams, powers: &PowerAllocation, transmit_power: f64) -> Efficiency {
    let se: f64 = powers
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, p)| (p / params.noise_for(k)).ln_1p() / LN_2)
        .sum();
    let ee = se / (transmit_power + params.fixed_circuit_power + params.rate_power_coeff * se);
    Efficiency { se, ee }
}
