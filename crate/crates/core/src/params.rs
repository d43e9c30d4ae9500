//! Physical and power constants of a pinching-antenna deployment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Converts a ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// System constants. Every power is in watts, every length in metres.
///
/// The wavelength, guided wavelength and free-space constant `eta` are derived
/// from the carrier frequency and effective index on demand so they can never
/// drift out of sync with the stored inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub carrier_frequency: f64,
    pub effective_index: f64,
    /// Noise power shared by all users.
    pub noise_power: f64,
    /// Optional per-user noise override; user `k` falls back to
    /// `noise_power` when the vector is shorter than `k + 1`.
    pub noise_powers: Option<Vec<f64>>,
    pub fixed_circuit_power: f64,
    /// Rate-dependent power, W per bit/s/Hz.
    pub rate_power_coeff: f64,
    pub power_budget: f64,
    /// Minimum SINR per user, linear.
    pub sinr_threshold: f64,
    pub min_spacing: f64,
    pub region_x: f64,
    pub region_y: f64,
    pub waveguide_height: f64,
    pub waveguide_count: usize,
    pub pas_per_waveguide: usize,
    pub beta: f64,
}

impl Default for SystemParams {
    /// 28 GHz, four waveguides at 3 m over a 10 m x 10 m hall, -90 dBm noise,
    /// 6 dB QoS, P_f = 0.1 W, chi = 0.1, 30 dBm budget, half-wavelength spacing.
    fn default() -> Self {
        let carrier_frequency = 28e9;
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        Self {
            carrier_frequency,
            effective_index: 1.4,
            noise_power: dbm_to_watts(-90.0),
            noise_powers: None,
            fixed_circuit_power: 0.1,
            rate_power_coeff: 0.1,
            power_budget: dbm_to_watts(30.0),
            sinr_threshold: db_to_linear(6.0),
            min_spacing: wavelength / 2.0,
            region_x: 10.0,
            region_y: 10.0,
            waveguide_height: 3.0,
            waveguide_count: 4,
            pas_per_waveguide: 3,
            beta: 0.5,
        }
    }
}

impl SystemParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn guided_wavelength(&self) -> f64 {
        self.wavelength() / self.effective_index
    }

    /// Free-space constant `c^2 / (16 pi^2 f_c^2)`.
    pub fn eta(&self) -> f64 {
        let pi = std::f64::consts::PI;
        SPEED_OF_LIGHT * SPEED_OF_LIGHT
            / (16.0 * pi * pi * self.carrier_frequency * self.carrier_frequency)
    }

    /// Noise power of user `k`.
    pub fn noise_for(&self, k: usize) -> f64 {
        self.noise_powers
            .as_ref()
            .and_then(|v| v.get(k).copied())
            .unwrap_or(self.noise_power)
    }

    /// y-coordinate of waveguide `m`; waveguides are spread evenly over
    /// `[0, region_y]`. A single waveguide sits on the centre line.
    pub fn waveguide_y(&self, m: usize) -> f64 {
        if self.waveguide_count <= 1 {
            self.region_y / 2.0
        } else {
            self.region_y * m as f64 / (self.waveguide_count - 1) as f64
        }
    }

    /// x-coordinate shared by all feed points.
    pub fn feed_x(&self) -> f64 {
        -self.region_x / 2.0
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self {
            beta,
            ..self.clone()
        }
    }

    pub fn with_budget(&self, power_budget: f64) -> Self {
        Self {
            power_budget,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_frequency", self.carrier_frequency),
            ("effective_index", self.effective_index),
            ("noise_power", self.noise_power),
            ("fixed_circuit_power", self.fixed_circuit_power),
            ("power_budget", self.power_budget),
            ("min_spacing", self.min_spacing),
            ("region_x", self.region_x),
            ("region_y", self.region_y),
            ("waveguide_height", self.waveguide_height),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if !(self.rate_power_coeff.is_finite() && self.rate_power_coeff >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "rate_power_coeff must be non-negative, got {}",
                self.rate_power_coeff
            )));
        }
        if !(self.sinr_threshold.is_finite() && self.sinr_threshold >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "sinr_threshold must be non-negative, got {}",
                self.sinr_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParams(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.waveguide_count == 0 || self.pas_per_waveguide == 0 {
            return Err(Error::InvalidParams(
                "waveguide_count and pas_per_waveguide must be at least 1".into(),
            ));
        }
        if let Some(noise) = &self.noise_powers {
            if noise.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidParams(
                    "per-user noise powers must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}
