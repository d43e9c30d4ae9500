//! Scenario files. TOML, unknown keys rejected, powers in dBm and the SINR
//! threshold in dB; everything is converted to SI before reaching the core.

use std::path::{Path, PathBuf};

use pass_core::multi_user::{BcdConfig, PsoConfig, ScaConfig, TaylorOrder};
use pass_core::params::{db_to_linear, dbm_to_watts};
use pass_core::{Point3, SystemParams, UserSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Multi,
}

/// Physical parameters as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub carrier_frequency_hz: f64,
    pub effective_index: f64,
    pub noise_power_dbm: f64,
    pub noise_powers_dbm: Option<Vec<f64>>,
    pub fixed_circuit_power_dbm: f64,
    pub rate_power_coeff: f64,
    pub power_budget_dbm: f64,
    pub sinr_threshold_db: f64,
    /// Defaults to half a wavelength.
    pub min_spacing_m: Option<f64>,
    pub region_x_m: f64,
    pub region_y_m: f64,
    pub waveguide_height_m: f64,
    pub waveguides: usize,
    pub pas_per_waveguide: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            carrier_frequency_hz: p.carrier_frequency,
            effective_index: p.effective_index,
            noise_power_dbm: -90.0,
            noise_powers_dbm: None,
            fixed_circuit_power_dbm: 20.0,
            rate_power_coeff: p.rate_power_coeff,
            power_budget_dbm: 30.0,
            sinr_threshold_db: 6.0,
            min_spacing_m: None,
            region_x_m: p.region_x,
            region_y_m: p.region_y,
            waveguide_height_m: p.waveguide_height,
            waveguides: p.waveguide_count,
            pas_per_waveguide: p.pas_per_waveguide,
        }
    }
}

impl SystemSection {
    pub fn to_params(&self) -> SystemParams {
        let lambda = pass_core::params::SPEED_OF_LIGHT / self.carrier_frequency_hz;
        SystemParams {
            carrier_frequency: self.carrier_frequency_hz,
            effective_index: self.effective_index,
            noise_power: dbm_to_watts(self.noise_power_dbm),
            noise_powers: self
                .noise_powers_dbm
                .as_ref()
                .map(|v| v.iter().map(|d| dbm_to_watts(*d)).collect()),
            fixed_circuit_power: dbm_to_watts(self.fixed_circuit_power_dbm),
            rate_power_coeff: self.rate_power_coeff,
            power_budget: dbm_to_watts(self.power_budget_dbm),
            sinr_threshold: db_to_linear(self.sinr_threshold_db),
            min_spacing: self.min_spacing_m.unwrap_or(lambda / 2.0),
            region_x: self.region_x_m,
            region_y: self.region_y_m,
            waveguide_height: self.waveguide_height_m,
            waveguide_count: self.waveguides,
            pas_per_waveguide: self.pas_per_waveguide,
            beta: 0.5,
        }
    }
}

/// User positions: an explicit list (one drop) or seeded uniform drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersSection {
    pub count: usize,
    /// Ground positions `[x, y]`; when given, `drops` must be 1.
    pub positions: Vec<[f64; 2]>,
    pub drops: usize,
    pub seed: u64,
}

impl Default for UsersSection {
    fn default() -> Self {
        Self {
            count: 2,
            positions: Vec::new(),
            drops: 10,
            seed: 1,
        }
    }
}

/// Either an explicit `values` list or a `start`/`stop`/`step` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSection {
    pub values: Option<Vec<f64>>,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for BetaSection {
    fn default() -> Self {
        Self {
            values: None,
            start: 0.0,
            stop: 1.0,
            step: 0.05,
        }
    }
}

impl BetaSection {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let values = match &self.values {
            Some(values) => values.clone(),
            None => {
                let (start, stop, step) = (self.start, self.stop, self.step);
                if !(step > 0.0) || stop < start {
                    return Err(ConfigError::Invalid(format!(
                        "beta sweep needs start <= stop and step > 0, got {start}..{stop} by {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| (start + i as f64 * step).min(stop)).collect()
            }
        };
        if values.is_empty() || values.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(ConfigError::Invalid("beta values must lie in [0, 1]".into()));
        }
        Ok(values)
    }

    pub fn sweep(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }
}

/// Optional PSO overrides; unset fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoSection {
    pub particles: Option<usize>,
    pub iterations: Option<usize>,
    pub inertia: Option<f64>,
    pub cognitive: Option<f64>,
    pub social: Option<f64>,
    pub penalty: Option<f64>,
    pub sweep_tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub stall_iterations: Option<usize>,
}

impl PsoSection {
    fn apply(&self, mut cfg: PsoConfig) -> PsoConfig {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { cfg.$f = v; })*};
        }
        set!(particles, iterations, inertia, cognitive, social, penalty, sweep_tol, max_sweeps, stall_iterations);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSection {
    /// Taylor order of the SCA expansion, 1 or 2.
    pub order: u8,
    /// Also solve the uniform-placement baseline.
    pub baseline_uniform: bool,
    pub max_outer: usize,
    pub outer_tol: f64,
    pub sca_tol: f64,
    pub sca_max_iterations: usize,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        let bcd = BcdConfig::default();
        Self {
            order: 1,
            baseline_uniform: false,
            max_outer: bcd.max_outer,
            outer_tol: bcd.tol,
            sca_tol: bcd.sca.tol,
            sca_max_iterations: bcd.sca.max_iterations,
        }
    }
}

/// A scenario file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub system: SystemSection,
    pub users: UsersSection,
    pub beta: BetaSection,
    pub pso: PsoSection,
    pub algorithm: AlgorithmSection,
    pub out: PathBuf,
    /// Fill the wall-time column; off by default so reruns reproduce the
    /// CSV byte for byte.
    pub timings: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Multi,
            system: SystemSection::default(),
            users: UsersSection::default(),
            beta: BetaSection::default(),
            pso: PsoSection::default(),
            algorithm: AlgorithmSection::default(),
            out: PathBuf::from("results"),
            timings: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn resolve(&self) -> Result<Scenario, ConfigError> {
        let params = self.system.to_params();
        params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let betas = self.beta.values()?;
        let users = &self.users;
        let explicit = if users.positions.is_empty() {
            None
        } else {
            if users.drops != 1 {
                return Err(ConfigError::Invalid("explicit positions describe exactly one drop".into()));
            }
            let set = UserSet::new(users.positions.iter().map(|[x, y]| Point3::ground(*x, *y)).collect())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            set.validate_in(&params).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            Some(set)
        };
        let count = explicit.as_ref().map_or(users.count, UserSet::len);
        if count == 0 || users.drops == 0 {
            return Err(ConfigError::Invalid("need at least one user and one drop".into()));
        }
        match self.mode {
            Mode::Single if count != 1 => {
                return Err(ConfigError::Invalid(format!("single mode serves one user, got {count}")));
            }
            Mode::Multi if count > params.waveguide_count => {
                return Err(ConfigError::Invalid(format!(
                    "{count} users need at least as many waveguides, got {}",
                    params.waveguide_count
                )));
            }
            _ => {}
        }
        if let Some(noise) = &params.noise_powers {
            if noise.len() != count {
                return Err(ConfigError::Invalid(format!("{} noise powers for {count} users", noise.len())));
            }
        }
        let order = match self.algorithm.order {
            1 => TaylorOrder::First,
            2 => TaylorOrder::Second,
            other => return Err(ConfigError::Invalid(format!("Taylor order must be 1 or 2, got {other}"))),
        };
        let pso = self.pso.apply(PsoConfig {
            seed: users.seed,
            ..PsoConfig::default()
        });
        pso.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let bcd = BcdConfig {
            pso,
            sca: ScaConfig {
                order,
                tol: self.algorithm.sca_tol,
                max_iterations: self.algorithm.sca_max_iterations,
            },
            max_outer: self.algorithm.max_outer,
            tol: self.algorithm.outer_tol,
        };
        Ok(Scenario {
            mode: self.mode,
            params,
            users: count,
            explicit,
            drops: users.drops,
            seed: users.seed,
            betas,
            bcd,
            baseline: self.algorithm.baseline_uniform,
            out: self.out.clone(),
            timings: self.timings,
        })
    }
}

/// A validated scenario in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub params: SystemParams,
    pub users: usize,
    pub explicit: Option<UserSet>,
    pub drops: usize,
    pub seed: u64,
    pub betas: Vec<f64>,
    pub bcd: BcdConfig,
    pub baseline: bool,
    pub out: PathBuf,
    pub timings: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        let sc = cfg.resolve().unwrap();
        assert_eq!(sc.betas.len(), 21);
        assert!((sc.params.power_budget - 1.0).abs() < 1e-12);
        assert!((sc.params.noise_power - 1e-12).abs() < 1e-24);
        assert!((sc.params.fixed_circuit_power - 0.1).abs() < 1e-12);
        assert!((sc.params.min_spacing - sc.params.wavelength() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml("colour = 3").is_err());
        assert!(ScenarioConfig::from_toml("[system]\npower_budget_w = 1.0").is_err());
        assert!(ScenarioConfig::from_toml("[pso]\nswarm = 4").is_err());
        assert!(ScenarioConfig::from_toml("[beta]\nfirst = 0.1").is_err());
    }

    #[test]
    fn beta_list_and_sweep() {
        let cfg = ScenarioConfig::from_toml("[beta]\nvalues = [0.0, 0.5, 1.0]").unwrap();
        assert_eq!(cfg.beta.values().unwrap(), vec![0.0, 0.5, 1.0]);
        let cfg = ScenarioConfig::from_toml("[beta]\nstart = 0.2\nstop = 0.4\nstep = 0.1").unwrap();
        assert_eq!(cfg.beta.values().unwrap().len(), 3);
        let cfg = ScenarioConfig::from_toml("[beta]\nvalues = [1.5]").unwrap();
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn explicit_users_and_checks() {
        let text = "mode = \"single\"\n[users]\npositions = [[2.0, 3.0]]\ndrops = 1";
        let sc = ScenarioConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(sc.users, 1);
        let text = "mode = \"single\"\n[users]\ncount = 2";
        assert!(ScenarioConfig::from_toml(text).unwrap().resolve().is_err());
        let text = "[users]\ncount = 5";
        assert!(ScenarioConfig::from_toml(text).unwrap().resolve().is_err());
        let text = "[algorithm]\norder = 3";
        assert!(ScenarioConfig::from_toml(text).unwrap().resolve().is_err());
    }

    #[test]
    fn pso_overrides_apply() {
        let text = "[pso]\nparticles = 7\nstall_iterations = 4";
        let sc = ScenarioConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(sc.bcd.pso.particles, 7);
        assert_eq!(sc.bcd.pso.stall_iterations, 4);
        assert_eq!(sc.bcd.pso.iterations, PsoConfig::default().iterations);
    }
}
