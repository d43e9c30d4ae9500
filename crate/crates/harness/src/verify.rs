//! Cross-validation of the fast solvers against the brute-force oracles.

use pass_core::convex::{hessian_bound, solve_subproblem, SubproblemSpec};
use pass_core::multi_user::{initial_power, trace_objective_sm, waveguide_columns, zf_build};
use pass_core::oracle::{
    direct_trace_oracle, grid_power_oracle, phase_scan_oracle, sinr_simulation_oracle, subproblem_grid_oracle,
    OracleReport, Tolerance,
};
use pass_core::single_user::{ee_peak_power, g2_eval, optimal_power, place_all_traced, PowerRegime};
use pass_core::{build_channels, PinchLayout, PowerAllocation, SystemParams, UserSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VerifyLevel {
    Quick,
    Full,
}

struct Sizes {
    icr_drops: usize,
    power_tuples: usize,
    power_grid: usize,
    trace_instances: usize,
    sinr_trials: usize,
    subproblems: usize,
}

impl VerifyLevel {
    fn sizes(self) -> Sizes {
        match self {
            VerifyLevel::Quick => Sizes {
                icr_drops: 50,
                power_tuples: 50,
                power_grid: 100_000,
                trace_instances: 50,
                sinr_trials: 100_000,
                subproblems: 4,
            },
            VerifyLevel::Full => Sizes {
                icr_drops: 10_000,
                power_tuples: 1_000,
                power_grid: 1_000_000,
                trace_instances: 500,
                sinr_trials: 100_000,
                subproblems: 40,
            },
        }
    }
}

/// Keeps the comparison with the largest error of a batch.
#[derive(Default)]
struct Worst(Option<OracleReport>);

impl Worst {
    fn push(&mut self, r: OracleReport) {
        let replace = match &self.0 {
            None => true,
            Some(w) => (!r.passed && w.passed) || (r.passed == w.passed && r.abs_error > w.abs_error),
        };
        if replace {
            self.0 = Some(r);
        }
    }
}

/// Worst ICR offset error against the phase scan over single-user drops,
/// plus the largest wrap index (reported as the fast value of a trivially
/// passing entry).
pub fn check_icr(drops: usize, seed: u64) -> Vec<OracleReport> {
    let params = SystemParams::default();
    let lambda = params.wavelength();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    let mut max_k = 0u64;
    let mut failures = 0usize;
    for _ in 0..drops {
        let users = UserSet::uniform(&params, 1, &mut rng);
        let trace = match place_all_traced(&params, &users.get(0)) {
            Ok(t) => t,
            Err(e) => {
                log::error!("placement failed: {e}");
                failures += 1;
                continue;
            }
        };
        max_k = max_k.max(trace.max_k());
        for rec in &trace.records {
            let scan = phase_scan_oracle(&rec.context, &params, lambda / 200.0, 4.0 * lambda).unwrap_or(f64::NAN);
            worst.push(OracleReport::compare(
                "ICR offset vs phase scan (m)",
                scan,
                rec.solution.offset,
                Tolerance::Absolute(lambda / 100.0),
                Some(seed),
            ));
        }
    }
    let mut out: Vec<OracleReport> = worst.0.into_iter().collect();
    out.push(OracleReport::compare(
        format!("placement failures over {drops} drops (max |k| = {max_k})"),
        0.0,
        failures as f64,
        Tolerance::Absolute(0.0),
        Some(seed),
    ));
    out
}

/// Closed-form power against the grid, and `g2(P*) = 1`.
pub fn check_power(tuples: usize, grid: usize, seed: u64) -> Vec<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    let mut g2 = Worst::default();
    let mut peak = Worst::default();
    for _ in 0..tuples {
        let params = SystemParams {
            power_budget: 10f64.powf(rng.random_range(-3.0..1.0)),
            beta: rng.random_range(0.0..=1.0),
            ..SystemParams::default()
        };
        let zeta = 10f64.powf(rng.random_range(6.0..12.0));
        let (p, regime) = match optimal_power(zeta, &params) {
            Ok(v) => v,
            Err(e) => {
                log::error!("optimal power failed: {e}");
                (f64::NAN, PowerRegime::Interior)
            }
        };
        if let Ok(p_star) = ee_peak_power(zeta, &params) {
            peak.push(OracleReport::compare(
                "g2 at the EE peak",
                1.0,
                g2_eval(zeta, &params, p_star),
                Tolerance::Absolute(1e-8),
                Some(seed),
            ));
        }
        let best = grid_power_oracle(zeta, &params, grid);
        worst.push(OracleReport::compare(
            "optimal power vs grid (W)",
            best,
            p,
            Tolerance::Absolute(params.power_budget / grid as f64),
            Some(seed),
        ));
        if regime == PowerRegime::Interior && params.beta > 0.0 && params.beta < 1.0 {
            g2.push(OracleReport::compare(
                "g2 at the interior optimum",
                1.0 - params.beta,
                g2_eval(zeta, &params, p),
                Tolerance::Relative(1e-6),
                Some(seed),
            ));
        }
    }
    worst.0.into_iter().chain(g2.0).chain(peak.0).collect()
}

/// Rank-one trace against Gauss-Jordan inversion, and simulated SINR
/// against `P_k / sigma_k^2`.
pub fn check_trace_and_sinr(instances: usize, trials: usize, seed: u64) -> Vec<OracleReport> {
    let params = SystemParams::default();
    let layout = PinchLayout::uniform(&params).expect("default layout");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for i in 0..instances {
        let k = 2 + i % 2;
        let users = UserSet::uniform(&params, k, &mut rng);
        let Ok(ch) = build_channels(&layout, &params, &users) else { continue };
        let powers: Vec<f64> = (0..k).map(|_| rng.random_range(1e-10..1e-7)).collect();
        let cols = waveguide_columns(&ch);
        let m = rng.random_range(0..params.waveguide_count);
        let fast = trace_objective_sm(&cols, m, &cols[m], &powers);
        let oracle = direct_trace_oracle(&ch.psi, &powers).unwrap_or(f64::NAN);
        worst.push(OracleReport::compare(
            "rank-one trace vs dense inverse (W)",
            oracle,
            fast,
            Tolerance::Relative(1e-9),
            Some(seed),
        ));
    }
    let mut out: Vec<OracleReport> = worst.0.into_iter().collect();

    let users = UserSet::uniform(&params, 2, &mut rng);
    let ch = build_channels(&layout, &params, &users).expect("channels");
    let powers = PowerAllocation(vec![4e-12, 1.5e-11]);
    let zf = zf_build(&ch, &powers).expect("full rank");
    let noise = vec![params.noise_power; 2];
    let sinr = sinr_simulation_oracle(&ch, &zf.w, &noise, trials, seed);
    for k in 0..2 {
        out.push(OracleReport::compare(
            format!("simulated SINR of user {k}"),
            sinr[k],
            powers.0[k] / noise[k],
            Tolerance::Relative(0.02),
            Some(seed),
        ));
    }
    out
}

/// A two-user subproblem expanded at a random interior point.
pub fn random_subproblem(rng: &mut ChaCha8Rng, beta: f64, second_order: bool) -> SubproblemSpec {
    let params = SystemParams::default().with_beta(beta);
    let lambda: Vec<f64> = (0..2).map(|_| 10f64.powf(rng.random_range(6.5..8.5))).collect();
    let start = initial_power(&params, &lambda).expect("feasible");
    let floor = params.sinr_threshold * params.noise_power;
    let local: Vec<f64> = start.iter().map(|p| floor + rng.random_range(0.2..0.9) * (p - floor)).collect();
    let rate: f64 = local.iter().map(|p| (1.0 + p / params.noise_power).log2()).sum();
    let transmit: f64 = local.iter().zip(&lambda).map(|(p, l)| p * l).sum();
    let kappa = transmit + params.fixed_circuit_power + params.rate_power_coeff * rate;
    let mu2 = if beta < 1.0 { (1.0 - beta) * (rate / kappa).ln() } else { 0.0 };
    SubproblemSpec {
        lambda_diag: lambda,
        noise: vec![params.noise_power; 2],
        sinr_threshold: vec![params.sinr_threshold; 2],
        power_budget: params.power_budget,
        beta,
        local_power: local,
        local_mu2: mu2,
        local_kappa: kappa,
        delta: if second_order && beta < 1.0 { hessian_bound(beta, mu2, kappa) } else { 0.0 },
        fixed_circuit_power: params.fixed_circuit_power,
        rate_power_coeff: params.rate_power_coeff,
    }
}

/// Interior-point subproblem objective against the zoomed grid, and the
/// KKT residual.
pub fn check_subproblems(count: usize, seed: u64) -> Vec<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obj = Worst::default();
    let mut kkt = Worst::default();
    for i in 0..count {
        let beta = (i % 5) as f64 / 4.0;
        let spec = random_subproblem(&mut rng, beta, i % 2 == 1);
        let (oracle, _) = subproblem_grid_oracle(&spec, 200, 8).unwrap_or((f64::NAN, Vec::new()));
        match solve_subproblem(&spec) {
            Ok(sol) => {
                obj.push(OracleReport::compare(
                    "subproblem objective vs grid",
                    oracle,
                    sol.objective,
                    Tolerance::Absolute(1e-6),
                    Some(seed),
                ));
                kkt.push(OracleReport::compare(
                    "subproblem KKT residual",
                    0.0,
                    sol.kkt_residual,
                    Tolerance::Absolute(1e-7),
                    Some(seed),
                ));
            }
            Err(e) => obj.push(OracleReport::compare(
                format!("subproblem solve failed: {e}"),
                oracle,
                f64::NAN,
                Tolerance::Absolute(1e-6),
                Some(seed),
            )),
        }
    }
    obj.0.into_iter().chain(kkt.0).collect()
}

/// The whole suite at the given level.
pub fn run_verify(level: VerifyLevel, seed: u64) -> Vec<OracleReport> {
    let s = level.sizes();
    let mut reports = check_icr(s.icr_drops, seed);
    reports.extend(check_power(s.power_tuples, s.power_grid, seed.wrapping_add(1)));
    reports.extend(check_trace_and_sinr(s.trace_instances, s.sinr_trials, seed.wrapping_add(2)));
    reports.extend(check_subproblems(s.subproblems, seed.wrapping_add(3)));
    reports
}
