//! Monte Carlo drops, beta sweeps and the files they produce.

use std::fs;
use std::path::Path;
use std::time::Instant;

use pass_core::multi_user::{bcd_solve, power_only, BcdConfig, BcdSolution};
use pass_core::single_user::{place_all_traced, solve_with_layout, SingleUserSolution};
use pass_core::{Efficiency, PinchLayout, SystemParams, UserSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, Scenario};

/// One `(drop, design, beta)` result; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub drop: usize,
    /// `optimized` or `uniform`.
    pub design: String,
    pub beta: f64,
    pub se: f64,
    pub ee: f64,
    /// Transmit power in watts: `P` for one user, `tr(Lambda P)` otherwise.
    pub power: f64,
    pub regime: String,
    pub outer_iterations: usize,
    /// Beta whose solve produced the reported point.
    pub source_beta: f64,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub drop: usize,
    pub design: String,
    pub beta: f64,
    pub outer_iteration: usize,
    pub objective: f64,
    pub se: f64,
    pub ee: f64,
    pub transmit_power: f64,
    pub sca_iterations: usize,
    pub pso_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRow {
    pub drop: usize,
    pub design: String,
    pub beta: f64,
    pub waveguide: usize,
    pub index: usize,
    pub x: f64,
}

/// A solved design point before it is matched to a beta.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub beta: f64,
    pub efficiency: Efficiency,
    pub power: f64,
    pub regime: String,
    pub outer_iterations: usize,
    pub layout: PinchLayout,
    pub wall_time: f64,
}

/// The point reported for one beta.
#[derive(Debug, Clone)]
pub struct Selected {
    pub beta: f64,
    pub objective: f64,
    pub candidate: Candidate,
}

#[derive(Debug, Clone)]
pub struct DropResult {
    pub drop: usize,
    pub users: UserSet,
    pub optimized: Vec<Selected>,
    pub baseline: Option<Vec<Selected>>,
    pub convergence: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DropFailure {
    pub drop: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct RunResults {
    pub drops: Vec<DropResult>,
    pub failures: Vec<DropFailure>,
}

impl RunResults {
    pub fn sweep_rows(&self, seed: u64, timings: bool) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for d in &self.drops {
            let designs = std::iter::once(("optimized", &d.optimized)).chain(d.baseline.iter().map(|b| ("uniform", b)));
            for (design, points) in designs {
                for s in points {
                    let c = &s.candidate;
                    rows.push(SweepRow {
                        seed,
                        drop: d.drop,
                        design: design.to_string(),
                        beta: s.beta,
                        se: c.efficiency.se,
                        ee: c.efficiency.ee,
                        power: c.power,
                        regime: c.regime.clone(),
                        outer_iterations: c.outer_iterations,
                        source_beta: c.beta,
                        wall_time_s: timings.then_some(c.wall_time),
                    });
                }
            }
        }
        rows
    }

    pub fn layout_rows(&self) -> Vec<LayoutRow> {
        let mut rows = Vec::new();
        for d in &self.drops {
            let designs = std::iter::once(("optimized", &d.optimized)).chain(d.baseline.iter().map(|b| ("uniform", b)));
            for (design, points) in designs {
                for s in points {
                    let layout = &s.candidate.layout;
                    for m in 0..layout.waveguides() {
                        for (n, x) in layout.column(m).iter().enumerate() {
                            rows.push(LayoutRow {
                                drop: d.drop,
                                design: design.to_string(),
                                beta: s.beta,
                                waveguide: m,
                                index: n,
                                x: *x,
                            });
                        }
                    }
                }
            }
        }
        rows
    }
}

/// Users of drop `drop`: the explicit set, or a uniform draw from the
/// drop's own stream of the scenario seed.
pub fn drop_users(sc: &Scenario, drop: usize) -> UserSet {
    if let Some(users) = &sc.explicit {
        return users.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(drop as u64);
    UserSet::uniform(&sc.params, sc.users, &mut rng)
}

/// For every beta, the candidate with the best weighted objective at that
/// beta. Ties keep the candidate solved at that beta.
pub fn envelope(betas: &[f64], candidates: &[Candidate]) -> Vec<Selected> {
    betas
        .iter()
        .map(|&beta| {
            let mut best: Option<(f64, &Candidate)> = None;
            for c in candidates {
                let value = c.efficiency.weighted_objective(beta);
                let better = match best {
                    None => true,
                    Some((v, b)) => value > v || (value == v && c.beta == beta && b.beta != beta),
                };
                if better {
                    best = Some((value, c));
                }
            }
            let (objective, c) = best.expect("at least one candidate");
            Selected {
                beta,
                objective,
                candidate: c.clone(),
            }
        })
        .collect()
}

fn single_candidate(beta: f64, sol: SingleUserSolution, wall: f64) -> Candidate {
    Candidate {
        beta,
        efficiency: sol.efficiency,
        power: sol.power,
        regime: sol.regime.as_str().to_string(),
        outer_iterations: 0,
        layout: sol.layout,
        wall_time: wall,
    }
}

fn multi_candidate(params: &SystemParams, beta: f64, sol: &BcdSolution, wall: f64) -> Candidate {
    let tight = sol.transmit_power >= params.power_budget * (1.0 - 1e-6);
    Candidate {
        beta,
        efficiency: sol.efficiency,
        power: sol.transmit_power,
        regime: if tight { "budget-limited" } else { "interior" }.to_string(),
        outer_iterations: sol.trace.records.len().saturating_sub(1),
        layout: sol.layout.clone(),
        wall_time: wall,
    }
}

fn convergence_rows(drop: usize, design: &str, beta: f64, sol: &BcdSolution) -> Vec<ConvergenceRow> {
    sol.trace
        .records
        .iter()
        .map(|r| ConvergenceRow {
            drop,
            design: design.to_string(),
            beta,
            outer_iteration: r.iteration,
            objective: r.objective,
            se: r.se,
            ee: r.ee,
            transmit_power: r.transmit_power,
            sca_iterations: r.sca.len(),
            pso_evaluations: r.pso_evaluations,
        })
        .collect()
}

fn drop_bcd_config(sc: &Scenario, drop: usize) -> BcdConfig {
    let mut cfg = sc.bcd;
    cfg.pso.seed = sc.seed ^ (drop as u64 + 1).wrapping_mul(0x2545_F491_4F6C_DD1D);
    cfg
}

/// Every beta of one drop, optimized and (optionally) uniform placement.
pub fn solve_drop(sc: &Scenario, drop: usize) -> pass_core::Result<DropResult> {
    let users = drop_users(sc, drop);
    let uniform = PinchLayout::uniform(&sc.params)?;
    let mut optimized = Vec::new();
    let mut baseline = Vec::new();
    let mut convergence = Vec::new();

    match sc.mode {
        Mode::Single => {
            let user = users.get(0);
            let start = Instant::now();
            let placed = place_all_traced(&sc.params, &user)?;
            let placement_time = start.elapsed().as_secs_f64();
            for &beta in &sc.betas {
                let params = sc.params.with_beta(beta);
                let t = Instant::now();
                let sol = solve_with_layout(&params, placed.layout.clone(), &user)?;
                optimized.push(single_candidate(beta, sol, placement_time + t.elapsed().as_secs_f64()));
                if sc.baseline {
                    let t = Instant::now();
                    let sol = solve_with_layout(&params, uniform.clone(), &user)?;
                    baseline.push(single_candidate(beta, sol, t.elapsed().as_secs_f64()));
                }
            }
        }
        Mode::Multi => {
            let cfg = drop_bcd_config(sc, drop);
            for &beta in &sc.betas {
                let params = sc.params.with_beta(beta);
                let t = Instant::now();
                let sol = bcd_solve(&params, &users, &uniform, &cfg)?;
                optimized.push(multi_candidate(&params, beta, &sol, t.elapsed().as_secs_f64()));
                convergence.extend(convergence_rows(drop, "optimized", beta, &sol));
                if sc.baseline {
                    let t = Instant::now();
                    let sol = power_only(&params, &users, &uniform, &cfg.sca)?;
                    baseline.push(multi_candidate(&params, beta, &sol, t.elapsed().as_secs_f64()));
                    convergence.extend(convergence_rows(drop, "uniform", beta, &sol));
                }
            }
        }
    }

    let mut pool = optimized;
    pool.extend(baseline.iter().cloned());
    Ok(DropResult {
        drop,
        users,
        optimized: envelope(&sc.betas, &pool),
        baseline: sc.baseline.then(|| envelope(&sc.betas, &baseline)),
        convergence,
    })
}

/// All drops, in parallel, in drop order.
pub fn compute(sc: &Scenario) -> RunResults {
    let outcomes: Vec<(usize, pass_core::Result<DropResult>)> =
        (0..sc.drops).into_par_iter().map(|d| (d, solve_drop(sc, d))).collect();
    let mut drops = Vec::new();
    let mut failures = Vec::new();
    for (drop, outcome) in outcomes {
        match outcome {
            Ok(r) => drops.push(r),
            Err(e) => {
                log::error!("drop {drop} failed: {e}");
                failures.push(DropFailure {
                    drop,
                    error: e.to_string(),
                });
            }
        }
    }
    RunResults { drops, failures }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'a str,
    mode: Mode,
    seed: u64,
    drops: usize,
    users: usize,
    betas: &'a [f64],
    params: &'a SystemParams,
    algorithm: &'a BcdConfig,
    baseline_uniform: bool,
    failures: &'a [DropFailure],
    notes: &'a [&'a str],
}

const NOTES: &[&str] = &[
    "Each beta reports the best weighted objective among all points solved for the drop, including the uniform baseline; source_beta names the solve that produced it.",
    "PSO streams are keyed by seed, drop, outer iteration, sweep and PA index.",
    "A MIMO base-station baseline is not produced: no array or channel model for it is defined.",
];

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `pareto.csv`, `convergence.csv`, `layout.csv` and
/// `manifest.json` under `dir`.
pub fn write_outputs(sc: &Scenario, results: &RunResults, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("pareto.csv"), &results.sweep_rows(sc.seed, sc.timings))?;
    let convergence: Vec<ConvergenceRow> = results.drops.iter().flat_map(|d| d.convergence.clone()).collect();
    write_csv(&dir.join("convergence.csv"), &convergence)?;
    write_csv(&dir.join("layout.csv"), &results.layout_rows())?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        mode: sc.mode,
        seed: sc.seed,
        drops: sc.drops,
        users: sc.users,
        betas: &sc.betas,
        params: &sc.params,
        algorithm: &sc.bcd,
        baseline_uniform: sc.baseline,
        failures: &results.failures,
        notes: NOTES,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// [`compute`] then [`write_outputs`] to the scenario's output directory.
pub fn run_scenario(sc: &Scenario) -> anyhow::Result<RunResults> {
    let results = compute(sc);
    write_outputs(sc, &results, &sc.out)?;
    Ok(results)
}
