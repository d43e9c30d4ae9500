use pass_core::convex::{hessian_bound, solve_subproblem, SubproblemSpec};
use pass_core::multi_user::{
    gram_inverse, initial_power, trace_objective_sm, waveguide_columns, zf_build, TraceEvaluator,
};
use pass_core::oracle::{
    direct_trace_oracle, grid_power_oracle, phase_residual, phase_scan_oracle, sinr_simulation_oracle,
    subproblem_grid_oracle,
};
use pass_core::single_user::{optimal_power, place_all_traced};
use pass_core::{build_channels, PinchLayout, PowerAllocation, SystemParams, UserSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn refinements_match_phase_scan() {
    let params = SystemParams::default();
    let lambda = params.wavelength();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..40 {
        let users = UserSet::uniform(&params, 1, &mut rng);
        let trace = place_all_traced(&params, &users.get(0)).unwrap();
        for rec in &trace.records {
            let scan = phase_scan_oracle(&rec.context, &params, lambda / 200.0, 4.0 * lambda).unwrap();
            assert!(
                (scan - rec.solution.offset).abs() < lambda / 100.0,
                "{:?}: scan {scan} icr {}",
                rec.context.direction,
                rec.solution.offset
            );
            assert!(phase_residual(&rec.context, &params, rec.solution.offset).abs() < 1e-6);
        }
    }
}

#[test]
fn closed_form_power_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..60 {
        let params = SystemParams {
            power_budget: 10f64.powf(rng.random_range(-3.0..1.0)),
            beta: rng.random_range(0.0..=1.0),
            ..SystemParams::default()
        };
        let zeta = 10f64.powf(rng.random_range(6.0..12.0));
        let grid = 100_000;
        let (p, _) = optimal_power(zeta, &params).unwrap();
        let best = grid_power_oracle(zeta, &params, grid);
        assert!((p - best).abs() <= params.power_budget / grid as f64, "{p} vs {best}");
    }
}

#[test]
fn rank_one_trace_matches_gauss_jordan() {
    let params = SystemParams::default();
    let layout = PinchLayout::uniform(&params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for i in 0..60 {
        let k = 2 + i % 2;
        let users = UserSet::uniform(&params, k, &mut rng);
        let ch = build_channels(&layout, &params, &users).unwrap();
        let powers: Vec<f64> = (0..k).map(|_| rng.random_range(1e-10..1e-7)).collect();
        let cols = waveguide_columns(&ch);
        let m = rng.random_range(0..4);
        let fast = trace_objective_sm(&cols, m, &cols[m], &powers);
        let oracle = direct_trace_oracle(&ch.psi, &powers).unwrap();
        assert!((fast - oracle).abs() <= 1e-9 * oracle);
        assert!(TraceEvaluator::new(&cols, m, &powers).uses_rank_one_update());
    }
}

#[test]
fn zf_sinr_matches_simulation() {
    let params = SystemParams::default();
    let layout = PinchLayout::uniform(&params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let users = UserSet::uniform(&params, 3, &mut rng);
    let ch = build_channels(&layout, &params, &users).unwrap();
    let powers = PowerAllocation(vec![2e-11, 5e-12, 1e-11]);
    let zf = zf_build(&ch, &powers).unwrap();
    let noise = vec![params.noise_power; 3];
    let sinr = sinr_simulation_oracle(&ch, &zf.w, &noise, 100_000, 7);
    for k in 0..3 {
        let expected = powers.0[k] / noise[k];
        assert!((sinr[k] - expected).abs() <= 0.02 * expected, "{} vs {expected}", sinr[k]);
    }
    let doubled = zf_build(&ch, &powers.scaled(2.0)).unwrap();
    let sinr2 = sinr_simulation_oracle(&ch, &doubled.w, &noise, 100_000, 7);
    for k in 0..3 {
        assert!((sinr2[k] / sinr[k] - 2.0).abs() < 1e-9);
    }
}

fn random_spec(rng: &mut ChaCha8Rng, beta: f64, second: bool) -> SubproblemSpec {
    let params = SystemParams::default().with_beta(beta);
    let lambda: Vec<f64> = (0..2).map(|_| 10f64.powf(rng.random_range(6.5..8.5))).collect();
    let start = initial_power(&params, &lambda).unwrap();
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
        delta: if second && beta < 1.0 { hessian_bound(beta, mu2, kappa) } else { 0.0 },
        fixed_circuit_power: params.fixed_circuit_power,
        rate_power_coeff: params.rate_power_coeff,
    }
}

#[test]
fn kernel_matches_subproblem_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for beta in [0.0, 0.2, 0.5, 0.8, 1.0] {
        for second in [false, true] {
            let spec = random_spec(&mut rng, beta, second);
            let sol = solve_subproblem(&spec).unwrap();
            let (oracle, _) = subproblem_grid_oracle(&spec, 200, 8).unwrap();
            assert!((sol.objective - oracle).abs() < 1e-6, "beta {beta}: {} vs {oracle}", sol.objective);
            assert!(sol.objective >= oracle - 1e-9);
            assert!(sol.kkt_residual <= 1e-7);
        }
    }
}

#[test]
fn gram_inverse_agrees_with_oracle_trace() {
    let params = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let users = UserSet::uniform(&params, 3, &mut rng);
    let trace = place_all_traced(&params, &users.get(0)).unwrap();
    let ch = build_channels(&trace.layout, &params, &users).unwrap();
    let (lambda, _) = gram_inverse(&ch.psi).unwrap();
    let p = [1.0, 2.0, 3.0];
    let fast: f64 = (0..3).map(|k| lambda[(k, k)].re * p[k]).sum();
    let oracle = direct_trace_oracle(&ch.psi, &p).unwrap();
    assert!((fast - oracle).abs() <= 1e-9 * oracle);
}
