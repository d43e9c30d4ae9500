//! Log-barrier interior-point solver for the convexified power subproblem
//! solved once per SCA iteration.
//!
//! Variables are `(q_1..q_K, mu1, mu2, kappa)` with the normalized powers
//! `q_k = Lambda_kk P_k / P_T`, so the budget reads `sum q <= 1` and the
//! SINR of user `k` is `s_k q_k` with `s_k = P_T / (Lambda_kk sigma_k^2)`.
//! `mu1` is absent when `beta = 0`; `mu2` and `kappa` are absent when
//! `beta = 1`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BARRIER_T0: f64 = 1.0;
pub const BARRIER_GROWTH: f64 = 10.0;
pub const BARRIER_GAP_TOL: f64 = 1e-9;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_STEPS: usize = 50;
const ARMIJO_ALPHA: f64 = 0.25;
const BACKTRACK_BETA: f64 = 0.5;
const PRECISION_FLOOR: f64 = 1e-6;

/// One convexified power subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSpec {
    /// Diagonal of `Lambda = (Psi^H Psi)^-1`; only the diagonal enters
    /// `tr(Lambda P)` for diagonal `P`.
    pub lambda_diag: Vec<f64>,
    pub noise: Vec<f64>,
    /// Per-user SINR floor, linear.
    pub sinr_threshold: Vec<f64>,
    pub power_budget: f64,
    pub beta: f64,
    /// Expansion point `(P, mu2, kappa)`.
    pub local_power: Vec<f64>,
    pub local_mu2: f64,
    pub local_kappa: f64,
    /// Curvature of the quadratic upper bound on `e^{mu2/(1-beta)} kappa`;
    /// zero selects the first-order expansion.
    pub delta: f64,
    pub fixed_circuit_power: f64,
    pub rate_power_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Newton stopped making progress; the best feasible iterate is returned.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    pub power: Vec<f64>,
    pub mu1: f64,
    pub mu2: f64,
    pub kappa: f64,
    /// `mu1 + mu2`.
    pub objective: f64,
    /// Max of the scaled stationarity residual and the duality gap.
    pub kkt_residual: f64,
    /// Largest constraint value; negative means strictly feasible.
    pub max_constraint: f64,
    pub status: SolveStatus,
    pub newton_steps: usize,
}

/// Max eigenvalue of the Hessian of `u(mu2, kappa) = e^{mu2/(1-beta)} kappa`.
pub fn hessian_bound(beta: f64, mu2: f64, kappa: f64) -> f64 {
    let w = 1.0 / (1.0 - beta);
    let e = (mu2 * w).exp();
    let uu = e * kappa * w * w;
    let uk = e * w;
    0.5 * (uu + (uu * uu + 4.0 * uk * uk).sqrt())
}

struct Problem {
    k: usize,
    beta: f64,
    budget: f64,
    s: Vec<f64>,
    floor: Vec<f64>,
    q_local: Vec<f64>,
    lin0: Vec<f64>,
    lin1: Vec<f64>,
    mu2_local: f64,
    kappa_local: f64,
    u_local: f64,
    u_mu: f64,
    u_kappa: f64,
    delta: f64,
    p_f: f64,
    chi: f64,
    mu1: Option<usize>,
    mu2: Option<usize>,
    kappa: Option<usize>,
    dim: usize,
}

struct Constraint {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Problem {
    fn new(spec: &SubproblemSpec) -> Result<Self> {
        let k = spec.lambda_diag.len();
        let lens = [spec.noise.len(), spec.sinr_threshold.len(), spec.local_power.len()];
        if k == 0 || lens.iter().any(|&l| l != k) {
            return Err(Error::InvalidParams("subproblem vectors must share one non-zero length".into()));
        }
        if !(0.0..=1.0).contains(&spec.beta) || spec.power_budget <= 0.0 || spec.delta < 0.0 {
            return Err(Error::InvalidParams("subproblem needs beta in [0, 1], P_T > 0, delta >= 0".into()));
        }
        let budget = spec.power_budget;
        let s: Vec<f64> = (0..k).map(|i| budget / (spec.lambda_diag[i] * spec.noise[i])).collect();
        let floor: Vec<f64> = (0..k).map(|i| spec.sinr_threshold[i] / s[i]).collect();
        let q_local: Vec<f64> = (0..k).map(|i| spec.local_power[i] * spec.lambda_diag[i] / budget).collect();
        let lin0 = (0..k).map(|i| (s[i] * q_local[i]).ln_1p() / LN_2).collect();
        let lin1 = (0..k).map(|i| s[i] / (LN_2 * (1.0 + s[i] * q_local[i]))).collect();

        let mut dim = k;
        let mu1 = (spec.beta > 0.0).then(|| {
            dim += 1;
            dim - 1
        });
        let (mu2, kappa) = if spec.beta < 1.0 {
            dim += 2;
            (Some(dim - 2), Some(dim - 1))
        } else {
            (None, None)
        };
        let w = if spec.beta < 1.0 { 1.0 / (1.0 - spec.beta) } else { 0.0 };
        let e = (spec.local_mu2 * w).exp();
        Ok(Self {
            k,
            beta: spec.beta,
            budget,
            s,
            floor,
            q_local,
            lin0,
            lin1,
            mu2_local: spec.local_mu2,
            kappa_local: spec.local_kappa,
            u_local: e * spec.local_kappa,
            u_mu: e * spec.local_kappa * w,
            u_kappa: e,
            delta: spec.delta,
            p_f: spec.fixed_circuit_power,
            chi: spec.rate_power_coeff,
            mu1,
            mu2,
            kappa,
            dim,
        })
    }

    fn se(&self, z: &DVector<f64>) -> f64 {
        (0..self.k).map(|i| (self.s[i] * z[i]).ln_1p() / LN_2).sum()
    }

    fn linear_cost(&self, z: &DVector<f64>) -> f64 {
        let q: f64 = (0..self.k).map(|i| z[i]).sum();
        let g: f64 = (0..self.k)
            .map(|i| self.lin0[i] + self.lin1[i] * (z[i] - self.q_local[i]))
            .sum();
        self.budget * q + self.p_f + self.chi * g
    }

    fn upper_u(&self, mu2: f64, kappa: f64) -> f64 {
        let dm = mu2 - self.mu2_local;
        let dk = kappa - self.kappa_local;
        self.u_local + self.u_mu * dm + self.u_kappa * dk + 0.5 * self.delta * (dm * dm + dk * dk)
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        self.mu1.map_or(0.0, |i| z[i]) + self.mu2.map_or(0.0, |i| z[i])
    }

    fn objective_grad(&self) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for i in [self.mu1, self.mu2].into_iter().flatten() {
            g[i] = -1.0;
        }
        g
    }

    fn values(&self, z: &DVector<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k + 4);
        out.push((0..self.k).map(|i| z[i]).sum::<f64>() - 1.0);
        out.extend((0..self.k).map(|i| self.floor[i] - z[i]));
        let se = self.se(z);
        if let Some(i) = self.mu1 {
            out.push((z[i] / self.beta).exp() - se);
        }
        if let (Some(m), Some(c)) = (self.mu2, self.kappa) {
            out.push(self.upper_u(z[m], z[c]) - se);
            out.push(self.linear_cost(z) - z[c]);
        }
        out
    }

    fn constraints(&self, z: &DVector<f64>) -> Vec<Constraint> {
        let n = self.dim;
        let values = self.values(z);
        let mut out = Vec::with_capacity(values.len());
        let mut idx = 0;
        let mut push = |grad: DVector<f64>, hess: DMatrix<f64>, out: &mut Vec<Constraint>| {
            out.push(Constraint {
                value: values[idx],
                grad,
                hess,
            });
            idx += 1;
        };

        let mut g = DVector::zeros(n);
        g.rows_mut(0, self.k).fill(1.0);
        push(g, DMatrix::zeros(n, n), &mut out);
        for i in 0..self.k {
            let mut g = DVector::zeros(n);
            g[i] = -1.0;
            push(g, DMatrix::zeros(n, n), &mut out);
        }

        // -SE contributes a diagonal positive curvature in q.
        let mut se_grad = DVector::zeros(n);
        let mut se_hess = DMatrix::zeros(n, n);
        for i in 0..self.k {
            let r = 1.0 + self.s[i] * z[i];
            se_grad[i] = -self.s[i] / (LN_2 * r);
            se_hess[(i, i)] = self.s[i] * self.s[i] / (LN_2 * r * r);
        }
        if let Some(m) = self.mu1 {
            let e = (z[m] / self.beta).exp();
            let mut g = se_grad.clone();
            g[m] = e / self.beta;
            let mut h = se_hess.clone();
            h[(m, m)] = e / (self.beta * self.beta);
            push(g, h, &mut out);
        }
        if let (Some(m), Some(c)) = (self.mu2, self.kappa) {
            let mut g = se_grad.clone();
            g[m] = self.u_mu + self.delta * (z[m] - self.mu2_local);
            g[c] = self.u_kappa + self.delta * (z[c] - self.kappa_local);
            let mut h = se_hess.clone();
            h[(m, m)] = self.delta;
            h[(c, c)] = self.delta;
            push(g, h, &mut out);

            let mut g = DVector::zeros(n);
            for i in 0..self.k {
                g[i] = self.budget + self.chi * self.lin1[i];
            }
            g[c] = -1.0;
            push(g, DMatrix::zeros(n, n), &mut out);
        }
        out
    }

    fn barrier(&self, z: &DVector<f64>, t: f64) -> f64 {
        let values = self.values(z);
        if values.iter().any(|&v| !(v < 0.0)) {
            return f64::INFINITY;
        }
        -t * self.objective(z) - values.iter().map(|v| (-v).ln()).sum::<f64>()
    }

    /// Scaled KKT stationarity residual. Multipliers of the constraints
    /// that are active on the central path are fitted by least squares, since
    /// the barrier duals `-1 / (t f_i)` lose precision once `f_i` nears the
    /// rounding level of the quantities it is computed from.
    fn stationarity(&self, z: &DVector<f64>, t: f64) -> f64 {
        let g0 = self.objective_grad();
        let cons = self.constraints(z);
        let weight = |c: &Constraint| -c.grad.amax() / (t * c.value);
        let top = cons.iter().map(weight).fold(1.0, f64::max);
        let active: Vec<&Constraint> = cons.iter().filter(|c| weight(c) >= 1e-6 * top).collect();
        let mut a = DMatrix::zeros(self.dim, active.len());
        for (j, c) in active.iter().enumerate() {
            a.set_column(j, &c.grad);
        }
        let duals = match a.clone().svd(true, true).solve(&(-&g0), 1e-14) {
            Ok(d) => d,
            Err(_) => return f64::INFINITY,
        };
        let r = &g0 + &a * &duals;
        let mut scale = g0.amax().max(1.0);
        let mut sign = 0.0f64;
        for (j, c) in active.iter().enumerate() {
            scale = scale.max(duals[j].abs() * c.grad.amax());
            sign = sign.max(-duals[j] * c.grad.amax());
        }
        r.amax().max(sign) / scale
    }

    /// Strictly feasible start built from the expansion point.
    fn phase_one(&self) -> Result<DVector<f64>> {
        let floor_sum: f64 = self.floor.iter().sum();
        if floor_sum >= 1.0 {
            return Err(Error::Infeasible(format!(
                "QoS floors need {:.6e} W, above the budget {:.6e} W",
                floor_sum * self.budget,
                self.budget
            )));
        }
        let room = (1.0 - floor_sum) / self.k as f64;
        let mut z = DVector::zeros(self.dim);
        for i in 0..self.k {
            let centre = self.floor[i] + 0.5 * room;
            let local = self.q_local[i].clamp(self.floor[i], 1.0);
            z[i] = 0.999 * local + 0.001 * centre;
        }
        let total: f64 = (0..self.k).map(|i| z[i]).sum();
        if total >= 1.0 {
            for i in 0..self.k {
                z[i] = self.floor[i] + (z[i] - self.floor[i]) * (1.0 - 1e-6 - floor_sum) / (total - floor_sum);
            }
        }
        let se = self.se(&z);
        if let Some(m) = self.mu1 {
            z[m] = self.beta * (0.9 * se).ln();
        }
        if let (Some(m), Some(c)) = (self.mu2, self.kappa) {
            let cost = self.linear_cost(&z);
            z[c] = cost + 0.01 * cost.abs().max(1e-12);
            let target = 0.9 * se;
            let dk = z[c] - self.kappa_local;
            let rest = self.u_local + self.u_kappa * dk + 0.5 * self.delta * dk * dk;
            let dm = if self.delta > 0.0 {
                let vertex = -self.u_mu / self.delta;
                let lowest = rest + self.u_mu * vertex + 0.5 * self.delta * vertex * vertex;
                if lowest >= target {
                    return Err(Error::Infeasible("no interior point for the EE slack constraint".into()));
                }
                vertex
            } else {
                (target - rest) / self.u_mu
            };
            z[m] = self.mu2_local + dm;
        }
        if self.values(&z).iter().any(|&v| !(v < 0.0)) {
            return Err(Error::Infeasible("phase-I point is not strictly feasible".into()));
        }
        Ok(z)
    }
}

/// Solves the subproblem to `m / t < 1e-9` by barrier centering.
pub fn solve_subproblem(spec: &SubproblemSpec) -> Result<SubproblemSolution> {
    let prob = Problem::new(spec)?;
    let mut z = prob.phase_one()?;
    let m = prob.values(&z).len() as f64;
    let f0_grad = prob.objective_grad();
    let mut t = BARRIER_T0;
    let mut status = SolveStatus::Optimal;
    let mut steps = 0;

    loop {
        let mut last_decrement = f64::INFINITY;
        for _ in 0..NEWTON_MAX_STEPS {
            let cons = prob.constraints(&z);
            let mut grad = &f0_grad * t;
            let mut hess = DMatrix::<f64>::zeros(prob.dim, prob.dim);
            for c in &cons {
                let inv = -1.0 / c.value;
                grad += &c.grad * inv;
                hess += &c.grad * c.grad.transpose() * (inv * inv) + &c.hess * inv;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    let reg = hess.diagonal().amax().max(1.0) * 1e-12;
                    let shifted = hess + DMatrix::identity(prob.dim, prob.dim) * reg;
                    match shifted.cholesky() {
                        Some(ch) => ch.solve(&(-&grad)),
                        None => {
                            status = SolveStatus::Stalled;
                            break;
                        }
                    }
                }
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= NEWTON_TOL {
                break;
            }
            // Below this the barrier differences sit at rounding level.
            let at_precision_floor = decrement < PRECISION_FLOOR;
            if decrement >= last_decrement && at_precision_floor {
                break;
            }
            last_decrement = decrement;
            let current = prob.barrier(&z, t);
            let mut alpha = 1.0;
            let accepted = loop {
                let trial = &z + &step * alpha;
                let value = prob.barrier(&trial, t);
                if value <= current - ARMIJO_ALPHA * alpha * decrement {
                    break Some(trial);
                }
                alpha *= BACKTRACK_BETA;
                if alpha < 1e-20 {
                    break None;
                }
            };
            steps += 1;
            match accepted {
                Some(next) => z = next,
                None => {
                    if !at_precision_floor {
                        status = SolveStatus::Stalled;
                    }
                    break;
                }
            }
        }
        if m / t < BARRIER_GAP_TOL || status == SolveStatus::Stalled {
            break;
        }
        t *= BARRIER_GROWTH;
    }

    if status == SolveStatus::Stalled {
        log::debug!("barrier solver stalled at t = {t:e}");
    }
    let values = prob.values(&z);
    let kkt_residual = prob.stationarity(&z, t).max(m / t);
    let power = (0..prob.k).map(|i| z[i] * prob.budget / spec.lambda_diag[i]).collect();
    let mu1 = prob.mu1.map_or(0.0, |i| z[i]);
    let mu2 = prob.mu2.map_or(0.0, |i| z[i]);
    let kappa = prob.kappa.map_or_else(|| prob.linear_cost(&z), |i| z[i]);
    Ok(SubproblemSolution {
        power,
        mu1,
        mu2,
        kappa,
        objective: mu1 + mu2,
        kkt_residual,
        max_constraint: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        status,
        newton_steps: steps,
    })
}
