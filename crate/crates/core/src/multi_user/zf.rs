//! Zero-forcing precoding over the aggregated waveguide channel.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::metrics::PowerAllocation;

/// Smallest accepted ratio between the extreme singular values of `Psi`.
pub const RANK_TOL: f64 = 1e-12;

/// `W = Psi Lambda P^{1/2}` with `Lambda = (Psi^H Psi)^-1`.
#[derive(Debug, Clone)]
pub struct ZfState {
    pub psi: DMatrix<Complex64>,
    pub lambda: DMatrix<Complex64>,
    pub w: DMatrix<Complex64>,
    /// Ratio of the largest to smallest singular value of `Psi`.
    pub condition: f64,
}

impl ZfState {
    pub fn lambda_diag(&self) -> Vec<f64> {
        lambda_diag(&self.lambda)
    }

    /// `Psi^H W`, diagonal under perfect nulling.
    pub fn effective(&self) -> DMatrix<Complex64> {
        self.psi.adjoint() * &self.w
    }
}

/// `(Psi^H Psi)^-1` and the condition number of `Psi`.
pub fn gram_inverse(psi: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, f64)> {
    let (m, k) = psi.shape();
    if m < k || k == 0 {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let sv = psi.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio >= RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    let gram = psi.adjoint() * psi;
    let inv = gram
        .cholesky()
        .ok_or(Error::RankDeficient { ratio })?
        .inverse();
    Ok((hermitian_part(&inv), max / min))
}

fn hermitian_part(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()).map(|c| c * 0.5)
}

pub fn lambda_diag(lambda: &DMatrix<Complex64>) -> Vec<f64> {
    lambda.diagonal().iter().map(|c| c.re).collect()
}

/// `tr(Lambda P)` for diagonal `P`.
pub fn transmit_power(lambda_diag: &[f64], powers: &PowerAllocation) -> f64 {
    lambda_diag.iter().zip(powers.as_slice()).map(|(l, p)| l * p).sum()
}

pub fn zf_build(channels: &ChannelState, powers: &PowerAllocation) -> Result<ZfState> {
    if powers.len() != channels.users() {
        return Err(Error::InvalidParams(format!(
            "{} power coefficients for {} users",
            powers.len(),
            channels.users()
        )));
    }
    let (lambda, condition) = gram_inverse(&channels.psi)?;
    let mut w = &channels.psi * &lambda;
    for (k, p) in powers.as_slice().iter().enumerate() {
        let scale = p.max(0.0).sqrt();
        w.column_mut(k).scale_mut(scale);
    }
    Ok(ZfState {
        psi: channels.psi.clone(),
        lambda,
        w,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_channels;
    use crate::layout::{PinchLayout, UserSet};
    use crate::params::SystemParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, k: usize) -> (SystemParams, ChannelState) {
        let params = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = UserSet::uniform(&params, k, &mut rng);
        let layout = PinchLayout::uniform(&params).unwrap();
        let ch = build_channels(&layout, &params, &users).unwrap();
        (params, ch)
    }

    #[test]
    fn nulls_interference() {
        for seed in 0..20 {
            let (_, ch) = instance(seed, 3);
            let powers = PowerAllocation(vec![1e-9, 4e-9, 2e-9]);
            let zf = zf_build(&ch, &powers).unwrap();
            let e = zf.effective();
            let scale = powers.as_slice().iter().map(|p| p.sqrt()).fold(0.0, f64::max);
            for i in 0..3 {
                for j in 0..3 {
                    let v = e[(i, j)];
                    if i == j {
                        assert!((v.re - powers.0[i].sqrt()).abs() < 1e-9 * scale);
                    } else {
                        assert!(v.norm() < 1e-9 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn transmit_power_is_trace() {
        let (_, ch) = instance(4, 2);
        let powers = PowerAllocation(vec![3e-9, 5e-9]);
        let zf = zf_build(&ch, &powers).unwrap();
        let direct: f64 = (&zf.w * zf.w.adjoint()).trace().re;
        let fast = transmit_power(&zf.lambda_diag(), &powers);
        assert!((direct - fast).abs() <= 1e-9 * direct);
    }

    #[test]
    fn rejects_more_users_than_waveguides() {
        let (_, ch) = instance(1, 5);
        assert!(matches!(
            zf_build(&ch, &PowerAllocation(vec![1.0; 5])),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn rejects_colocated_users() {
        let params = SystemParams::default();
        let p = crate::layout::Point3::ground(3.0, 3.0);
        let users = UserSet::new(vec![p, p]).unwrap();
        let layout = PinchLayout::uniform(&params).unwrap();
        let ch = build_channels(&layout, &params, &users).unwrap();
        assert!(matches!(gram_inverse(&ch.psi), Err(Error::RankDeficient { .. })));
    }
}
