//! Line-of-sight channel model: in-waveguide phase shifts, free-space
//! spherical-wave gains, and the aggregated waveguide-to-user matrix.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::layout::{PinchLayout, Point3, UserSet};
use crate::params::SystemParams;

/// In-waveguide phase factor of PA `(m, n)`, `exp(-j 2 pi / lambda_g * dist)`,
/// with `dist` measured from the feed along the waveguide.
pub fn inwaveguide_phase(layout: &PinchLayout, params: &SystemParams, m: usize, n: usize) -> Complex64 {
    guided_phase(params, layout.feed_distance(m, n))
}

pub(crate) fn guided_phase(params: &SystemParams, feed_distance: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI / params.guided_wavelength() * feed_distance)
}

/// Free-space gain from PA `(m, n)` to `user`, `sqrt(eta) exp(-j 2 pi d / lambda) / d`.
pub fn freespace_gain(
    layout: &PinchLayout,
    params: &SystemParams,
    user: &Point3,
    m: usize,
    n: usize,
) -> Complex64 {
    spherical_gain(params, user.distance(&layout.position(m, n)))
}

pub(crate) fn spherical_gain(params: &SystemParams, distance: f64) -> Complex64 {
    Complex64::from_polar(
        params.eta().sqrt() / distance,
        -2.0 * PI / params.wavelength() * distance,
    )
}

/// Combined coefficient of waveguide `m` towards a user: the sum over its PAs
/// of free-space gain times in-waveguide phase. Equals `conj(Psi[(m, k)])`.
pub fn waveguide_coefficient(layout: &PinchLayout, params: &SystemParams, user: &Point3, m: usize) -> Complex64 {
    (0..layout.pas_per_waveguide())
        .map(|n| freespace_gain(layout, params, user, m, n) * inwaveguide_phase(layout, params, m, n))
        .sum()
}

/// Contribution of a single PA at coordinate `x` on waveguide `m` to
/// [`waveguide_coefficient`]; used when one PA is moved while others are fixed.
pub(crate) fn pa_contribution(
    params: &SystemParams,
    layout: &PinchLayout,
    user: &Point3,
    m: usize,
    x: f64,
) -> Complex64 {
    let pa = Point3::new(x, layout.waveguide_y(m), layout.height());
    spherical_gain(params, user.distance(&pa)) * guided_phase(params, x - params.feed_x())
}

/// Channel matrices for one layout and user set.
///
/// * `g`: `MN x M` block diagonal, column `m` holds the in-waveguide phases
///   of waveguide `m` in rows `m N .. (m + 1) N`.
/// * `h`: `MN x K`, column `k` is `h_k`, so `h_k^H` carries the free-space
///   gains with phase `-2 pi d / lambda`.
/// * `psi`: `M x K`, `G^H H`.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub g: DMatrix<Complex64>,
    pub h: DMatrix<Complex64>,
    pub psi: DMatrix<Complex64>,
}

impl ChannelState {
    pub fn waveguides(&self) -> usize {
        self.psi.nrows()
    }

    pub fn users(&self) -> usize {
        self.psi.ncols()
    }

    /// `G^H H` through the dense product.
    pub fn psi_dense(&self) -> DMatrix<Complex64> {
        self.g.adjoint() * &self.h
    }

    /// Column `m` of `Psi^H`: coefficients of waveguide `m` towards every user.
    pub fn column_vector(&self, m: usize) -> nalgebra::DVector<Complex64> {
        self.psi.row(m).adjoint()
    }

    /// Effective channel `h_k^H G` of user `k`, as a length-M vector.
    pub fn effective_row(&self, k: usize) -> nalgebra::DVector<Complex64> {
        self.psi.column(k).map(|c| c.conj())
    }
}

/// Builds `G`, `H` and `Psi` for a layout and user set.
///
/// `Psi` is assembled from per-waveguide sums rather than the dense product.
pub fn build_channels(layout: &PinchLayout, params: &SystemParams, users: &UserSet) -> Result<ChannelState> {
    let layout = PinchLayout::new(params, layout.columns().to_vec())?;
    let m_count = layout.waveguides();
    let n_count = layout.pas_per_waveguide();
    let k_count = users.len();

    let mut g = DMatrix::<Complex64>::zeros(m_count * n_count, m_count);
    let mut h = DMatrix::<Complex64>::zeros(m_count * n_count, k_count);
    let mut psi = DMatrix::<Complex64>::zeros(m_count, k_count);

    for m in 0..m_count {
        for n in 0..n_count {
            let row = m * n_count + n;
            let phase = inwaveguide_phase(&layout, params, m, n);
            g[(row, m)] = phase;
            for (k, user) in users.iter().enumerate() {
                let gain = freespace_gain(&layout, params, user, m, n);
                h[(row, k)] = gain.conj();
                psi[(m, k)] += (gain * phase).conj();
            }
        }
    }
    Ok(ChannelState { g, h, psi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::UserSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(m: usize, n: usize) -> SystemParams {
        SystemParams {
            waveguide_count: m,
            pas_per_waveguide: n,
            ..SystemParams::default()
        }
    }

    fn random_layout(p: &SystemParams, rng: &mut ChaCha8Rng) -> PinchLayout {
        let cols = (0..p.waveguide_count)
            .map(|_| {
                let mut x = rng.random::<f64>() * (p.region_x - 1.0);
                (0..p.pas_per_waveguide)
                    .map(|_| {
                        x += p.min_spacing + rng.random::<f64>() * 0.05;
                        x
                    })
                    .collect()
            })
            .collect();
        PinchLayout::new(p, cols).unwrap()
    }

    #[test]
    fn guided_phase_cycles() {
        let p = params(1, 1);
        assert!((guided_phase(&p, 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let lg = p.guided_wavelength();
        assert!((guided_phase(&p, lg) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((guided_phase(&p, lg / 2.0) - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gain_directly_below_pa() {
        let p = params(1, 1);
        let layout = PinchLayout::new(&p, vec![vec![4.0]]).unwrap();
        let user = Point3::ground(4.0, p.waveguide_y(0));
        let gain = freespace_gain(&layout, &p, &user, 0, 0);
        assert!((gain.norm() - p.eta().sqrt() / 3.0).abs() < 1e-18);
    }

    #[test]
    fn gain_halves_when_distance_doubles() {
        let p = params(1, 1);
        let a = spherical_gain(&p, 3.0).norm();
        let b = spherical_gain(&p, 6.0).norm();
        assert!((a / b - 2.0).abs() < 1e-13);
    }

    #[test]
    fn single_path_psi() {
        let p = params(1, 1);
        let layout = PinchLayout::new(&p, vec![vec![2.0]]).unwrap();
        let users = UserSet::new(vec![Point3::ground(6.0, 1.0)]).unwrap();
        let ch = build_channels(&layout, &p, &users).unwrap();
        let d = users.get(0).distance(&layout.position(0, 0));
        assert_eq!(ch.psi.shape(), (1, 1));
        assert!((ch.psi[(0, 0)].norm() - p.eta().sqrt() / d).abs() < 1e-18);
    }

    #[test]
    fn psi_sum_matches_dense_product() {
        let p = params(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let layout = random_layout(&p, &mut rng);
            let users = UserSet::uniform(&p, 3, &mut rng);
            let ch = build_channels(&layout, &p, &users).unwrap();
            let dense = ch.psi_dense();
            let scale = dense.norm();
            assert!((&dense - &ch.psi).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn g_is_unit_modulus_block_diagonal() {
        let p = params(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layout = random_layout(&p, &mut rng);
        let users = UserSet::uniform(&p, 2, &mut rng);
        let ch = build_channels(&layout, &p, &users).unwrap();
        for row in 0..12 {
            for col in 0..4 {
                let v = ch.g[(row, col)];
                if row / 3 == col {
                    assert!((v.norm() - 1.0).abs() < 1e-12);
                } else {
                    assert_eq!(v, Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn h_magnitude_and_phase() {
        let p = params(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout = random_layout(&p, &mut rng);
        let users = UserSet::uniform(&p, 2, &mut rng);
        let ch = build_channels(&layout, &p, &users).unwrap();
        for m in 0..4 {
            for n in 0..3 {
                for k in 0..2 {
                    let d = users.get(k).distance(&layout.position(m, n));
                    let entry = ch.h[(m * 3 + n, k)];
                    let rel = (entry.norm() * d - p.eta().sqrt()).abs() / p.eta().sqrt();
                    assert!(rel < 1e-12);
                    // h^H entries carry -2 pi d / lambda.
                    let expected = (-2.0 * PI * d / p.wavelength()).rem_euclid(2.0 * PI);
                    let got = entry.conj().arg().rem_euclid(2.0 * PI);
                    let diff = (expected - got).abs();
                    assert!(diff.min(2.0 * PI - diff) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn permuting_users_permutes_columns() {
        let p = params(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layout = random_layout(&p, &mut rng);
        let users = UserSet::uniform(&p, 3, &mut rng);
        let swapped = UserSet::new(vec![users.get(2), users.get(0), users.get(1)]).unwrap();
        let a = build_channels(&layout, &p, &users).unwrap();
        let b = build_channels(&layout, &p, &swapped).unwrap();
        for m in 0..4 {
            assert_eq!(a.psi[(m, 2)], b.psi[(m, 0)]);
            assert_eq!(a.psi[(m, 0)], b.psi[(m, 1)]);
            assert_eq!(a.psi[(m, 1)], b.psi[(m, 2)]);
        }
    }

    #[test]
    fn waveguide_coefficient_is_conjugate_psi() {
        let p = params(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layout = random_layout(&p, &mut rng);
        let users = UserSet::uniform(&p, 2, &mut rng);
        let ch = build_channels(&layout, &p, &users).unwrap();
        for m in 0..3 {
            for k in 0..2 {
                let a = waveguide_coefficient(&layout, &p, &users.get(k), m);
                assert!((a - ch.psi[(m, k)].conj()).norm() < 1e-18);
                let partial: Complex64 = (0..4)
                    .map(|n| pa_contribution(&p, &layout, &users.get(k), m, layout.x(m, n)))
                    .sum();
                assert!((partial - a).norm() < 1e-15);
            }
        }
    }
}
