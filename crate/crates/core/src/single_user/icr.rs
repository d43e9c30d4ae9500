//! Iterative closed-form refinement (ICR) of one PA position.
//!
//! A PA is shifted from a starting coordinate by an offset `delta >= 0` so
//! that its received-path phase (free-space plus in-waveguide) differs from
//! an already-placed anchor PA by a positive multiple of `2 pi`. Squaring
//! the alignment condition gives a quadratic in `delta` whose roots are
//! screened for sign and for the spurious branch introduced by squaring.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Point3;
use crate::params::SystemParams;

pub const DEFAULT_K_CAP: u32 = 10_000;

/// Root-acceptance slack, in units of the free-space wavelength.
const ROOT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefineDirection {
    /// PA to the right of its anchor on the same waveguide.
    PositiveX,
    /// PA to the left of its anchor on the same waveguide.
    NegativeX,
    /// Central PA of another waveguide, aligned to the reference PA.
    CrossWaveguide,
}

/// Everything needed to refine one PA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcrContext {
    pub direction: RefineDirection,
    /// The already-refined PA whose phase is matched.
    pub anchor: Point3,
    /// Coordinate the offset is measured from: previous coarse PA plus the
    /// minimum spacing (positive), next coarse PA minus it (negative), or
    /// the coarse central PA (cross-waveguide).
    pub base_x: f64,
    /// y of the waveguide carrying the refined PA.
    pub waveguide_y: f64,
    pub user: Point3,
    pub k_cap: u32,
}

/// `a delta^2 + b delta + c = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticCoeffs {
    /// Real roots, computed without cancellation.
    pub fn roots(&self) -> Vec<f64> {
        let QuadraticCoeffs { a, b, c } = *self;
        if a.abs() < 1e-14 * b.abs().max(1.0) {
            return if b != 0.0 { vec![-c / b] } else { Vec::new() };
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut roots = vec![q / a];
        if q != 0.0 {
            roots.push(c / q);
        }
        roots
    }
}

/// Accepted refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcrSolution {
    /// Offset `delta >= 0` from `base_x`.
    pub offset: f64,
    /// Phase-wrap index at which the root was found.
    pub k: i64,
    /// Refined x-coordinate.
    pub x: f64,
}

impl IcrContext {
    fn a1(&self, params: &SystemParams) -> f64 {
        let dy = self.waveguide_y - self.user.y;
        dy * dy + params.waveguide_height * params.waveguide_height
    }

    fn index_ratio(params: &SystemParams) -> f64 {
        params.wavelength() / params.guided_wavelength()
    }

    /// Range term whose square root was squared away; a root is genuine only
    /// if `range_term(k, delta) >= 0`.
    pub fn range_term(&self, params: &SystemParams, k: i64, delta: f64) -> f64 {
        let lambda = params.wavelength();
        let ratio = Self::index_ratio(params);
        let anchor_dist = self.anchor.distance(&self.user);
        match self.direction {
            RefineDirection::PositiveX | RefineDirection::CrossWaveguide => {
                k as f64 * lambda + anchor_dist - ratio * (self.base_x - self.anchor.x) - ratio * delta
            }
            RefineDirection::NegativeX => {
                anchor_dist - k as f64 * lambda + ratio * (self.anchor.x - self.base_x) + ratio * delta
            }
        }
    }

    /// Quadratic for phase-wrap index `k`.
    pub fn coefficients(&self, params: &SystemParams, k: i64) -> QuadraticCoeffs {
        match self.direction {
            RefineDirection::PositiveX => self.forward_coeffs(params, k),
            RefineDirection::NegativeX => self.backward_coeffs(params, k),
            RefineDirection::CrossWaveguide => self.cross_coeffs(params, k),
        }
    }

    fn forward_coeffs(&self, params: &SystemParams, k: i64) -> QuadraticCoeffs {
        let ratio = Self::index_ratio(params);
        let s = self.base_x - self.user.x;
        let r = self.range_term(params, k, 0.0);
        QuadraticCoeffs {
            a: 1.0 - ratio * ratio,
            b: 2.0 * s + 2.0 * ratio * r,
            c: s * s + self.a1(params) - r * r,
        }
    }

    fn backward_coeffs(&self, params: &SystemParams, k: i64) -> QuadraticCoeffs {
        let ratio = Self::index_ratio(params);
        let s = self.base_x - self.user.x;
        let r = self.range_term(params, k, 0.0);
        QuadraticCoeffs {
            a: 1.0 - ratio * ratio,
            b: -2.0 * s - 2.0 * ratio * r,
            c: s * s + self.a1(params) - r * r,
        }
    }

    fn cross_coeffs(&self, params: &SystemParams, k: i64) -> QuadraticCoeffs {
        // Same algebra as the forward case; the anchor sits on the reference
        // waveguide, so only its distance to the user enters.
        self.forward_coeffs(params, k)
    }

    /// Coordinate reached with offset `delta`.
    pub fn candidate_x(&self, delta: f64) -> f64 {
        match self.direction {
            RefineDirection::NegativeX => self.base_x - delta,
            _ => self.base_x + delta,
        }
    }

    /// Received-phase difference that the refinement drives to `2 k pi`,
    /// oriented so it grows with `delta`.
    pub fn phase_gap(&self, params: &SystemParams, delta: f64) -> f64 {
        let x = self.candidate_x(delta);
        let pa = Point3::new(x, self.waveguide_y, params.waveguide_height);
        let free = 2.0 * PI / params.wavelength()
            * (pa.distance(&self.user) - self.anchor.distance(&self.user));
        let guided = 2.0 * PI / params.guided_wavelength() * (x - self.anchor.x);
        match self.direction {
            RefineDirection::NegativeX => -(free + guided),
            _ => free + guided,
        }
    }

    /// Smallest wrap index whose alignment point lies at `delta >= 0`.
    ///
    /// Neighbours on the same waveguide need `k >= 1`, otherwise the PA
    /// would land on its anchor. Across waveguides any integer is allowed,
    /// since the two paths differ by an arbitrary number of wavelengths.
    pub fn first_wrap_index(&self, params: &SystemParams) -> i64 {
        let turns = self.phase_gap(params, 0.0) / (2.0 * PI);
        let k = (turns - 1e-9).ceil() as i64;
        match self.direction {
            RefineDirection::CrossWaveguide => k,
            _ => k.max(1),
        }
    }
}

/// Smallest valid offset at the smallest admissible wrap index, searching
/// upwards from [`IcrContext::first_wrap_index`] while `|k| <= k_cap`.
pub fn icr_refine(ctx: &IcrContext, params: &SystemParams) -> Result<IcrSolution> {
    let slack = ROOT_SLACK * params.wavelength();
    let cap = i64::from(ctx.k_cap);
    let start = ctx.first_wrap_index(params);
    let floor = match ctx.direction {
        RefineDirection::CrossWaveguide => start - 1,
        _ => (start - 1).max(1),
    };
    for k in floor.max(-cap)..=cap {
        let best = ctx
            .coefficients(params, k)
            .roots()
            .into_iter()
            .filter(|&delta| delta >= -slack && ctx.range_term(params, k, delta) >= -slack)
            .map(|delta| delta.max(0.0))
            .min_by(|a, b| a.total_cmp(b));
        if let Some(offset) = best {
            return Ok(IcrSolution {
                offset,
                k,
                x: ctx.candidate_x(offset),
            });
        }
    }
    Err(Error::KCapExceeded { cap: ctx.k_cap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(direction: RefineDirection, params: &SystemParams) -> IcrContext {
        let user = Point3::ground(4.2, 2.0);
        let anchor_x = 4.2 + 0.013;
        let base_x = match direction {
            RefineDirection::PositiveX => anchor_x + params.min_spacing - 0.002,
            RefineDirection::NegativeX => anchor_x - params.min_spacing + 0.001,
            RefineDirection::CrossWaveguide => anchor_x,
        };
        let waveguide_y = match direction {
            RefineDirection::CrossWaveguide => params.waveguide_y(2),
            _ => params.waveguide_y(1),
        };
        let anchor_y = match direction {
            RefineDirection::CrossWaveguide => params.waveguide_y(0),
            _ => waveguide_y,
        };
        IcrContext {
            direction,
            anchor: Point3::new(anchor_x, anchor_y, params.waveguide_height),
            base_x,
            waveguide_y,
            user,
            k_cap: DEFAULT_K_CAP,
        }
    }

    const ALL: [RefineDirection; 3] = [
        RefineDirection::PositiveX,
        RefineDirection::NegativeX,
        RefineDirection::CrossWaveguide,
    ];

    #[test]
    fn leading_coefficient_is_one_minus_index_squared() {
        let params = SystemParams::default();
        for dir in ALL {
            let c = ctx(dir, &params).coefficients(&params, 3);
            assert!((c.a - (1.0 - 1.96)).abs() < 1e-12);
            assert!((c.a + 0.96).abs() < 1e-12);
        }
    }

    #[test]
    fn refined_phase_is_multiple_of_two_pi() {
        let params = SystemParams::default();
        for dir in ALL {
            let c = ctx(dir, &params);
            let sol = icr_refine(&c, &params).unwrap();
            assert!(sol.offset >= 0.0);
            let gap = c.phase_gap(&params, sol.offset);
            let target = 2.0 * PI * sol.k as f64;
            assert!((gap - target).abs() < 1e-6, "{dir:?}: gap {gap}, k {}", sol.k);
        }
    }

    #[test]
    fn no_smaller_offset_aligns() {
        let params = SystemParams::default();
        for dir in ALL {
            let c = ctx(dir, &params);
            let sol = icr_refine(&c, &params).unwrap();
            // The gap must stay strictly below 2 pi k before the root and
            // never touch a smaller positive multiple of 2 pi.
            let steps = 2000;
            for i in 0..steps {
                let d = sol.offset * i as f64 / steps as f64;
                let turns = c.phase_gap(&params, d) / (2.0 * PI);
                assert!(turns < sol.k as f64 + 1e-9);
            }
            if sol.k > 1 || dir == RefineDirection::CrossWaveguide {
                assert!(c.phase_gap(&params, 0.0) / (2.0 * PI) > (sol.k - 1) as f64 - 1e-9);
            }
        }
    }

    #[test]
    fn stable_roots_match_textbook_formula() {
        let q = QuadraticCoeffs { a: -0.96, b: 17.3, c: -0.05 };
        let mut roots = q.roots();
        roots.sort_by(|a, b| a.total_cmp(b));
        let disc = (q.b * q.b - 4.0 * q.a * q.c).sqrt();
        let mut naive = [(-q.b + disc) / (2.0 * q.a), (-q.b - disc) / (2.0 * q.a)];
        naive.sort_by(|a, b| a.total_cmp(b));
        for (r, n) in roots.iter().zip(naive) {
            assert!((r - n).abs() <= 1e-9 * n.abs().max(1e-6));
        }
        assert!(QuadraticCoeffs { a: 1.0, b: 0.0, c: 1.0 }.roots().is_empty());
    }

    #[test]
    fn far_user_reduces_to_guided_period() {
        // With the user far away along y, moving the PA changes the free-space
        // path negligibly, so alignment needs a full guided wavelength.
        let params = SystemParams::default();
        let user = Point3::ground(5.0, 1e7);
        let anchor = Point3::new(5.0, params.waveguide_y(0), params.waveguide_height);
        let c = IcrContext {
            direction: RefineDirection::PositiveX,
            anchor,
            base_x: 5.0,
            waveguide_y: params.waveguide_y(0),
            user,
            k_cap: DEFAULT_K_CAP,
        };
        let sol = icr_refine(&c, &params).unwrap();
        assert_eq!(sol.k, 1);
        assert!((sol.offset - params.guided_wavelength()).abs() < 1e-9);
    }

    #[test]
    fn cross_alignment_stays_local() {
        // Waveguide much closer to the user than the reference: the path
        // difference spans hundreds of wavelengths, yet the PA moves by less
        // than one alignment period.
        let params = SystemParams::default();
        let user = Point3::ground(2.0, 9.0);
        let c = IcrContext {
            direction: RefineDirection::CrossWaveguide,
            anchor: Point3::new(2.0, params.waveguide_y(0), params.waveguide_height),
            base_x: 2.0,
            waveguide_y: params.waveguide_y(2),
            user,
            k_cap: DEFAULT_K_CAP,
        };
        let sol = icr_refine(&c, &params).unwrap();
        assert!(sol.k < 0);
        let period = params.wavelength() / (params.effective_index - 1.0);
        assert!(sol.offset < period);
        assert!((c.phase_gap(&params, sol.offset) - 2.0 * PI * sol.k as f64).abs() < 1e-6);
    }

    #[test]
    fn k_cap_is_enforced() {
        let params = SystemParams::default();
        let mut c = ctx(RefineDirection::PositiveX, &params);
        // Start many periods behind the anchor so k = 1 has no valid root.
        c.base_x = c.anchor.x + 20.0 * params.guided_wavelength();
        c.k_cap = 2;
        assert!(matches!(icr_refine(&c, &params), Err(Error::KCapExceeded { cap: 2 })));
        c.k_cap = DEFAULT_K_CAP;
        assert!(icr_refine(&c, &params).unwrap().k > 2);
    }
}
