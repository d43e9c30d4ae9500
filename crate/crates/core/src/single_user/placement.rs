//! Coarse comb placement and the refinement sweep over all waveguides.

use serde::{Deserialize, Serialize};

use super::icr::{icr_refine, IcrContext, IcrSolution, RefineDirection, DEFAULT_K_CAP};
use crate::error::{Error, Result};
use crate::layout::{PinchLayout, Point3};
use crate::params::SystemParams;

/// Index of the reference PA within a waveguide (the central PA, rounding
/// down for even `N`).
pub fn reference_index(pas: usize) -> usize {
    pas.saturating_sub(1) / 2
}

/// Distance kept between the comb and the region edges so the refined
/// offsets cannot overflow `[0, D_x]`. Each refinement moves a PA by less
/// than `lambda / (n_eff - 1)`.
fn edge_margin(params: &SystemParams, width: f64) -> f64 {
    let step = if params.effective_index > 1.0 {
        params.wavelength() / (params.effective_index - 1.0)
    } else {
        params.wavelength()
    };
    let wanted = params.pas_per_waveguide as f64 * step;
    wanted.min(0.5 * (params.region_x - width)).max(0.0)
}

/// Coarse comb of `N` PAs spaced by the minimum spacing and centred on the
/// user's x, identical on every waveguide, plus the shift applied to fit it
/// inside the region.
pub fn coarse_comb(params: &SystemParams, user: &Point3) -> Result<(Vec<f64>, f64)> {
    let n = params.pas_per_waveguide;
    if n as f64 * params.min_spacing > params.region_x {
        return Err(Error::RegionTooSmall {
            pas: n,
            spacing: params.min_spacing,
            extent: params.region_x,
        });
    }
    let width = (n as f64 - 1.0) * params.min_spacing;
    let centre = (n as f64 - 1.0) / 2.0;
    let start = user.x - centre * params.min_spacing;
    let margin = edge_margin(params, width);
    let clamped = start.clamp(margin, params.region_x - width - margin);
    let shift = clamped - start;
    if shift != 0.0 {
        log::debug!("coarse comb shifted by {shift:.6} m to fit the region");
    }
    let comb = (0..n).map(|i| clamped + i as f64 * params.min_spacing).collect();
    Ok((comb, shift))
}

/// Coarse layout: the same comb on every waveguide.
pub fn coarse_placement(params: &SystemParams, user: &Point3) -> Result<PinchLayout> {
    params.validate()?;
    let (comb, _) = coarse_comb(params, user)?;
    PinchLayout::new(params, vec![comb; params.waveguide_count])
}

/// One refinement step of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub waveguide: usize,
    pub index: usize,
    pub context: IcrContext,
    pub solution: IcrSolution,
    /// True when the refined coordinate left the region and the coarse
    /// position was kept instead.
    pub kept_coarse: bool,
}

/// Full output of [`place_all_traced`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementTrace {
    pub coarse: PinchLayout,
    pub layout: PinchLayout,
    pub shift: f64,
    pub records: Vec<RefinementRecord>,
    pub warnings: Vec<String>,
}

impl PlacementTrace {
    /// Largest wrap index magnitude used by any refinement.
    pub fn max_k(&self) -> u64 {
        self.records.iter().map(|r| r.solution.k.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Refined layout for `user`; see [`place_all_traced`].
pub fn place_all(params: &SystemParams, user: &Point3) -> Result<PinchLayout> {
    Ok(place_all_traced(params, user)?.layout)
}

/// Coarse placement followed by phase refinement of every PA except the
/// reference PA on the first waveguide.
///
/// Per waveguide: the central PA is aligned to the first waveguide's
/// reference (skipped for `m = 0`), then PAs to its right are aligned one by
/// one to their refined left neighbour, then PAs to its left to their
/// refined right neighbour.
pub fn place_all_traced(params: &SystemParams, user: &Point3) -> Result<PlacementTrace> {
    params.validate()?;
    let (comb, shift) = coarse_comb(params, user)?;
    let coarse = PinchLayout::new(params, vec![comb.clone(); params.waveguide_count])?;
    let n_count = params.pas_per_waveguide;
    let c = reference_index(n_count);
    let h = params.waveguide_height;
    let reference = Point3::new(comb[c], params.waveguide_y(0), h);

    let mut columns = vec![comb.clone(); params.waveguide_count];
    let mut records = Vec::new();
    let mut warnings = Vec::new();

    for m in 0..params.waveguide_count {
        let y = params.waveguide_y(m);
        let mut step = |direction, anchor_x: f64, anchor_y: f64, base_x: f64, n: usize, col: &mut Vec<f64>| -> Result<()> {
            let context = IcrContext {
                direction,
                anchor: Point3::new(anchor_x, anchor_y, h),
                base_x,
                waveguide_y: y,
                user: *user,
                k_cap: DEFAULT_K_CAP,
            };
            let solution = icr_refine(&context, params)?;
            let inside = (0.0..=params.region_x).contains(&solution.x);
            if inside {
                col[n] = solution.x;
            } else {
                warnings.push(format!(
                    "PA ({m}, {n}) refined to x = {:.6} outside the region; kept x = {:.6}",
                    solution.x, col[n]
                ));
                log::warn!("{}", warnings.last().unwrap());
            }
            records.push(RefinementRecord {
                waveguide: m,
                index: n,
                context,
                solution,
                kept_coarse: !inside,
            });
            Ok(())
        };

        let mut col = columns[m].clone();
        if m > 0 {
            step(RefineDirection::CrossWaveguide, reference.x, reference.y, comb[c], c, &mut col)?;
        }
        for n in c + 1..n_count {
            let anchor = col[n - 1];
            step(RefineDirection::PositiveX, anchor, y, comb[n - 1] + params.min_spacing, n, &mut col)?;
        }
        for n in (0..c).rev() {
            let anchor = col[n + 1];
            step(RefineDirection::NegativeX, anchor, y, comb[n + 1] - params.min_spacing, n, &mut col)?;
        }
        columns[m] = col;
    }

    let layout = PinchLayout::new(params, columns)?;
    Ok(PlacementTrace {
        coarse,
        layout,
        shift,
        records,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn phase(params: &SystemParams, layout: &PinchLayout, user: &Point3, m: usize, n: usize) -> f64 {
        let d = layout.position(m, n).distance(user);
        2.0 * PI * d / params.wavelength() + 2.0 * PI * layout.feed_distance(m, n) / params.guided_wavelength()
    }

    fn wrapped_gap(a: f64, b: f64) -> f64 {
        let r = (a - b).rem_euclid(2.0 * PI);
        r.min(2.0 * PI - r)
    }

    #[test]
    fn comb_is_centred_with_min_spacing() {
        let params = SystemParams::default();
        let user = Point3::ground(5.0, 5.0);
        let (comb, shift) = coarse_comb(&params, &user).unwrap();
        assert_eq!(shift, 0.0);
        let d = params.min_spacing;
        assert!((comb[0] - (5.0 - d)).abs() < 1e-12);
        assert!((comb[1] - 5.0).abs() < 1e-12);
        assert!((comb[2] - (5.0 + d)).abs() < 1e-12);
        let single = SystemParams { pas_per_waveguide: 1, ..params };
        assert_eq!(coarse_comb(&single, &user).unwrap().0, vec![5.0]);
    }

    #[test]
    fn edge_user_comb_is_shifted_inside() {
        let params = SystemParams::default();
        for x in [0.0, 10.0] {
            let user = Point3::ground(x, 5.0);
            let (comb, shift) = coarse_comb(&params, &user).unwrap();
            assert!(shift != 0.0);
            assert!(comb.iter().all(|v| (0.0..=10.0).contains(v)));
        }
    }

    #[test]
    fn oversized_comb_is_rejected() {
        let params = SystemParams {
            pas_per_waveguide: 2000,
            ..SystemParams::default()
        };
        let err = coarse_placement(&params, &Point3::ground(5.0, 5.0));
        assert!(matches!(err, Err(Error::RegionTooSmall { .. })));
    }

    #[test]
    fn single_pa_single_waveguide_is_untouched() {
        let params = SystemParams {
            waveguide_count: 1,
            pas_per_waveguide: 1,
            ..SystemParams::default()
        };
        let user = Point3::ground(3.3, 7.1);
        let trace = place_all_traced(&params, &user).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.layout, trace.coarse);
    }

    #[test]
    fn all_phases_are_congruent() {
        let params = SystemParams::default();
        for user in [Point3::ground(5.0, 5.0), Point3::ground(1.7, 8.2), Point3::ground(9.1, 0.4)] {
            let trace = place_all_traced(&params, &user).unwrap();
            assert!(trace.warnings.is_empty());
            let layout = &trace.layout;
            let p0 = phase(&params, layout, &user, 0, reference_index(3));
            for m in 0..4 {
                for n in 0..3 {
                    let gap = wrapped_gap(phase(&params, layout, &user, m, n), p0);
                    assert!(gap < 1e-4, "({m}, {n}) off by {gap}");
                }
            }
        }
    }

    #[test]
    fn placement_refines_every_other_pa() {
        let params = SystemParams::default();
        let trace = place_all_traced(&params, &Point3::ground(4.0, 6.0)).unwrap();
        assert_eq!(trace.records.len(), 4 * 3 - 1);
        assert!(trace.max_k() >= 1);
    }
}
