//! PA coordinates and user positions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Relative slack allowed on the spacing and boundary checks, so combs built
/// by repeated addition of the minimum spacing are not rejected for rounding.
const SPACING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Ground point at height zero.
    pub fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (self.x - other.x)
            .hypot(self.y - other.y)
            .hypot(self.z - other.z)
    }
}

/// Single-antenna users on the ground plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSet {
    positions: Vec<Point3>,
}

impl UserSet {
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParams("user set must not be empty".into()));
        }
        Ok(Self { positions })
    }

    /// Checks that every user sits inside the service rectangle at `z = 0`.
    pub fn validate_in(&self, params: &SystemParams) -> Result<()> {
        for (k, p) in self.positions.iter().enumerate() {
            let inside = (0.0..=params.region_x).contains(&p.x)
                && (0.0..=params.region_y).contains(&p.y)
                && p.z == 0.0;
            if !inside {
                return Err(Error::InvalidParams(format!(
                    "user {k} at ({}, {}, {}) lies outside the service region",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(())
    }

    /// Draws `count` users uniformly over the service rectangle.
    pub fn uniform<R: Rng + ?Sized>(params: &SystemParams, count: usize, rng: &mut R) -> Self {
        let positions = (0..count.max(1))
            .map(|_| {
                Point3::ground(
                    rng.random::<f64>() * params.region_x,
                    rng.random::<f64>() * params.region_y,
                )
            })
            .collect();
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn get(&self, k: usize) -> Point3 {
        self.positions[k]
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point3> {
        self.positions.iter()
    }
}

/// x-coordinates of all PAs: `columns[m][n]` is PA `n` on waveguide `m`.
///
/// Columns are always sorted ascending and satisfy the region and
/// minimum-spacing constraints; every constructor enforces this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchLayout {
    columns: Vec<Vec<f64>>,
    waveguide_y: Vec<f64>,
    height: f64,
    feed_x: f64,
}

impl PinchLayout {
    /// Builds a layout from per-waveguide x-coordinates. Each column is
    /// sorted, then validated against `[0, D_x]` and the minimum spacing.
    pub fn new(params: &SystemParams, mut columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != params.waveguide_count {
            return Err(Error::LayoutInvalid(format!(
                "expected {} waveguides, got {}",
                params.waveguide_count,
                columns.len()
            )));
        }
        for (m, col) in columns.iter_mut().enumerate() {
            if col.len() != params.pas_per_waveguide {
                return Err(Error::LayoutInvalid(format!(
                    "waveguide {m} has {} PAs, expected {}",
                    col.len(),
                    params.pas_per_waveguide
                )));
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::LayoutInvalid(format!(
                    "waveguide {m} has a non-finite coordinate"
                )));
            }
            col.sort_by(|a, b| a.total_cmp(b));
        }
        let layout = Self {
            columns,
            waveguide_y: (0..params.waveguide_count)
                .map(|m| params.waveguide_y(m))
                .collect(),
            height: params.waveguide_height,
            feed_x: params.feed_x(),
        };
        layout.check(params)?;
        Ok(layout)
    }

    /// N PAs per waveguide at the centres of N equal cells of `[0, D_x]`.
    pub fn uniform(params: &SystemParams) -> Result<Self> {
        let n = params.pas_per_waveguide;
        let cell = params.region_x / n as f64;
        let col: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * cell).collect();
        Self::new(params, vec![col; params.waveguide_count])
    }

    fn check(&self, params: &SystemParams) -> Result<()> {
        let edge_slack = SPACING_SLACK * params.region_x;
        let gap_slack = SPACING_SLACK * params.min_spacing;
        for (m, col) in self.columns.iter().enumerate() {
            for (n, &x) in col.iter().enumerate() {
                if x < -edge_slack || x > params.region_x + edge_slack {
                    return Err(Error::LayoutInvalid(format!(
                        "PA ({m}, {n}) at x = {x} lies outside [0, {}]",
                        params.region_x
                    )));
                }
                if n > 0 && x - col[n - 1] < params.min_spacing - gap_slack {
                    return Err(Error::LayoutInvalid(format!(
                        "PAs ({m}, {}) and ({m}, {n}) are {} m apart, below {}",
                        n - 1,
                        x - col[n - 1],
                        params.min_spacing
                    )));
                }
            }
        }
        Ok(())
    }

    /// Returns a copy with PA `(m, n)` moved to `x`, validated.
    pub fn with_position(&self, params: &SystemParams, m: usize, n: usize, x: f64) -> Result<Self> {
        let mut columns = self.columns.clone();
        columns[m][n] = x;
        Self::new(params, columns)
    }

    pub fn waveguides(&self) -> usize {
        self.columns.len()
    }

    pub fn pas_per_waveguide(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn x(&self, m: usize, n: usize) -> f64 {
        self.columns[m][n]
    }

    pub fn column(&self, m: usize) -> &[f64] {
        &self.columns[m]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn waveguide_y(&self, m: usize) -> f64 {
        self.waveguide_y[m]
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Feed point of waveguide `m`.
    pub fn feed(&self, m: usize) -> Point3 {
        Point3::new(self.feed_x, self.waveguide_y[m], self.height)
    }

    /// 3-D position of PA `(m, n)`.
    pub fn position(&self, m: usize, n: usize) -> Point3 {
        Point3::new(self.columns[m][n], self.waveguide_y[m], self.height)
    }

    /// In-waveguide propagation distance from the feed to PA `(m, n)`.
    pub fn feed_distance(&self, m: usize, n: usize) -> f64 {
        self.columns[m][n] - self.feed_x
    }
}
