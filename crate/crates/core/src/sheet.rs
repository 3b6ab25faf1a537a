//! Step-like branch functions of `arg x` cut along a spiral, their height
//! functions `h = θ/2π`, and the normalized area difference `D(t)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::{AnnularGrid, ScalarField};
use crate::spiral_ode::SpiralPolyline;
use crate::vec2::{arg_in_window, wrap_2pi, Vec2};
use crate::wulff::WulffShape;

/// Which curve generated a height field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightSource {
    Discrete,
    Levelset,
}

/// `h` at every node of the grid; `NaN` at inactive nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub t: f64,
    pub source: HeightSource,
    pub n: usize,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl HeightField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    /// Active-node values with their indices.
    pub fn active(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(move |(k, &v)| (k % self.n, k / self.n, v))
    }

    /// Rows `(i, j, x, y, h)` for debugging dumps.
    pub fn write_csv<W: std::io::Write>(&self, grid: &AnnularGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "x", "y", "h"])?;
        for (i, j, h) in self.active() {
            let x = grid.point(i, j);
            w.serialize((i as i64 - grid.half, j as i64 - grid.half, x.x, x.y, h))?;
        }
        w.flush().map_err(|e| Error::io("<height dump>", e))?;
        Ok(())
    }
}

/// Half-plane pair `{x·N_{j+1} < s_{j+1}, x·N_j ≥ s_j}` bounding the
/// region swept by facet `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub normal_next: Vec2,
    pub support_next: f64,
    pub normal: Vec2,
    pub support: f64,
}

impl Region {
    #[inline]
    pub fn contains(&self, x: Vec2) -> bool {
        x.dot(self.normal_next) < self.support_next && x.dot(self.normal) >= self.support
    }
}

/// The regions `R_0, …, R_{k−1}` of a discrete spiral and the window of
/// its base branch.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStack {
    pub regions: Vec<Region>,
    /// `Θ_k` takes values in `[window_start, window_start + 2π)`.
    pub window_start: f64,
}

impl RegionStack {
    pub fn new(shape: &WulffShape, polyline: &SpiralPolyline) -> Self {
        let k = polyline.k();
        let regions = (0..k)
            .map(|j| Region {
                normal_next: shape.normal(j + 1),
                support_next: polyline.support_value(shape, j + 1),
                normal: shape.normal(j),
                support: polyline.support_value(shape, j),
            })
            .collect();
        // φ_{k̄} + 2πn with k = k̄ + nN
        let window_start = shape.phi_unwrapped(k) - FRAC_PI_2;
        RegionStack { regions, window_start }
    }

    /// `Θ_k(x) − 2π Σ_j χ_{R_j}(x)`.
    pub fn theta(&self, x: Vec2) -> Result<f64> {
        if x == Vec2::ZERO {
            return Err(Error::Height("θ_D is undefined at the center".into()));
        }
        let mut th = arg_in_window(x, self.window_start);
        for r in self.regions.iter().rev() {
            if r.contains(x) {
                th -= TAU;
            }
        }
        Ok(th)
    }
}

/// Branch of `arg x` whose only discontinuity is the discrete spiral.
pub fn theta_d(shape: &WulffShape, polyline: &SpiralPolyline, x: Vec2) -> Result<f64> {
    RegionStack::new(shape, polyline).theta(x)
}

/// `h_D = θ_D/2π` at the active nodes.
pub fn h_d_field(shape: &WulffShape, polyline: &SpiralPolyline, grid: &AnnularGrid) -> Result<HeightField> {
    let stack = RegionStack::new(shape, polyline);
    let n = grid.n;
    let mut values = vec![f64::NAN; n * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(j, row)| -> Result<()> {
            for (i, v) in row.iter_mut().enumerate() {
                if grid.is_active(i, j) {
                    *v = stack.theta(grid.point(i, j))? / TAU;
                }
            }
            Ok(())
        })?;
    Ok(HeightField {
        t: polyline.t,
        source: HeightSource::Discrete,
        n,
        dx: grid.dx,
        values,
    })
}

/// `θ_L = u − w` with `w = (u − arg x) mod 2π ∈ [0, 2π)`.
#[inline]
pub fn theta_l(u: f64, x: Vec2) -> f64 {
    u - wrap_2pi(u - x.angle())
}

/// `h_L = θ_L/2π` at the active nodes.
pub fn h_l_field(u: &ScalarField, grid: &AnnularGrid) -> HeightField {
    let n = grid.n;
    let mut values = vec![f64::NAN; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            if grid.is_active(i, j) {
                *v = theta_l(u.values[grid.idx(i, j)], grid.point(i, j)) / TAU;
            }
        }
    });
    HeightField {
        t: u.t,
        source: HeightSource::Levelset,
        n,
        dx: grid.dx,
        values,
    }
}

/// `D = Σ |h_a − h_b| Δx² / (#active · Δx²)` over the active nodes.
pub fn area_difference(a: &HeightField, b: &HeightField) -> Result<f64> {
    if a.n != b.n || a.dx != b.dx {
        return Err(Error::Height(format!(
            "grid mismatch: {}² nodes at Δx = {} vs {}² at Δx = {}",
            a.n, a.dx, b.n, b.dx
        )));
    }
    // fixed-size chunks summed in order keep the result independent of the
    // thread count
    let partial: Vec<Option<(f64, usize)>> = a
        .values
        .par_chunks(a.n)
        .zip(b.values.par_chunks(b.n))
        .map(|(ra, rb)| {
            let mut sum = 0.0;
            let mut count = 0;
            for (&x, &y) in ra.iter().zip(rb) {
                match (x.is_nan(), y.is_nan()) {
                    (true, true) => {}
                    (false, false) => {
                        sum += (x - y).abs();
                        count += 1;
                    }
                    _ => return None,
                }
            }
            Some((sum, count))
        })
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in partial {
        let (s, c) = p.ok_or_else(|| Error::Height("active masks differ".into()))?;
        sum += s;
        count += c;
    }
    if count == 0 {
        return Err(Error::Height("no active nodes".into()));
    }
    let cell = a.dx * a.dx;
    Ok(sum * cell / (count as f64 * cell))
}

/// One row of a comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub t: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// `D(t_k)` from paired discrete polylines and level-set snapshots.
pub fn diff_series(
    shape: &WulffShape,
    polylines: &[SpiralPolyline],
    snapshots: &[ScalarField],
    grid: &AnnularGrid,
) -> Result<Vec<DiffRow>> {
    if polylines.len() != snapshots.len() {
        return Err(Error::Height(format!(
            "{} discrete samples vs {} level-set samples",
            polylines.len(),
            snapshots.len()
        )));
    }
    polylines
        .iter()
        .zip(snapshots)
        .map(|(p, u)| {
            if (p.t - u.t).abs() > 1e-12 * (1.0 + p.t.abs()) {
                return Err(Error::Height(format!("sample time mismatch: {} vs {}", p.t, u.t)));
            }
            let hd = h_d_field(shape, p, grid)?;
            let hl = h_l_field(u, grid);
            Ok(DiffRow {
                t: p.t,
                d: area_difference(&hd, &hl)?,
            })
        })
        .collect()
}

/// Constant level-set datum whose zero set `{θ ≡ u₀}` is the initial ray
/// `{λT₀}` and whose branch `θ_L` takes the same sheet as `θ_D` at `t = 0`.
pub fn aligned_initial_value(shape: &WulffShape) -> f64 {
    shape.facet(0).phi + 3.0 * PI / 2.0
}
