//! Row-streaming explicit update. Each worker sweeps a band of rows,
//! keeping only a few rows of edge increments and face fluxes alive, and
//! writes into a second buffer. Produces the same values, bit for bit, as
//! the multi-pass reference in the parent module.

use rayon::prelude::*;

use super::regularize::{DiagonalFlux, Flux, SectorFlux, SquareFlux, XiModel};
use super::{LevelSetConfig, ScalarField, Stencil};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Advances `u` by `dt`, using `scratch` as the output buffer.
pub(super) fn advance(u: &mut ScalarField, scratch: &mut Vec<f64>, cfg: &LevelSetConfig, dt: f64) -> Result<()> {
    let eps = cfg.flux.eps;
    let bad = match &cfg.flux.model {
        XiModel::Square => sweep(&SquareFlux(eps), &u.values, scratch, cfg, dt),
        XiModel::Diagonal => sweep(&DiagonalFlux(eps), &u.values, scratch, cfg, dt),
        XiModel::Sectors(d) => sweep(&SectorFlux(d, eps), &u.values, scratch, cfg, dt),
    };
    std::mem::swap(&mut u.values, scratch);
    u.t += dt;
    if let Some(k) = bad {
        let g = &cfg.grid;
        let (i, j) = (k % g.n, k / g.n);
        let x = g.point(i, j);
        return Err(Error::NonFinite {
            i: i as i64 - g.half,
            j: j as i64 - g.half,
            x: x.x,
            y: x.y,
            t: u.t,
        });
    }
    Ok(())
}

fn band_rows(n: usize) -> usize {
    let threads = rayon::current_num_threads().max(1);
    (n / (4 * threads)).max(16)
}

struct Edges<'a> {
    u: &'a [f64],
    st: &'a Stencil,
    n: usize,
}

impl Edges<'_> {
    /// Increments along the x-edges of row `r` (zero outside the grid).
    fn wx(&self, r: isize, out: &mut [f64]) {
        let n = self.n;
        if r < 0 || r as usize >= n {
            out.fill(0.0);
            return;
        }
        let row = r as usize * n;
        let (u, c, o) = (
            &self.u[row..row + n],
            &self.st.coef_x[row..row + n],
            &self.st.offset_x[row..row + n],
        );
        for i in 0..n - 1 {
            out[i] = c[i] * (u[i + 1] - u[i]) - o[i];
        }
        out[n - 1] = 0.0;
    }

    /// Increments along the y-edges from row `r` to row `r + 1`.
    fn wy(&self, r: isize, out: &mut [f64]) {
        let n = self.n;
        if r < 0 || r as usize + 1 >= n {
            out.fill(0.0);
            return;
        }
        let row = r as usize * n;
        let (lo, hi) = (&self.u[row..row + n], &self.u[row + n..row + 2 * n]);
        let (c, o) = (&self.st.coef_y[row..row + n], &self.st.offset_y[row..row + n]);
        for i in 0..n {
            out[i] = c[i] * (hi[i] - lo[i]) - o[i];
        }
    }
}

/// `t[i] = (w[i−1] + w[i])/2` with `w[−1] = 0`.
fn average_along(w: &[f64], out: &mut [f64]) {
    let mut left = 0.0;
    for (o, &x) in out.iter_mut().zip(w) {
        *o = 0.5 * (left + x);
        left = x;
    }
}

fn mask_row(mask: &[bool], n: usize, r: isize) -> Option<&[bool]> {
    (r >= 0 && (r as usize) < n).then(|| &mask[r as usize * n..(r as usize + 1) * n])
}

/// Fluxes through the y-faces between rows `r` and `r + 1`.
fn y_faces<F: Flux>(
    flux: &F,
    n: usize,
    inv_dx: f64,
    lo: Option<&[bool]>,
    hi: Option<&[bool]>,
    wy: &[f64],
    t_lo: &[f64],
    t_hi: &[f64],
    out: &mut [f64],
) {
    if let (Some(lo), Some(hi)) = (lo, hi) {
        for i in 0..n {
            let pn = wy[i] * inv_dx;
            let pt = 0.5 * (t_lo[i] + t_hi[i]) * inv_dx;
            out[i] = flux.xi_y(Vec2::new(pt, pn));
        }
        for i in 0..n {
            match (lo[i], hi[i]) {
                (true, true) => {}
                (false, false) => out[i] = 0.0,
                (a, _) => {
                    let t = if a { t_lo[i] } else { t_hi[i] };
                    out[i] = flux.xi_y(Vec2::new(t * inv_dx, wy[i] * inv_dx));
                }
            }
        }
    } else {
        for i in 0..n {
            let a = lo.is_some_and(|m| m[i]);
            let b = hi.is_some_and(|m| m[i]);
            out[i] = if a || b {
                let t = if a { t_lo[i] } else { t_hi[i] };
                flux.xi_y(Vec2::new(t * inv_dx, 0.0))
            } else {
                0.0
            };
        }
    }
}

/// Computes rows of `out` from `u`; returns the first nonfinite node.
fn sweep<F: Flux>(flux: &F, u: &[f64], out: &mut Vec<f64>, cfg: &LevelSetConfig, dt: f64) -> Option<usize> {
    let g = &cfg.grid;
    let n = g.n;
    out.resize(n * n, 0.0);
    let band = band_rows(n);
    let inv_dx = 1.0 / g.dx;
    let mask = g.mask();
    let rho_c = cfg.params.capillary;
    let drive = cfg.params.driving_force;
    let scale = dt / cfg.mobility;
    let edges = Edges { u, st: &cfg.stencil, n };
    out.par_chunks_mut(n * band)
        .enumerate()
        .map(|(c, out_band)| {
            let j0 = (c * band) as isize;
            let mut bad: Option<usize> = None;
            let row_buf = || vec![0.0; n];
            let (mut wx_cur, mut wx_next, mut scratch) = (row_buf(), row_buf(), row_buf());
            let (mut tx_prev, mut tx_cur, mut tx_next) = (row_buf(), row_buf(), row_buf());
            let (mut wy_prev, mut wy_cur) = (row_buf(), row_buf());
            let mut ty = row_buf();
            let mut fx = vec![0.0; n + 1];
            let (mut fy_lo, mut fy_hi) = (row_buf(), row_buf());

            edges.wx(j0 - 1, &mut scratch);
            average_along(&scratch, &mut tx_prev);
            edges.wx(j0, &mut wx_cur);
            average_along(&wx_cur, &mut tx_cur);
            edges.wx(j0 + 1, &mut wx_next);
            average_along(&wx_next, &mut tx_next);
            edges.wy(j0 - 1, &mut wy_prev);
            edges.wy(j0, &mut wy_cur);
            y_faces(
                flux,
                n,
                inv_dx,
                mask_row(mask, n, j0 - 1),
                mask_row(mask, n, j0),
                &wy_prev,
                &tx_prev,
                &tx_cur,
                &mut fy_lo,
            );

            for (r, out_row) in out_band.chunks_mut(n).enumerate() {
                let j = j0 + r as isize;
                let row = j as usize * n;
                let m = &mask[row..row + n];
                for i in 0..n {
                    ty[i] = 0.5 * (wy_prev[i] + wy_cur[i]);
                }
                // interior faces in a straight loop, boundary faces patched after
                fx[0] = 0.0;
                fx[n] = 0.0;
                for f in 1..n {
                    let pn = wx_cur[f - 1] * inv_dx;
                    let pt = 0.5 * (ty[f - 1] + ty[f]) * inv_dx;
                    fx[f] = flux.xi_x(Vec2::new(pn, pt));
                }
                for f in 0..=n {
                    let a = f >= 1 && m[f - 1];
                    let b = f < n && m[f];
                    if a && b {
                        continue;
                    }
                    fx[f] = if !a && !b {
                        0.0
                    } else {
                        let pn = if f > 0 && f < n { wx_cur[f - 1] * inv_dx } else { 0.0 };
                        let t = if a { ty[f - 1] } else { ty[f] };
                        flux.xi_x(Vec2::new(pn, t * inv_dx))
                    };
                }
                y_faces(
                    flux,
                    n,
                    inv_dx,
                    Some(m),
                    mask_row(mask, n, j + 1),
                    &wy_cur,
                    &tx_cur,
                    &tx_next,
                    &mut fy_hi,
                );
                let u_row = &u[row..row + n];
                for i in 0..n {
                    if !m[i] {
                        out_row[i] = u_row[i];
                        continue;
                    }
                    let div = (fx[i + 1] - fx[i] + fy_hi[i] - fy_lo[i]) * inv_dx;
                    let p = Vec2::new(tx_cur[i] * inv_dx, ty[i] * inv_dx);
                    let v = u_row[i] + scale * flux.gamma(p) * (rho_c * div + drive);
                    if !v.is_finite() && bad.is_none() {
                        bad = Some(row + i);
                    }
                    out_row[i] = v;
                }

                // roll the window down one row
                std::mem::swap(&mut fy_lo, &mut fy_hi);
                std::mem::swap(&mut tx_prev, &mut tx_cur);
                std::mem::swap(&mut tx_cur, &mut tx_next);
                std::mem::swap(&mut wx_cur, &mut wx_next);
                edges.wx(j + 2, &mut wx_next);
                average_along(&wx_next, &mut tx_next);
                std::mem::swap(&mut wy_prev, &mut wy_cur);
                edges.wy(j + 1, &mut wy_cur);
            }
            bad
        })
        .reduce(|| None, |a, b| a.or(b))
}
