//! Explicit finite-difference solver for the spiral level-set equation
//!
//! ```text
//! β̃ u_t − γ̃(∇(u − θ)) { ρ_c div ξ̃(∇(u − θ)) + U } = 0   in W = Ω \ B_ρ,
//! ν·∇(u − θ) = 0                                         on ∂W,
//! ```
//!
//! with `θ = arg x`. The spiral is `Γ_L(t) = {u − θ ≡ 0 mod 2π}`.
//!
//! `θ` is never evaluated on a branch. Differences of `w = u − θ` along grid
//! edges use the exact angle increment between the two endpoints, which is
//! single-valued as long as the edge avoids the origin (always true for
//! edges between active nodes). The divergence is in flux form: `ξ̃` is
//! evaluated at cell faces from the one-sided normal difference and the
//! averaged tangential difference. Boundary faces (to inactive nodes inside
//! `B_ρ` or to the outside of `Ω`) carry a zero normal difference of `w`,
//! which is the reflecting ghost-node realization of the Neumann condition.

pub mod contour;
mod kernel;
pub mod regularize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spiral_ode::EvolutionParams;
use crate::vec2::Vec2;

pub use contour::extract_contour;
pub use regularize::{sigma, zeta, RegularizedXi, XiModel};

/// Half-width of the computational box `Ω = [−1.5, 1.5]²`.
pub const DOMAIN_HALF_WIDTH: f64 = 1.5;

/// Grid spacing at refinement level 1.
pub const BASE_DX: f64 = 0.02;

/// `Δt = CFL_FACTOR · Δx²`.
pub const CFL_FACTOR: f64 = 0.1;

/// Rows per parallel work item.
const ROW_CHUNK: usize = 16;

/// Uniform grid `x_{i,j} = (iΔx, jΔx)`, `−75s ≤ i, j ≤ 75s`, with the
/// active mask `|x| > ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnularGrid {
    pub s: u32,
    /// `75s`: index offset of the origin.
    pub half: i64,
    /// Nodes per side, `150s + 1`.
    pub n: usize,
    pub dx: f64,
    pub rho: f64,
    active: Vec<bool>,
    active_count: usize,
}

impl AnnularGrid {
    pub fn new(s: u32, rho: f64) -> Result<Self> {
        if s == 0 {
            return Err(Error::LevelSetConfig("s must be ≥ 1".into()));
        }
        if !(rho > 0.0 && rho < DOMAIN_HALF_WIDTH) {
            return Err(Error::LevelSetConfig(format!(
                "center radius must lie in (0, {DOMAIN_HALF_WIDTH}), got {rho}"
            )));
        }
        let half = 75 * s as i64;
        let n = (2 * half + 1) as usize;
        let dx = BASE_DX / s as f64;
        let mut active = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let x = Vec2::new((i as i64 - half) as f64 * dx, (j as i64 - half) as f64 * dx);
                active[j * n + i] = x.norm() > rho;
            }
        }
        let active_count = active.iter().filter(|&&a| a).count();
        Ok(AnnularGrid {
            s,
            half,
            n,
            dx,
            rho,
            active,
            active_count,
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as i64 - self.half) as f64 * self.dx
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.coord(i), self.coord(j))
    }

    #[inline]
    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[j * self.n + i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    /// `|W|` as active-node count times `Δx²`.
    pub fn area(&self) -> f64 {
        self.active_count as f64 * self.dx * self.dx
    }

    /// Iterates `(i, j, x)` over active nodes.
    pub fn active_nodes(&self) -> impl Iterator<Item = (usize, usize, Vec2)> + '_ {
        (0..self.n).flat_map(move |j| {
            (0..self.n)
                .filter(move |&i| self.is_active(i, j))
                .map(move |i| (i, j, self.point(i, j)))
        })
    }
}

/// `∇θ(x) = (−x₂, x₁)/|x|²`, the single-valued gradient of `arg x`.
pub fn theta_gradient(x: Vec2) -> Result<Vec2> {
    let r2 = x.dot(x);
    if r2 == 0.0 {
        return Err(Error::LevelSetConfig("∇θ is undefined at the origin".into()));
    }
    Ok(Vec2::new(-x.y / r2, x.x / r2))
}

/// Exact increment of `arg` along the straight segment from `a` to `b`
/// (which must not pass through the origin).
#[inline]
pub fn angle_increment(a: Vec2, b: Vec2) -> f64 {
    a.cross(b).atan2(a.dot(b))
}

/// Level-set unknown on the grid. Inactive nodes hold values that are never
/// read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub t: f64,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: &AnnularGrid, c: f64) -> Self {
        ScalarField {
            t: 0.0,
            values: vec![c; grid.n * grid.n],
        }
    }

    pub fn from_fn(grid: &AnnularGrid, f: impl Fn(Vec2) -> f64) -> Self {
        let mut values = vec![0.0; grid.n * grid.n];
        for j in 0..grid.n {
            for i in 0..grid.n {
                values[grid.idx(i, j)] = f(grid.point(i, j));
            }
        }
        ScalarField { t: 0.0, values }
    }
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct LevelSetConfig {
    pub grid: AnnularGrid,
    pub dt: f64,
    pub params: EvolutionParams,
    pub flux: RegularizedXi,
    /// Uniform mobility `β̃`.
    pub mobility: f64,
    stencil: Stencil,
}

impl LevelSetConfig {
    /// `Δt = 0.1 Δx²`; `flux.eps` is the regularization width.
    pub fn new(grid: AnnularGrid, params: EvolutionParams, flux: RegularizedXi, mobility: f64) -> Result<Self> {
        if !(flux.eps > 0.0 && flux.eps.is_finite()) {
            return Err(Error::LevelSetConfig(format!(
                "regularization width must be positive, got {}",
                flux.eps
            )));
        }
        if !(mobility > 0.0 && mobility.is_finite()) {
            return Err(Error::LevelSetConfig(format!(
                "mobility must be positive, got {mobility}"
            )));
        }
        let dt = CFL_FACTOR * grid.dx * grid.dx;
        let stencil = Stencil::new(&grid);
        Ok(LevelSetConfig {
            grid,
            dt,
            params,
            flux,
            mobility,
            stencil,
        })
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::LevelSetConfig(format!("time step must be positive, got {dt}")));
        }
        self.dt = dt;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.flux.eps
    }
}

/// Static per-edge data. The increment of `w` along an edge is
/// `coef·(u_b − u_a) − offset`:
///
/// * both endpoints active: `coef = 1`, `offset = δθ(a → b)`;
/// * one endpoint inside `B_ρ`: the ghost value equals the active
///   neighbor (`θ` does not change along the radial normal), so
///   `coef = 0`, `offset = δθ(a → b)`;
/// * otherwise (both inactive, or leaving `Ω`): zero.
#[derive(Debug, Clone)]
struct Stencil {
    /// x-edge `(i,j) → (i+1,j)`, indexed by `(i,j)`.
    coef_x: Vec<f64>,
    offset_x: Vec<f64>,
    /// y-edge `(i,j) → (i,j+1)`, indexed by `(i,j)`.
    coef_y: Vec<f64>,
    offset_y: Vec<f64>,
}

impl Stencil {
    fn new(g: &AnnularGrid) -> Self {
        let n = g.n;
        let mut coef_x = vec![0.0; n * n];
        let mut offset_x = vec![0.0; n * n];
        let mut coef_y = vec![0.0; n * n];
        let mut offset_y = vec![0.0; n * n];
        let fill = |k: usize, a: (usize, usize), b: (usize, usize), coef: &mut [f64], off: &mut [f64]| {
            let (aa, ba) = (g.is_active(a.0, a.1), g.is_active(b.0, b.1));
            if !aa && !ba {
                return;
            }
            let (pa, pb) = (g.point(a.0, a.1), g.point(b.0, b.1));
            coef[k] = if aa && ba { 1.0 } else { 0.0 };
            off[k] = if pa == Vec2::ZERO || pb == Vec2::ZERO {
                0.0
            } else {
                angle_increment(pa, pb)
            };
        };
        for j in 0..n {
            for i in 0..n {
                let k = g.idx(i, j);
                if i + 1 < n {
                    fill(k, (i, j), (i + 1, j), &mut coef_x, &mut offset_x);
                }
                if j + 1 < n {
                    fill(k, (i, j), (i, j + 1), &mut coef_y, &mut offset_y);
                }
            }
        }
        Stencil {
            coef_x,
            offset_x,
            coef_y,
            offset_y,
        }
    }
}

/// Increments of `w = u − θ` along every grid edge, ghost values included.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDifferences {
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
}

/// Ghost value seen from active node `(i, j)` across the boundary in
/// direction `dir`. Across `∂Ω` the increment of `u − θ` along the outward
/// axis vanishes; inside `B_ρ` the increment of `θ` along the radial normal
/// is zero, so the ghost copies `u`.
pub fn ghost_value(u: &ScalarField, grid: &AnnularGrid, i: usize, j: usize, dir: (i32, i32)) -> f64 {
    let a = grid.point(i, j);
    let ua = u.values[grid.idx(i, j)];
    let (gi, gj) = (i as i64 + dir.0 as i64, j as i64 + dir.1 as i64);
    let inside = (0..grid.n as i64).contains(&gi) && (0..grid.n as i64).contains(&gj);
    if inside {
        ua
    } else {
        let g = a + Vec2::new(dir.0 as f64, dir.1 as f64) * grid.dx;
        ua + angle_increment(a, g)
    }
}

/// Applies the right-angle boundary condition through ghost values and
/// returns the resulting edge increments of `u − θ`.
pub fn apply_bc(u: &ScalarField, cfg: &LevelSetConfig) -> EdgeDifferences {
    let n = cfg.grid.n;
    let mut wx = vec![0.0; n * n];
    let mut wy = vec![0.0; n * n];
    edge_differences(&u.values, cfg, &mut wx, &mut wy);
    EdgeDifferences { wx, wy }
}

fn edge_differences(u: &[f64], cfg: &LevelSetConfig, wx: &mut [f64], wy: &mut [f64]) {
    let n = cfg.grid.n;
    let st = &cfg.stencil;
    wx.par_chunks_mut(n * ROW_CHUNK)
        .zip(wy.par_chunks_mut(n * ROW_CHUNK))
        .enumerate()
        .for_each(|(c, (wxc, wyc))| {
            let j0 = c * ROW_CHUNK;
            for (r, (wxr, wyr)) in wxc.chunks_mut(n).zip(wyc.chunks_mut(n)).enumerate() {
                let j = j0 + r;
                let row = j * n;
                for i in 0..n - 1 {
                    let k = row + i;
                    wxr[i] = st.coef_x[k] * (u[k + 1] - u[k]) - st.offset_x[k];
                }
                wxr[n - 1] = 0.0;
                if j + 1 < n {
                    for i in 0..n {
                        let k = row + i;
                        wyr[i] = st.coef_y[k] * (u[k + n] - u[k]) - st.offset_y[k];
                    }
                } else {
                    wyr.fill(0.0);
                }
            }
        });
}

/// Scratch buffers for one time step.
struct Workspace {
    wx: Vec<f64>,
    wy: Vec<f64>,
    /// Node-centered averages of adjacent increments (times `Δx`).
    tx: Vec<f64>,
    ty: Vec<f64>,
    /// x-face fluxes, `(n+1)` per row; face `i` sits between nodes `i−1`
    /// and `i`.
    fx: Vec<f64>,
    /// y-face fluxes, `n+1` rows of `n`; face row `j` sits between node
    /// rows `j−1` and `j`.
    fy: Vec<f64>,
    div: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            wx: vec![0.0; n * n],
            wy: vec![0.0; n * n],
            tx: vec![0.0; n * n],
            ty: vec![0.0; n * n],
            fx: vec![0.0; (n + 1) * n],
            fy: vec![0.0; (n + 1) * n],
            div: vec![0.0; n * n],
        }
    }
}

fn node_averages(cfg: &LevelSetConfig, ws: &mut Workspace) {
    let n = cfg.grid.n;
    let (wx, wy) = (&ws.wx, &ws.wy);
    ws.tx
        .par_chunks_mut(n * ROW_CHUNK)
        .zip(ws.ty.par_chunks_mut(n * ROW_CHUNK))
        .enumerate()
        .for_each(|(c, (txc, tyc))| {
            let j0 = c * ROW_CHUNK;
            for (r, (txr, tyr)) in txc.chunks_mut(n).zip(tyc.chunks_mut(n)).enumerate() {
                let j = j0 + r;
                let row = j * n;
                for i in 0..n {
                    let k = row + i;
                    let left = if i > 0 { wx[k - 1] } else { 0.0 };
                    let down = if j > 0 { wy[k - n] } else { 0.0 };
                    txr[i] = 0.5 * (left + wx[k]);
                    tyr[i] = 0.5 * (down + wy[k]);
                }
            }
        });
}

/// Net outward flux of `ξ̃_reg(∇(u − θ))` per unit area at every active
/// node (zero elsewhere). Edge increments must be current.
fn compute_divergence(cfg: &LevelSetConfig, ws: &mut Workspace) {
    let g = &cfg.grid;
    let n = g.n;
    let inv_dx = 1.0 / g.dx;
    let flux = &cfg.flux;
    let mask = g.mask();
    {
        let (wx, ty) = (&ws.wx, &ws.ty);
        ws.fx
            .par_chunks_mut((n + 1) * ROW_CHUNK)
            .enumerate()
            .for_each(|(c, fxc)| {
                for (r, fxr) in fxc.chunks_mut(n + 1).enumerate() {
                    let j = c * ROW_CHUNK + r;
                    let row = j * n;
                    for f in 0..=n {
                        // nodes a = f−1, b = f
                        let a = f.checked_sub(1).filter(|_| mask[row + f - 1]);
                        let b = (f < n && mask[row + f]).then_some(f);
                        fxr[f] = match (a, b) {
                            (None, None) => 0.0,
                            (Some(a), Some(b)) => {
                                let pn = wx[row + a] * inv_dx;
                                let pt = 0.5 * (ty[row + a] + ty[row + b]) * inv_dx;
                                flux.xi_x(Vec2::new(pn, pt))
                            }
                            (Some(m), None) | (None, Some(m)) => {
                                let pn = if f > 0 && f < n { wx[row + f - 1] * inv_dx } else { 0.0 };
                                flux.xi_x(Vec2::new(pn, ty[row + m] * inv_dx))
                            }
                        };
                    }
                }
            });
    }
    {
        let (wy, tx) = (&ws.wy, &ws.tx);
        ws.fy.par_chunks_mut(n * ROW_CHUNK).enumerate().for_each(|(c, fyc)| {
            for (r, fyr) in fyc.chunks_mut(n).enumerate() {
                let f = c * ROW_CHUNK + r;
                for i in 0..n {
                    let a = f.checked_sub(1).filter(|&ja| mask[ja * n + i]);
                    let b = (f < n && mask[f * n + i]).then_some(f);
                    fyr[i] = match (a, b) {
                        (None, None) => 0.0,
                        (Some(a), Some(b)) => {
                            let pn = wy[a * n + i] * inv_dx;
                            let pt = 0.5 * (tx[a * n + i] + tx[b * n + i]) * inv_dx;
                            flux.xi_y(Vec2::new(pt, pn))
                        }
                        (Some(m), None) | (None, Some(m)) => {
                            let pn = if f > 0 && f < n {
                                wy[(f - 1) * n + i] * inv_dx
                            } else {
                                0.0
                            };
                            flux.xi_y(Vec2::new(tx[m * n + i] * inv_dx, pn))
                        }
                    };
                }
            }
        });
    }
    let (fx, fy) = (&ws.fx, &ws.fy);
    ws.div.par_chunks_mut(n * ROW_CHUNK).enumerate().for_each(|(c, dc)| {
        for (r, dr) in dc.chunks_mut(n).enumerate() {
            let j = c * ROW_CHUNK + r;
            for i in 0..n {
                dr[i] = if mask[j * n + i] {
                    (fx[j * (n + 1) + i + 1] - fx[j * (n + 1) + i] + fy[(j + 1) * n + i] - fy[j * n + i]) * inv_dx
                } else {
                    0.0
                };
            }
        }
    });
}

/// `div ξ̃_reg(∇(u − θ))` on the grid (zero at inactive nodes).
pub fn divergence_term(u: &ScalarField, cfg: &LevelSetConfig) -> ScalarField {
    let mut ws = Workspace::new(cfg.grid.n);
    edge_differences(&u.values, cfg, &mut ws.wx, &mut ws.wy);
    node_averages(cfg, &mut ws);
    compute_divergence(cfg, &mut ws);
    ScalarField { t: u.t, values: ws.div }
}

/// Central-difference `∇(u − θ)` at node `(i, j)`.
pub fn node_gradient(u: &ScalarField, cfg: &LevelSetConfig, i: usize, j: usize) -> Vec2 {
    let d = apply_bc(u, cfg);
    let n = cfg.grid.n;
    let k = cfg.grid.idx(i, j);
    let left = if i > 0 { d.wx[k - 1] } else { 0.0 };
    let down = if j > 0 { d.wy[k - n] } else { 0.0 };
    Vec2::new(0.5 * (left + d.wx[k]), 0.5 * (down + d.wy[k])) * (1.0 / cfg.grid.dx)
}

#[cfg(test)]
fn reference_advance(u: &mut ScalarField, cfg: &LevelSetConfig, ws: &mut Workspace, dt: f64) -> Result<()> {
    edge_differences(&u.values, cfg, &mut ws.wx, &mut ws.wy);
    node_averages(cfg, ws);
    compute_divergence(cfg, ws);
    let g = &cfg.grid;
    let n = g.n;
    let inv_dx = 1.0 / g.dx;
    let mask = g.mask();
    let (tx, ty, div) = (&ws.tx, &ws.ty, &ws.div);
    let rho_c = cfg.params.capillary;
    let drive = cfg.params.driving_force;
    let scale = dt / cfg.mobility;
    let flux = &cfg.flux;
    let bad = u
        .values
        .par_chunks_mut(n * ROW_CHUNK)
        .enumerate()
        .map(|(c, uc)| {
            let mut bad: Option<usize> = None;
            for (r, ur) in uc.chunks_mut(n).enumerate() {
                let j = c * ROW_CHUNK + r;
                for i in 0..n {
                    let k = j * n + i;
                    if !mask[k] {
                        continue;
                    }
                    let p = Vec2::new(tx[k] * inv_dx, ty[k] * inv_dx);
                    let gamma = flux.gamma(p);
                    let v = ur[i] + scale * gamma * (rho_c * div[k] + drive);
                    if !v.is_finite() && bad.is_none() {
                        bad = Some(k);
                    }
                    ur[i] = v;
                }
            }
            bad
        })
        .reduce(|| None, |a, b| a.or(b));
    u.t += dt;
    if let Some(k) = bad {
        let (i, j) = (k % n, k / n);
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

/// One explicit Euler step of size `cfg.dt`.
pub fn step(u: &ScalarField, cfg: &LevelSetConfig) -> Result<ScalarField> {
    let mut out = u.clone();
    let mut scratch = Vec::new();
    kernel::advance(&mut out, &mut scratch, cfg, cfg.dt)?;
    Ok(out)
}

/// Integrates from `u0` to `t_end` with steps `cfg.dt`, shortening the last
/// step before each sample time, and returns snapshots at `sample_times`.
pub fn solve(cfg: &LevelSetConfig, u0: &ScalarField, t_end: f64, sample_times: &[f64]) -> Result<Vec<ScalarField>> {
    solve_with(cfg, u0, t_end, sample_times, |_| {})
}

/// [`solve`] with a callback after each emitted snapshot.
pub fn solve_with(
    cfg: &LevelSetConfig,
    u0: &ScalarField,
    t_end: f64,
    sample_times: &[f64],
    mut on_sample: impl FnMut(&ScalarField),
) -> Result<Vec<ScalarField>> {
    if !(t_end >= 0.0) {
        return Err(Error::LevelSetConfig(format!(
            "end time must be nonnegative, got {t_end}"
        )));
    }
    if u0.values.len() != cfg.grid.n * cfg.grid.n {
        return Err(Error::LevelSetConfig("initial field does not match the grid".into()));
    }
    for w in sample_times.windows(2) {
        if !(w[0] <= w[1]) {
            return Err(Error::LevelSetConfig("sample times must be sorted".into()));
        }
    }
    if let Some(&s) = sample_times.iter().find(|&&s| !(u0.t..=t_end).contains(&s)) {
        return Err(Error::LevelSetConfig(format!(
            "sample time {s} outside [{}, {t_end}]",
            u0.t
        )));
    }
    let mut scratch = Vec::new();
    let mut u = u0.clone();
    let mut out = Vec::with_capacity(sample_times.len());
    for &target in sample_times {
        march(&mut u, cfg, &mut scratch, target)?;
        on_sample(&u);
        out.push(u.clone());
    }
    Ok(out)
}

/// Steps `u` from `u.t` to exactly `target`.
fn march(u: &mut ScalarField, cfg: &LevelSetConfig, scratch: &mut Vec<f64>, target: f64) -> Result<()> {
    let span = target - u.t;
    if span <= 0.0 {
        return Ok(());
    }
    let steps = (span / cfg.dt - 1e-9).ceil().max(1.0) as u64;
    let start = u.t;
    for m in 0..steps {
        let h = if m + 1 == steps {
            target - (start + m as f64 * cfg.dt)
        } else {
            cfg.dt
        };
        kernel::advance(u, scratch, cfg, h)?;
        u.t = start + (m + 1) as f64 * cfg.dt;
    }
    u.t = target;
    Ok(())
}
