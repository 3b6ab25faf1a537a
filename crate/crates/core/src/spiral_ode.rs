//! Facet-length dynamics of a pinned polygonal spiral.
//!
//! The spiral `Γ_D(t) = L_k ∪ … ∪ L_1 ∪ L_0` has its center `y_k = O`, finite
//! facets `L_j = [y_j, y_{j−1}]` of length `d_j` with direction `T_j`, and the
//! outer half-line `L_0 = {y_0 + λT_0}`. Lengths evolve by a tridiagonal ODE
//! system; whenever the newest facet reaches the critical length
//! `ρ_c ℓ_k / U` a new zero-length facet is created at the center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::{segments_intersect, Vec2};
use crate::wulff::WulffShape;

/// Bisection tolerance for generation times.
pub const EVENT_TOL: f64 = 1e-12;

/// Accepted lengths of finite non-center facets below this abort the run.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

pub const DEFAULT_DT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    /// Driving force `U`.
    pub driving_force: f64,
    /// Capillary coefficient `ρ_c`.
    pub capillary: f64,
}

impl EvolutionParams {
    pub fn new(driving_force: f64, capillary: f64) -> Result<Self> {
        if !(driving_force > 0.0 && driving_force.is_finite()) {
            return Err(Error::OdeParams(format!(
                "driving force must be positive, got {driving_force}"
            )));
        }
        if !(capillary > 0.0 && capillary.is_finite()) {
            return Err(Error::OdeParams(format!(
                "capillary coefficient must be positive, got {capillary}"
            )));
        }
        Ok(EvolutionParams {
            driving_force,
            capillary,
        })
    }
}

/// Constants `b_j`, `c_j^±` of the facet ODE system, periodic in `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub b: Vec<f64>,
    pub c_plus: Vec<f64>,
    pub c_minus: Vec<f64>,
}

impl CoefficientTable {
    #[inline]
    pub fn b(&self, j: usize) -> f64 {
        self.b[j % self.b.len()]
    }
    #[inline]
    pub fn c_plus(&self, j: usize) -> f64 {
        self.c_plus[j % self.c_plus.len()]
    }
    #[inline]
    pub fn c_minus(&self, j: usize) -> f64 {
        self.c_minus[j % self.c_minus.len()]
    }
}

/// `b_j = (1/β_j)[cot(φ_{j+1}−φ_j) + cot(φ_j−φ_{j−1})]`,
/// `c_j^± = ±1/(β_{j±1} sin(φ_{j±1} − φ_j))`.
pub fn coefficients(shape: &WulffShape) -> Result<CoefficientTable> {
    let n = shape.len();
    let mut b = Vec::with_capacity(n);
    let mut c_plus = Vec::with_capacity(n);
    let mut c_minus = Vec::with_capacity(n);
    for j in 0..n {
        let up = shape.gap_after(j);
        let down = shape.gap_after(j + n - 1);
        for g in [up, down] {
            if !(g > 0.0 && g < std::f64::consts::PI) {
                return Err(Error::InvalidShape(format!(
                    "normal-angle gap {g} at facet {j} outside (0, π)"
                )));
            }
        }
        b.push((1.0 / up.tan() + 1.0 / down.tan()) / shape.mobility(j));
        c_plus.push(1.0 / (shape.mobility(j + 1) * up.sin()));
        c_minus.push(1.0 / (shape.mobility(j + n - 1) * down.sin()));
    }
    Ok(CoefficientTable { b, c_plus, c_minus })
}

/// Discrete-model state. `lengths[j − 1]` holds `d_j` for `j = 1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralState {
    pub t: f64,
    pub lengths: Vec<f64>,
    /// `T_1 = 0 < T_2 < … < T_k`.
    pub generation_times: Vec<f64>,
}

impl SpiralState {
    /// The straight initial curve: `k = 1`, `d_1 = 0`.
    pub fn initial() -> Self {
        SpiralState {
            t: 0.0,
            lengths: vec![0.0],
            generation_times: vec![0.0],
        }
    }

    /// Facet count `k`.
    pub fn k(&self) -> usize {
        self.lengths.len()
    }

    /// `d_j` for `1 ≤ j ≤ k`.
    pub fn d(&self, j: usize) -> f64 {
        self.lengths[j - 1]
    }

    /// Creates facet `k+1` with zero length at the center.
    pub fn add_facet(&mut self) {
        self.lengths.push(0.0);
        self.generation_times.push(self.t);
    }

    /// Reconstructs the polyline from `y_k = O` outward.
    pub fn vertices(&self, shape: &WulffShape) -> SpiralPolyline {
        let k = self.k();
        let mut y = vec![Vec2::ZERO; k + 1];
        for j in (1..=k).rev() {
            y[j - 1] = y[j] + shape.tangent(j) * self.d(j);
        }
        SpiralPolyline {
            t: self.t,
            vertices: y,
            ray: shape.tangent(0),
        }
    }
}

/// `Γ_D(t)` as the vertices `y_0, …, y_k` plus the outer half-line
/// direction `T_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralPolyline {
    pub t: f64,
    /// `vertices[j] = y_j`; `vertices[k]` is the center.
    pub vertices: Vec<Vec2>,
    pub ray: Vec2,
}

impl SpiralPolyline {
    pub fn k(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Support value `s_j = y_j·N_j` of the line carrying facet `j`
    /// (`j ≤ k`).
    pub fn support_value(&self, shape: &WulffShape, j: usize) -> f64 {
        self.vertices[j].dot(shape.normal(j))
    }

    /// Segments from the center outward, ending with `L_0` clipped to
    /// `ray_len`.
    pub fn segments(&self, ray_len: f64) -> Vec<(Vec2, Vec2)> {
        let k = self.k();
        let mut out: Vec<(Vec2, Vec2)> = (1..=k)
            .rev()
            .map(|j| (self.vertices[j], self.vertices[j - 1]))
            .collect();
        out.push((self.vertices[0], self.vertices[0] + self.ray * ray_len));
        out
    }

    /// Points along the curve from the center outward, with the ray clipped
    /// to `ray_len`.
    pub fn points(&self, ray_len: f64) -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = self.vertices.iter().rev().copied().collect();
        pts.push(self.vertices[0] + self.ray * ray_len);
        pts
    }

    /// No two non-adjacent pieces intersect (the ray is clipped to
    /// `ray_len`). Zero-length facets are skipped.
    pub fn is_simple(&self, ray_len: f64) -> bool {
        let segs: Vec<(usize, (Vec2, Vec2))> = self
            .segments(ray_len)
            .into_iter()
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .collect();
        for (x, &(i, (a, b))) in segs.iter().enumerate() {
            for &(j, (c, d)) in &segs[x + 1..] {
                if j == i + 1 {
                    continue;
                }
                // pieces separated only by a zero-length facet share a vertex
                if j == i + 2 && b == c {
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

/// The facet ODE system for one Wulff shape and parameter set.
#[derive(Debug, Clone)]
pub struct FacetModel {
    pub shape: WulffShape,
    pub coeffs: CoefficientTable,
    pub params: EvolutionParams,
}

/// Result of integrating toward the next generation time.
#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    /// `d_k` reached the critical length; the state sits at the crossing.
    Generated(SpiralState),
    /// The horizon was reached first.
    Horizon(SpiralState),
}

impl FacetModel {
    pub fn new(shape: WulffShape, params: EvolutionParams) -> Result<Self> {
        let coeffs = coefficients(&shape)?;
        Ok(FacetModel { shape, coeffs, params })
    }

    /// Critical length `ρ_c ℓ_j / U` of facet `j`.
    pub fn critical_length(&self, j: usize) -> f64 {
        self.params.capillary * self.shape.length(j) / self.params.driving_force
    }

    /// Driving term `U − ρ_c ℓ_j / d_j` of a finite non-center facet.
    #[inline]
    fn force(&self, j: usize, d: f64) -> f64 {
        self.params.driving_force - self.params.capillary * self.shape.length(j) / d
    }

    /// `ḋ_1, …, ḋ_k` for lengths `d` (`d[j−1] = d_j`).
    ///
    /// Rows follow the three-term template `−b_j F_j + c_j^+ F_{j+1} +
    /// c_j^− F_{j−1}` with `F_i = U − ρ_c ℓ_i/d_i`, `F_0 = U` (the half-line)
    /// and no contribution from the pinned center facet `k`.
    pub fn rhs_into(&self, t: f64, d: &[f64], out: &mut [f64]) -> Result<()> {
        let k = d.len();
        let u = self.params.driving_force;
        for j in 1..k {
            let dj = d[j - 1];
            if !(dj > 0.0) {
                return Err(Error::Domain {
                    index: j,
                    length: dj,
                    t,
                });
            }
        }
        let f = |i: usize| if i == 0 { u } else { self.force(i, d[i - 1]) };
        for j in 1..=k {
            out[j - 1] = if j == k {
                self.coeffs.c_minus(j) * f(j - 1)
            } else {
                let mut v = -self.coeffs.b(j) * f(j) + self.coeffs.c_minus(j) * f(j - 1);
                if j + 1 < k {
                    v += self.coeffs.c_plus(j) * f(j + 1);
                }
                v
            };
        }
        Ok(())
    }

    pub fn rhs(&self, state: &SpiralState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; state.k()];
        self.rhs_into(state.t, &state.lengths, &mut out)?;
        Ok(out)
    }

    /// One classical fourth-order Runge-Kutta step of size `dt`.
    pub fn rk4_step(&self, state: &SpiralState, dt: f64) -> Result<SpiralState> {
        let mut next = state.clone();
        self.rk4_into(state, dt, &mut next.lengths)?;
        next.t = state.t + dt;
        Ok(next)
    }

    fn rk4_into(&self, state: &SpiralState, dt: f64, out: &mut [f64]) -> Result<()> {
        let k = state.k();
        let d0 = &state.lengths;
        let mut k1 = vec![0.0; k];
        let mut k2 = vec![0.0; k];
        let mut k3 = vec![0.0; k];
        let mut k4 = vec![0.0; k];
        let mut tmp = vec![0.0; k];
        let t = state.t;
        self.rhs_into(t, d0, &mut k1)?;
        for i in 0..k {
            tmp[i] = d0[i] + 0.5 * dt * k1[i];
        }
        self.rhs_into(t + 0.5 * dt, &tmp, &mut k2)?;
        for i in 0..k {
            tmp[i] = d0[i] + 0.5 * dt * k2[i];
        }
        self.rhs_into(t + 0.5 * dt, &tmp, &mut k3)?;
        for i in 0..k {
            tmp[i] = d0[i] + dt * k3[i];
        }
        self.rhs_into(t + dt, &tmp, &mut k4)?;
        for i in 0..k {
            out[i] = d0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }

    fn check_positive(&self, state: &SpiralState) -> Result<()> {
        let k = state.k();
        for j in 1..k {
            let d = state.d(j);
            if !(d >= POSITIVITY_FLOOR) {
                return Err(Error::Domain {
                    index: j,
                    length: d,
                    t: state.t,
                });
            }
        }
        Ok(())
    }

    /// Integrates with fixed steps `dt` until `d_k` first reaches the
    /// critical length, then bisects the straddling step to [`EVENT_TOL`]
    /// and returns the state at the crossing. Every accepted state is passed
    /// to `visit`, including the crossing state.
    pub fn advance_with(
        &self,
        state: &SpiralState,
        dt: f64,
        horizon: f64,
        mut visit: impl FnMut(&SpiralState),
    ) -> Result<Advance> {
        let k = state.k();
        let threshold = self.critical_length(k);
        let mut cur = state.clone();
        let mut next = state.clone();
        loop {
            if cur.t >= horizon {
                return Ok(Advance::Horizon(cur));
            }
            let h = dt.min(horizon - cur.t);
            self.rk4_into(&cur, h, &mut next.lengths)?;
            next.t = if h == dt { cur.t + dt } else { horizon };
            if next.lengths[k - 1] >= threshold {
                let (mut lo, mut hi) = (0.0, h);
                while hi - lo > EVENT_TOL {
                    let mid = 0.5 * (lo + hi);
                    self.rk4_into(&cur, mid, &mut next.lengths)?;
                    if next.lengths[k - 1] >= threshold {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                self.rk4_into(&cur, hi, &mut next.lengths)?;
                next.t = cur.t + hi;
                self.check_positive(&next)?;
                visit(&next);
                return Ok(Advance::Generated(next));
            }
            self.check_positive(&next)?;
            visit(&next);
            std::mem::swap(&mut cur, &mut next);
        }
    }

    /// Integrates from a generation instant to the next generation time
    /// `T_{k+1}`; fails if none occurs before `t_max`.
    pub fn advance_until_generation(&self, state: &SpiralState, dt: f64, t_max: f64) -> Result<(SpiralState, f64)> {
        match self.advance_with(state, dt, t_max, |_| {})? {
            Advance::Generated(s) => {
                let t = s.t;
                Ok((s, t))
            }
            Advance::Horizon(_) => Err(Error::NoGeneration { t_max }),
        }
    }

    /// Runs the generation algorithm from the initial curve to `t_end`,
    /// recording states at `sample_times` (linear interpolation in `t`
    /// between the bracketing accepted steps).
    pub fn simulate(&self, dt: f64, t_end: f64, sample_times: &[f64]) -> Result<Trajectory> {
        if !(dt > 0.0) {
            return Err(Error::OdeParams(format!("time step must be positive, got {dt}")));
        }
        if !(t_end >= 0.0) {
            return Err(Error::OdeParams(format!("end time must be nonnegative, got {t_end}")));
        }
        for w in sample_times.windows(2) {
            if !(w[0] <= w[1]) {
                return Err(Error::OdeParams("sample times must be sorted".into()));
            }
        }
        if let Some(&s) = sample_times.iter().find(|&&s| !(0.0..=t_end).contains(&s)) {
            return Err(Error::OdeParams(format!("sample time {s} outside [0, {t_end}]")));
        }

        let mut samples: Vec<SpiralState> = Vec::with_capacity(sample_times.len());
        let mut pending = sample_times.iter().copied().peekable();
        let mut state = SpiralState::initial();
        while pending.peek() == Some(&0.0) {
            samples.push(state.clone());
            pending.next();
        }
        let mut prev = state.clone();
        let mut events = 0usize;
        loop {
            let outcome = self.advance_with(&state, dt, t_end, |s| {
                while let Some(&ts) = pending.peek() {
                    if ts > s.t {
                        break;
                    }
                    samples.push(interpolate(&prev, s, ts));
                    pending.next();
                }
                prev.clone_from(s);
            })?;
            match outcome {
                Advance::Generated(mut s) => {
                    s.add_facet();
                    events += 1;
                    prev.clone_from(&s);
                    state = s;
                }
                Advance::Horizon(s) => {
                    state = s;
                    break;
                }
            }
        }
        // sample times equal to t_end after rounding in the final step
        for ts in pending {
            samples.push(interpolate(&prev, &state, ts));
        }
        let polylines = samples.iter().map(|s| s.vertices(&self.shape)).collect();
        Ok(Trajectory {
            samples,
            polylines,
            final_state: state,
            events,
        })
    }
}

fn interpolate(a: &SpiralState, b: &SpiralState, t: f64) -> SpiralState {
    if t >= b.t || a.k() != b.k() || b.t <= a.t {
        let mut s = b.clone();
        s.t = t;
        return s;
    }
    let w = (t - a.t) / (b.t - a.t);
    SpiralState {
        t,
        lengths: a.lengths.iter().zip(&b.lengths).map(|(x, y)| x + w * (y - x)).collect(),
        generation_times: b.generation_times.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<SpiralState>,
    pub polylines: Vec<SpiralPolyline>,
    pub final_state: SpiralState,
    /// Number of generation events.
    pub events: usize,
}
