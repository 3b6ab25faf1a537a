//! Polygonal support functions, crystalline energy densities and Wulff polygons.
//!
//! A support function is stored as the outward vectors `m_j = η_j (cos ψ_j, sin ψ_j)`
//! with `γ°(p) = max_j m_j·p`; an energy density as the vectors `n_j` with
//! `γ(p) = max_j n_j·p`. [`dual`] converts the former into the latter by
//! intersecting consecutive supporting half-planes of the Frank diagram.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::{wrap_2pi, Vec2};

/// Absolute tolerance on angles and dot products in assumption checks.
pub const ASSUMPTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportFacet {
    pub eta: f64,
    pub psi: f64,
}

impl SupportFacet {
    pub fn vector(&self) -> Vec2 {
        Vec2::polar(self.eta, self.psi)
    }
}

/// `γ°(p) = max_j m_j·p` with facets ordered by strictly increasing `ψ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSpec {
    facets: Vec<SupportFacet>,
    vectors: Vec<Vec2>,
}

impl SupportSpec {
    /// Builds a spec after checking positivity of `η_j` and the angle
    /// ordering assumptions (γ1) and (γ2).
    pub fn new(facets: Vec<SupportFacet>) -> Result<Self> {
        if facets.len() < 3 {
            return Err(Error::InvalidShape(format!(
                "need at least 3 facets, got {}",
                facets.len()
            )));
        }
        for (j, f) in facets.iter().enumerate() {
            if !(f.eta > 0.0) || !f.eta.is_finite() || !f.psi.is_finite() {
                return Err(Error::Assumption {
                    assumption: "eta>0",
                    index: j,
                    detail: format!("eta = {}, psi = {}", f.eta, f.psi),
                });
            }
        }
        let psi: Vec<f64> = facets.iter().map(|f| f.psi).collect();
        check_angle_order(&psi, "gamma1", "gamma2")?;
        let vectors = facets.iter().map(SupportFacet::vector).collect();
        Ok(SupportSpec { facets, vectors })
    }

    /// Builds a spec from the vectors `m_j` themselves, keeping them exact.
    /// Polar angles are lifted so that they increase along the list.
    pub fn from_vectors(vectors: &[Vec2]) -> Result<Self> {
        let mut facets: Vec<SupportFacet> = Vec::with_capacity(vectors.len());
        for m in vectors {
            let mut psi = m.angle();
            if let Some(prev) = facets.last() {
                psi = prev.psi + wrap_2pi(psi - prev.psi);
            }
            facets.push(SupportFacet { eta: m.norm(), psi });
        }
        let mut spec = Self::new(facets)?;
        spec.vectors = vectors.to_vec();
        Ok(spec)
    }

    /// `max{|p₁|, |p₂|}`: the unit square Wulff shape.
    pub fn square() -> Self {
        Self::regular(4, 0.0, 1.0)
    }

    /// `(|p₁| + |p₂|)/√2`: the square rotated by π/4.
    pub fn diagonal() -> Self {
        Self::regular(4, PI / 4.0, 1.0)
    }

    /// Unit `m_j` at angles `2πj/3`: an equilateral triangle.
    pub fn triangle() -> Self {
        Self::regular(3, 0.0, 1.0)
    }

    fn regular(n: usize, offset: f64, eta: f64) -> Self {
        let facets: Vec<SupportFacet> = (0..n)
            .map(|j| SupportFacet {
                eta,
                psi: offset + 2.0 * PI * j as f64 / n as f64,
            })
            .collect();
        // snap trig round-off so axis-aligned vectors are exact
        let snap = |c: f64| if c.abs() < 1e-15 { 0.0 } else { c };
        let vectors = facets
            .iter()
            .map(|f| {
                let v = f.vector();
                Vec2::new(snap(v.x), snap(v.y))
            })
            .collect();
        SupportSpec { facets, vectors }
    }

    pub fn facets(&self) -> &[SupportFacet] {
        &self.facets
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn vectors(&self) -> Vec<Vec2> {
        self.vectors.clone()
    }

    /// `γ°(p) = max_j m_j·p`.
    pub fn eval(&self, p: Vec2) -> f64 {
        eval_support(self, p)
    }
}

pub fn eval_support(spec: &SupportSpec, p: Vec2) -> f64 {
    spec.vectors.iter().map(|m| m.dot(p)).fold(f64::NEG_INFINITY, f64::max)
}

/// Checks `a_0 < a_1 < … < a_{N−1} < a_0 + 2π` and that every cyclic gap
/// lies in `(0, π)`.
fn check_angle_order(a: &[f64], order: &'static str, gap: &'static str) -> Result<()> {
    let n = a.len();
    for j in 0..n - 1 {
        if !(a[j + 1] - a[j] > ASSUMPTION_TOL) {
            return Err(Error::Assumption {
                assumption: order,
                index: j + 1,
                detail: format!("angle {} does not exceed {}", a[j + 1], a[j]),
            });
        }
    }
    if !(a[n - 1] < a[0] + 2.0 * PI - ASSUMPTION_TOL) {
        return Err(Error::Assumption {
            assumption: order,
            index: n - 1,
            detail: format!("angles span {} ≥ 2π", a[n - 1] - a[0]),
        });
    }
    for j in 0..n {
        let next = if j + 1 == n { a[0] + 2.0 * PI } else { a[j + 1] };
        let g = next - a[j];
        if !(g < PI - ASSUMPTION_TOL) {
            return Err(Error::Assumption {
                assumption: gap,
                index: j,
                detail: format!("gap to next angle is {g}, not below π"),
            });
        }
    }
    Ok(())
}

/// Piecewise-linear density `γ(p) = max_j n_j·p`, vectors ordered by
/// strictly increasing polar angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDensity {
    vectors: Vec<Vec2>,
}

impl EnergyDensity {
    /// Vectors are sorted by polar angle in `[0, 2π)`; zero vectors and
    /// repeated directions are rejected.
    pub fn new(mut vectors: Vec<Vec2>) -> Result<Self> {
        if vectors.len() < 3 {
            return Err(Error::InvalidShape(format!(
                "need at least 3 density vectors, got {}",
                vectors.len()
            )));
        }
        for (j, v) in vectors.iter().enumerate() {
            if !(v.norm() > 0.0) || !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::Assumption {
                    assumption: "r>0",
                    index: j,
                    detail: format!("vector ({}, {})", v.x, v.y),
                });
            }
        }
        vectors.sort_by(|a, b| wrap_2pi(a.angle()).total_cmp(&wrap_2pi(b.angle())));
        let theta: Vec<f64> = vectors.iter().map(|v| wrap_2pi(v.angle())).collect();
        for j in 1..theta.len() {
            if !(theta[j] - theta[j - 1] > ASSUMPTION_TOL) {
                return Err(Error::Assumption {
                    assumption: "theta increasing",
                    index: j,
                    detail: "repeated direction".into(),
                });
            }
        }
        let d = EnergyDensity { vectors };
        // positivity on the unit circle: the origin must be interior to conv{n_j}
        for (j, &t) in theta.iter().enumerate() {
            let next = if j + 1 == theta.len() {
                theta[0] + 2.0 * PI
            } else {
                theta[j + 1]
            };
            if !(next - t < PI - ASSUMPTION_TOL) {
                return Err(Error::Assumption {
                    assumption: "A3",
                    index: j,
                    detail: "gamma is not positive on the unit circle".into(),
                });
            }
        }
        Ok(d)
    }

    pub fn vectors(&self) -> &[Vec2] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v.norm()).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| wrap_2pi(v.angle())).collect()
    }

    /// `γ(p) = max_j n_j·p`.
    pub fn eval(&self, p: Vec2) -> f64 {
        eval_energy(self, p)
    }

    /// Sector gauge `g_j(p) = n_j·p`.
    #[inline]
    pub fn gauge(&self, j: usize, p: Vec2) -> f64 {
        self.vectors[j].dot(p)
    }

    /// Sector indicator `f_j(p) = min_{k≠j} (g_j(p) − g_k(p))`; nonnegative
    /// exactly on the closed sector where `n_j` attains the maximum.
    pub fn sector_indicator(&self, j: usize, p: Vec2) -> f64 {
        let gj = self.gauge(j, p);
        self.vectors
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, v)| gj - v.dot(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sector form `Σ_j (n_j·p) [f_j(p) ≥ 0]`, averaging over tied sectors.
    pub fn eval_sectors(&self, p: Vec2) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..self.len() {
            if self.sector_indicator(j, p) >= 0.0 {
                sum += self.gauge(j, p);
                count += 1;
            }
        }
        sum / count as f64
    }

    /// The reflected density `γ̃(p) = γ(−p)`, whose vectors are `−n_j`.
    pub fn reflected(&self) -> EnergyDensity {
        EnergyDensity::new(self.vectors.iter().map(|&v| -v).collect()).expect("reflection preserves validity")
    }
}

pub fn eval_energy(density: &EnergyDensity, p: Vec2) -> f64 {
    density
        .vectors
        .iter()
        .map(|n| n.dot(p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Converts a polygonal support function into its dual energy density.
///
/// For each `j` the direction `θ_j` where `m_j` and `m_{j−1}` tie solves
/// `cos(θ_j − c_j) = 0` with `(cos c_j, sin c_j) ∝ m_j − m_{j−1}`; the
/// corresponding density vector is `n_j = r_j (cos θ_j, sin θ_j)` with
/// `r_j = 1/(η_j cos(θ_j − ψ_j))`. A negative `r_j` is folded into
/// `(−r_j, θ_j + π)`, which leaves `n_j` unchanged. Output is sorted by angle.
pub fn dual(spec: &SupportSpec) -> Result<EnergyDensity> {
    let report = validate_sectors(&spec.vectors());
    if let Some(j) = report.first_failure() {
        return Err(Error::Assumption {
            assumption: "gamma3",
            index: j,
            detail: if !report.sectors[j].nonempty {
                format!("sector P_{j} is empty")
            } else {
                format!("sector P_{j} differs from the neighbor intersection")
            },
        });
    }
    let n = spec.len();
    let f = spec.facets();
    let mut vectors = Vec::with_capacity(n);
    for j in 0..n {
        let prev = &f[(j + n - 1) % n];
        let a = f[j].eta * f[j].psi.cos() - prev.eta * prev.psi.cos();
        let b = f[j].eta * f[j].psi.sin() - prev.eta * prev.psi.sin();
        if a.hypot(b) < ASSUMPTION_TOL {
            return Err(Error::Assumption {
                assumption: "gamma3",
                index: j,
                detail: "m_j coincides with m_{j-1}".into(),
            });
        }
        let c = b.atan2(a);
        let mut theta = c + PI / 2.0;
        let mut r = 1.0 / (f[j].eta * (theta - f[j].psi).cos());
        if r < 0.0 {
            r = -r;
            theta += PI;
        }
        if !r.is_finite() {
            return Err(Error::Assumption {
                assumption: "gamma3",
                index: j,
                detail: "tie direction orthogonal to m_j".into(),
            });
        }
        vectors.push(Vec2::polar(r, theta));
    }
    EnergyDensity::new(vectors)
}

/// The dual construction applied with the roles of `γ` and `γ°` exchanged:
/// recovers the support vectors `m_j` from a density.
pub fn dual_of_density(density: &EnergyDensity) -> Result<Vec<Vec2>> {
    let spec = SupportSpec::from_vectors(density.vectors())?;
    Ok(dual(&spec)?.vectors().to_vec())
}

/// Per-facet mobility `β_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mobility {
    Uniform(f64),
    PerFacet(Vec<f64>),
}

impl Default for Mobility {
    fn default() -> Self {
        Mobility::Uniform(1.0)
    }
}

impl Mobility {
    pub fn get(&self, j: usize) -> f64 {
        match self {
            Mobility::Uniform(b) => *b,
            Mobility::PerFacet(v) => v[j % v.len()],
        }
    }

    pub fn uniform_value(&self) -> Option<f64> {
        match self {
            Mobility::Uniform(b) => Some(*b),
            Mobility::PerFacet(v) => {
                let first = *v.first()?;
                v.iter().all(|&b| b == first).then_some(first)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WulffFacet {
    /// Outward normal angle `φ_j`.
    pub phi: f64,
    /// Facet length `ℓ_j`.
    pub length: f64,
    /// Mobility `β_j`.
    pub mobility: f64,
}

/// Convex Wulff polygon described facet by facet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WulffShape {
    facets: Vec<WulffFacet>,
}

impl WulffShape {
    /// Checks (W1), (W2) and positivity of lengths and mobilities.
    pub fn new(facets: Vec<WulffFacet>) -> Result<Self> {
        if facets.len() < 3 {
            return Err(Error::InvalidShape(format!(
                "need at least 3 facets, got {}",
                facets.len()
            )));
        }
        for (j, f) in facets.iter().enumerate() {
            if !(f.length > 0.0) || !(f.mobility > 0.0) || !f.phi.is_finite() {
                return Err(Error::InvalidShape(format!(
                    "facet {j}: length {} and mobility {} must be positive",
                    f.length, f.mobility
                )));
            }
        }
        let phi: Vec<f64> = facets.iter().map(|f| f.phi).collect();
        check_angle_order(&phi, "W1", "W2")?;
        Ok(WulffShape { facets })
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn facets(&self) -> &[WulffFacet] {
        &self.facets
    }

    /// Facet `j` of the periodic extension.
    #[inline]
    pub fn facet(&self, j: usize) -> &WulffFacet {
        &self.facets[j % self.facets.len()]
    }

    /// Unwrapped normal angle of facet `j` of the periodic extension:
    /// `φ_{j̄} + 2πn` for `j = j̄ + nN`.
    pub fn phi_unwrapped(&self, j: usize) -> f64 {
        let n = self.facets.len();
        self.facets[j % n].phi + 2.0 * PI * (j / n) as f64
    }

    /// Normal-angle gap `φ_{j+1} − φ_j` (cyclic, in `(0, π)`).
    pub fn gap_after(&self, j: usize) -> f64 {
        self.phi_unwrapped(j + 1) - self.phi_unwrapped(j)
    }

    #[inline]
    pub fn length(&self, j: usize) -> f64 {
        self.facet(j).length
    }

    #[inline]
    pub fn mobility(&self, j: usize) -> f64 {
        self.facet(j).mobility
    }

    /// `N_j = (cos φ_j, sin φ_j)`.
    pub fn normal(&self, j: usize) -> Vec2 {
        Vec2::from_angle(self.facet(j).phi)
    }

    /// `T_j = (sin φ_j, −cos φ_j)`.
    pub fn tangent(&self, j: usize) -> Vec2 {
        let n = self.normal(j);
        Vec2::new(n.y, -n.x)
    }
}

/// Builds the Wulff polygon `{γ° ≤ 1}`: facet `j` lies on the line
/// `m_j·p = 1` between its intersections with the neighboring lines.
pub fn wulff_shape_from_support(spec: &SupportSpec, mobility: &Mobility) -> Result<WulffShape> {
    let v = wulff_vertices(spec)?;
    let n = spec.len();
    let facets = (0..n)
        .map(|j| WulffFacet {
            phi: spec.facets()[j].psi,
            length: v[j].dist(v[(j + n - 1) % n]),
            mobility: mobility.get(j),
        })
        .collect();
    WulffShape::new(facets)
}

/// Vertex `j` is the intersection of the supporting lines of facets `j`
/// and `j+1`.
pub fn wulff_vertices(spec: &SupportSpec) -> Result<Vec<Vec2>> {
    let m = spec.vectors();
    let n = m.len();
    (0..n)
        .map(|j| {
            let (a, b) = (m[j], m[(j + 1) % n]);
            let det = a.cross(b);
            if det.abs() < ASSUMPTION_TOL * a.norm() * b.norm() {
                return Err(Error::DegenerateIntersection(j, (j + 1) % n));
            }
            // a·p = 1, b·p = 1
            Ok(Vec2::new((b.y - a.y) / det, (a.x - b.x) / det))
        })
        .collect()
}

/// Arc of directions `[start, start + len]` on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub start: f64,
    pub len: f64,
}

impl Arc {
    fn full() -> Self {
        Arc {
            start: 0.0,
            len: 2.0 * PI,
        }
    }

    /// Directions `q` with `w·q ≥ 0`.
    fn half(w: Vec2) -> Self {
        Arc {
            start: wrap_2pi(w.angle() - PI / 2.0),
            len: PI,
        }
    }

    /// Intersection with another arc; `None` when empty. Both arcs are at
    /// most a half circle (or this one is the full circle), so the
    /// intersection is a single arc up to measure-zero touching.
    fn intersect(self, o: Arc) -> Option<Arc> {
        if self.len >= 2.0 * PI {
            return Some(o);
        }
        let rel = wrap_2pi(o.start - self.start);
        let mut best: Option<Arc> = None;
        let mut consider = |s: f64, e: f64| {
            if e >= s && best.map_or(true, |b| e - s > b.len) {
                best = Some(Arc {
                    start: wrap_2pi(self.start + s),
                    len: e - s,
                });
            }
        };
        if rel <= self.len {
            consider(rel, (rel + o.len).min(self.len));
        }
        if rel + o.len > 2.0 * PI {
            consider(0.0, (rel + o.len - 2.0 * PI).min(self.len));
        }
        best
    }

    fn approx_eq(&self, o: &Arc, tol: f64) -> bool {
        let ds = wrap_2pi(self.start - o.start);
        (ds < tol || 2.0 * PI - ds < tol) && (self.len - o.len).abs() < tol
    }
}

/// Arc of unit directions where `v_j·q ≥ v_k·q` for every `k ∈ others`.
fn dominance_arc(vectors: &[Vec2], j: usize, others: impl IntoIterator<Item = usize>) -> Option<Arc> {
    let mut arc = Arc::full();
    for k in others {
        let w = vectors[j] - vectors[k];
        if w.norm() < ASSUMPTION_TOL {
            continue;
        }
        arc = arc.intersect(Arc::half(w))?;
    }
    Some(arc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorStatus {
    pub index: usize,
    /// `P_j` contains a nondegenerate cone of directions.
    pub nonempty: bool,
    /// `P_j = Ξ_{j,j−1} ∩ Ξ_{j,j+1}`.
    pub matches_neighbors: bool,
    pub arc: Option<Arc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorReport {
    pub sectors: Vec<SectorStatus>,
}

impl SectorReport {
    pub fn passed(&self) -> bool {
        self.sectors.iter().all(|s| s.nonempty && s.matches_neighbors)
    }

    /// First empty sector, else the first sector that differs from its
    /// neighbor intersection.
    pub fn first_failure(&self) -> Option<usize> {
        self.sectors
            .iter()
            .find(|s| !s.nonempty)
            .or_else(|| self.sectors.iter().find(|s| !s.matches_neighbors))
            .map(|s| s.index)
    }

    pub fn empty_sectors(&self) -> Vec<usize> {
        self.sectors.iter().filter(|s| !s.nonempty).map(|s| s.index).collect()
    }
}

/// Checks that every sector `P_j = {p : v_j·p ≥ v_k·p ∀k}` has nonempty
/// interior and equals the intersection of its two neighbor half-planes.
pub fn validate_sectors(vectors: &[Vec2]) -> SectorReport {
    let n = vectors.len();
    let sectors = (0..n)
        .map(|j| {
            let arc = dominance_arc(vectors, j, (0..n).filter(|&k| k != j)).filter(|a| a.len > ASSUMPTION_TOL);
            let neighbor = if n >= 2 {
                dominance_arc(vectors, j, [(j + n - 1) % n, (j + 1) % n]).filter(|a| a.len > ASSUMPTION_TOL)
            } else {
                None
            };
            let matches_neighbors = match (arc, neighbor) {
                (Some(a), Some(b)) => a.approx_eq(&b, 1e-9),
                _ => false,
            };
            SectorStatus {
                index: j,
                nonempty: arc.is_some(),
                matches_neighbors,
                arc,
            }
        })
        .collect();
    SectorReport { sectors }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    /// `γ°(N_j) − 1` per facet.
    pub residuals: Vec<f64>,
    pub tol: f64,
}

impl NormalizationReport {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| r.abs() <= self.tol)
    }

    pub fn failures(&self) -> Vec<(usize, f64)> {
        self.residuals
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, r)| r.abs() > self.tol)
            .collect()
    }
}

/// Verifies `γ°(N_j) = 1` for every facet normal of the shape.
pub fn normalization_check(spec: &SupportSpec, shape: &WulffShape) -> NormalizationReport {
    let residuals = (0..shape.len())
        .map(|j| eval_support(spec, shape.normal(j)) - 1.0)
        .collect();
    NormalizationReport { residuals, tol: 1e-12 }
}

/// Density vectors of the three named scenarios in closed form.
pub mod closed_form {
    use super::*;

    /// `γ(p) = |p₁| + |p₂|`.
    pub fn square_density() -> Vec<Vec2> {
        vec![
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
        ]
    }

    /// `γ(p) = √2 max{|p₁|, |p₂|}`.
    pub fn diagonal_density() -> Vec<Vec2> {
        let s = 2f64.sqrt();
        vec![
            Vec2::new(s, 0.0),
            Vec2::new(0.0, s),
            Vec2::new(-s, 0.0),
            Vec2::new(0.0, -s),
        ]
    }

    /// `n_j = 2(cos((2j+1)π/3), sin((2j+1)π/3))`.
    pub fn triangle_density() -> Vec<Vec2> {
        (0..3)
            .map(|j| Vec2::polar(2.0, (2 * j + 1) as f64 * PI / 3.0))
            .collect()
    }

    pub fn diagonal_support() -> Vec<Vec2> {
        vec![
            Vec2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            Vec2::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            Vec2::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            Vec2::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn same_set(a: &[Vec2], b: &[Vec2], tol: f64) -> bool {
        a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| (*x - *y).norm() <= tol))
    }

    #[test]
    fn support_values() {
        assert_eq!(SupportSpec::square().eval(Vec2::new(3.0, -4.0)), 4.0);
        assert_eq!(SupportSpec::triangle().eval(Vec2::ZERO), 0.0);
        // triangle at (-2,0): dot products -2, 1, 1
        assert_abs_diff_eq!(SupportSpec::triangle().eval(Vec2::new(-2.0, 0.0)), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn energy_values() {
        let sq = EnergyDensity::new(closed_form::square_density()).unwrap();
        assert_eq!(sq.eval(Vec2::new(2.0, -3.0)), 5.0);
        assert_eq!(sq.eval(Vec2::ZERO), 0.0);
        let tri = EnergyDensity::new(closed_form::triangle_density()).unwrap();
        assert_abs_diff_eq!(tri.eval(Vec2::new(1.0, 0.0)), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dual_square() {
        let d = dual(&SupportSpec::square()).unwrap();
        assert!(same_set(d.vectors(), &closed_form::square_density(), 1e-12));
        assert!(d.radii().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn dual_diagonal() {
        let d = dual(&SupportSpec::diagonal()).unwrap();
        assert!(same_set(d.vectors(), &closed_form::diagonal_density(), 1e-12));
    }

    #[test]
    fn dual_triangle() {
        let d = dual(&SupportSpec::triangle()).unwrap();
        assert!(same_set(d.vectors(), &closed_form::triangle_density(), 1e-12));
        let a = d.angles();
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dual_rejects_bad_sectors() {
        let v = [
            Vec2::new(3.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(-1.0, -1.0),
        ];
        let spec = SupportSpec::from_vectors(&v).unwrap();
        match dual(&spec) {
            Err(Error::Assumption {
                assumption: "gamma3",
                index,
                ..
            }) => assert_eq!(index, 1),
            other => panic!("expected gamma3 failure, got {other:?}"),
        }
    }

    #[test]
    fn spec_rejects_order_violations() {
        let bad = vec![
            SupportFacet { eta: 1.0, psi: 0.0 },
            SupportFacet { eta: 1.0, psi: 2.0 },
            SupportFacet { eta: 1.0, psi: 1.0 },
        ];
        assert!(matches!(
            SupportSpec::new(bad),
            Err(Error::Assumption {
                assumption: "gamma1",
                index: 2,
                ..
            })
        ));
        // gap of π + 0.1 between the last two
        let wide = vec![
            SupportFacet { eta: 1.0, psi: 0.0 },
            SupportFacet { eta: 1.0, psi: 0.5 },
            SupportFacet {
                eta: 1.0,
                psi: 0.6 + PI,
            },
        ];
        assert!(matches!(
            SupportSpec::new(wide),
            Err(Error::Assumption {
                assumption: "gamma2",
                index: 1,
                ..
            })
        ));
        let neg = vec![
            SupportFacet { eta: -1.0, psi: 0.0 },
            SupportFacet { eta: 1.0, psi: 2.0 },
            SupportFacet { eta: 1.0, psi: 4.0 },
        ];
        assert!(SupportSpec::new(neg).is_err());
    }

    #[test]
    fn wulff_triangle() {
        let w = wulff_shape_from_support(&SupportSpec::triangle(), &Mobility::default()).unwrap();
        let v = wulff_vertices(&SupportSpec::triangle()).unwrap();
        let s3 = 3f64.sqrt();
        assert!(same_set(
            &v,
            &[Vec2::new(1.0, s3), Vec2::new(-2.0, 0.0), Vec2::new(1.0, -s3)],
            1e-12
        ));
        for j in 0..3 {
            assert_abs_diff_eq!(w.length(j), 2.0 * s3, epsilon = 1e-12);
            assert_abs_diff_eq!(w.facet(j).phi, 2.0 * PI * j as f64 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn wulff_square_and_diagonal() {
        let sq = wulff_shape_from_support(&SupportSpec::square(), &Mobility::default()).unwrap();
        let dg = wulff_shape_from_support(&SupportSpec::diagonal(), &Mobility::default()).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(sq.length(j), 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sq.facet(j).phi, PI * j as f64 / 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dg.length(j), 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(dg.facet(j).phi, PI * j as f64 / 2.0 + PI / 4.0, epsilon = 1e-15);
        }
        // diagonal Wulff shape is |p₁|+|p₂| ≤ √2
        let v = wulff_vertices(&SupportSpec::diagonal()).unwrap();
        for p in v {
            assert_abs_diff_eq!(p.x.abs() + p.y.abs(), 2f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        let w = wulff_shape_from_support(&SupportSpec::triangle(), &Mobility::default()).unwrap();
        for j in 0..6 {
            assert_eq!(w.normal(j).dot(w.tangent(j)), 0.0);
            assert_abs_diff_eq!(w.tangent(j).norm(), 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(w.phi_unwrapped(4), w.facet(1).phi + 2.0 * PI, epsilon = 1e-15);
    }

    #[test]
    fn sector_validation() {
        let counterexample = [
            Vec2::new(3.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(-1.0, -1.0),
        ];
        let r = validate_sectors(&counterexample);
        assert!(!r.passed());
        assert_eq!(r.empty_sectors(), vec![1]);
        assert!(validate_sectors(&closed_form::square_density()).passed());
        assert!(validate_sectors(&closed_form::triangle_density()).passed());
        assert!(validate_sectors(&SupportSpec::triangle().vectors()).passed());
    }

    #[test]
    fn normalization() {
        for spec in [SupportSpec::square(), SupportSpec::diagonal(), SupportSpec::triangle()] {
            let w = wulff_shape_from_support(&spec, &Mobility::default()).unwrap();
            let rep = normalization_check(&spec, &w);
            assert!(rep.passed(), "{rep:?}");
        }
        let mut f = SupportSpec::square().facets().to_vec();
        f[0].eta = 2.0;
        let spec = SupportSpec::new(f).unwrap();
        let w = wulff_shape_from_support(&spec, &Mobility::default()).unwrap();
        let rep = normalization_check(&spec, &w);
        assert!(!rep.passed());
        let fails = rep.failures();
        assert_eq!(fails.len(), 1);
        assert_eq!(fails[0].0, 0);
        assert_abs_diff_eq!(fails[0].1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_presets() {
        for spec in [SupportSpec::square(), SupportSpec::diagonal(), SupportSpec::triangle()] {
            let d = dual(&spec).unwrap();
            let back = dual_of_density(&d).unwrap();
            assert!(same_set(&back, &spec.vectors(), 1e-12));
        }
    }

    #[test]
    fn sector_form_matches_max() {
        let tri = EnergyDensity::new(closed_form::triangle_density()).unwrap();
        for k in 0..37 {
            let p = Vec2::polar(1.3, 0.17 * k as f64);
            assert_abs_diff_eq!(tri.eval_sectors(p), tri.eval(p), epsilon = 1e-12);
        }
    }
}
