//! Smoothed sign and characteristic functions, and the regularized
//! crystalline flux `ξ̃ = Dγ̃` built from them.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::vec2::Vec2;
use crate::wulff::EnergyDensity;

/// `σ(z; p₁, p₂) = z / √(z² + ε²(|p₁| + |p₂|)²)` for `z ≠ 0`, and `0` at
/// `z = 0`.
#[inline]
pub fn sigma(z: f64, p1: f64, p2: f64, eps: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let w = eps * (p1.abs() + p2.abs());
    z / (z * z + w * w).sqrt()
}

/// `ζ = (σ + 1)/2`, a smoothed characteristic function of `{z > 0}`.
#[inline]
pub fn zeta(z: f64, p1: f64, p2: f64, eps: f64) -> f64 {
    0.5 * (sigma(z, p1, p2, eps) + 1.0)
}

/// Which closed form approximates the flux.
#[derive(Debug, Clone, PartialEq)]
pub enum XiModel {
    /// `γ(p) = |p₁| + |p₂|`, `ξ = (sgn p₁, sgn p₂)`, smoothed componentwise
    /// with the gradient itself as the scale parameter.
    Square,
    /// `γ(p) = |q₁| + |q₂|` with `q = ((p₁+p₂)/√2, (p₁−p₂)/√2)`.
    Diagonal,
    /// Sector sum `Σ_j ζ(f_j(p); 1, 0) ñ_j` over the reflected density
    /// `γ̃(p) = γ(−p)`.
    Sectors(EnergyDensity),
}

/// `ξ̃_reg` and `γ̃_reg = p·ξ̃_reg` at smoothing width `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedXi {
    pub model: XiModel,
    pub eps: f64,
}

impl RegularizedXi {
    /// Sector-sum regularization of `γ̃(p) = γ(−p)` for an arbitrary density.
    pub fn sectors(density: &EnergyDensity, eps: f64) -> Self {
        RegularizedXi {
            model: XiModel::Sectors(density.reflected()),
            eps,
        }
    }

    #[inline]
    pub fn xi(&self, p: Vec2) -> Vec2 {
        match &self.model {
            XiModel::Square => SquareFlux(self.eps).xi(p),
            XiModel::Diagonal => DiagonalFlux(self.eps).xi(p),
            XiModel::Sectors(d) => SectorFlux(d, self.eps).xi(p),
        }
    }

    /// First component of [`xi`](Self::xi).
    #[inline]
    pub fn xi_x(&self, p: Vec2) -> f64 {
        match &self.model {
            XiModel::Square => SquareFlux(self.eps).xi_x(p),
            _ => self.xi(p).x,
        }
    }

    /// Second component of [`xi`](Self::xi).
    #[inline]
    pub fn xi_y(&self, p: Vec2) -> f64 {
        match &self.model {
            XiModel::Square => SquareFlux(self.eps).xi_y(p),
            _ => self.xi(p).y,
        }
    }

    #[inline]
    pub fn gamma(&self, p: Vec2) -> f64 {
        p.dot(self.xi(p))
    }

    /// Upper bound on `|ξ̃_reg|`.
    pub fn bound(&self) -> f64 {
        match &self.model {
            XiModel::Square => 2.0,
            XiModel::Diagonal => 2.0,
            XiModel::Sectors(d) => d.vectors().iter().map(|v| v.norm()).sum(),
        }
    }
}

/// Monomorphizable access to a flux model in the solver kernel.
pub trait Flux: Sync {
    fn xi(&self, p: Vec2) -> Vec2;

    #[inline]
    fn xi_x(&self, p: Vec2) -> f64 {
        self.xi(p).x
    }

    #[inline]
    fn xi_y(&self, p: Vec2) -> f64 {
        self.xi(p).y
    }

    #[inline]
    fn gamma(&self, p: Vec2) -> f64 {
        p.dot(self.xi(p))
    }
}

impl Flux for RegularizedXi {
    #[inline]
    fn xi(&self, p: Vec2) -> Vec2 {
        RegularizedXi::xi(self, p)
    }

    #[inline]
    fn xi_x(&self, p: Vec2) -> f64 {
        RegularizedXi::xi_x(self, p)
    }

    #[inline]
    fn xi_y(&self, p: Vec2) -> f64 {
        RegularizedXi::xi_y(self, p)
    }

    #[inline]
    fn gamma(&self, p: Vec2) -> f64 {
        RegularizedXi::gamma(self, p)
    }
}

pub(crate) struct SquareFlux(pub f64);

impl Flux for SquareFlux {
    #[inline]
    fn xi(&self, p: Vec2) -> Vec2 {
        Vec2::new(sigma(p.x, p.x, p.y, self.0), sigma(p.y, p.x, p.y, self.0))
    }

    #[inline]
    fn xi_x(&self, p: Vec2) -> f64 {
        sigma(p.x, p.x, p.y, self.0)
    }

    #[inline]
    fn xi_y(&self, p: Vec2) -> f64 {
        sigma(p.y, p.x, p.y, self.0)
    }
}

pub(crate) struct DiagonalFlux(pub f64);

impl Flux for DiagonalFlux {
    #[inline]
    fn xi(&self, p: Vec2) -> Vec2 {
        let q1 = FRAC_1_SQRT_2 * (p.x + p.y);
        let q2 = FRAC_1_SQRT_2 * (p.x - p.y);
        let a = sigma(q1, q1, q2, self.0);
        let b = sigma(q2, q1, q2, self.0);
        Vec2::new(FRAC_1_SQRT_2 * (a + b), FRAC_1_SQRT_2 * (a - b))
    }
}

pub(crate) struct SectorFlux<'a>(pub &'a EnergyDensity, pub f64);

/// Densities up to this many facets evaluate their gauges on the stack.
const STACK_FACETS: usize = 12;

impl Flux for SectorFlux<'_> {
    #[inline]
    fn xi(&self, p: Vec2) -> Vec2 {
        let v = self.0.vectors();
        if v.len() > STACK_FACETS {
            let mut out = Vec2::ZERO;
            for (j, n) in v.iter().enumerate() {
                out = out + *n * zeta(self.0.sector_indicator(j, p), 1.0, 0.0, self.1);
            }
            return out;
        }
        let mut g = [0.0; STACK_FACETS];
        for (gj, n) in g.iter_mut().zip(v) {
            *gj = n.dot(p);
        }
        let g = &g[..v.len()];
        let mut out = Vec2::ZERO;
        for (j, n) in v.iter().enumerate() {
            // f_j = min_{k≠j} (g_j − g_k), same operation order as
            // EnergyDensity::sector_indicator
            let mut f = f64::INFINITY;
            for (k, &gk) in g.iter().enumerate() {
                if k != j {
                    f = f.min(g[j] - gk);
                }
            }
            out = out + *n * zeta(f, 1.0, 0.0, self.1);
        }
        out
    }
}
