//! Numerical laboratory for pinned polygonal spirals evolving by the
//! crystalline eikonal-curvature flow `βV_γ = U − ρ_c H_γ`.
//!
//! Two independent models are provided: a facet-length ODE system with
//! event-driven facet generation ([`spiral_ode`]) and a regularized
//! crystalline level-set solver on an annular grid ([`levelset`]). Their
//! disagreement is measured by the normalized L¹ distance of step-like
//! height functions ([`sheet`]).

pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod levelset;
pub mod sheet;
pub mod spiral_ode;
pub mod vec2;
pub mod wulff;

pub use error::{Error, Result};
pub use vec2::Vec2;
