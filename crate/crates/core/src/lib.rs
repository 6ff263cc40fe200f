//! N-body dynamics on spaces of constant Gaussian curvature `κ` in two and
//! three dimensions, with the tools to check that the curved equations of
//! motion tend to the Newtonian ones as `κ → 0`.
//!
//! Positions are geodesic-polar (2D) or hyperspherical (3D) chart coordinates
//! `(s, φ[, θ])` measured from the pole shared by every `M_κ`.

pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod integrate;
pub mod ktrig;
pub mod oracle;
pub mod potentials;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{ChartPoint, ChordalPoint, ManifoldSpec};
pub use ktrig::Curvature;
pub use nalgebra::DMatrix;
