//! Numerical harmonic analysis on Damek–Ricci spaces S = N ⋊ A.
//!
//! N is an H-type group with its nonisotropic dilations δ_a and canonical
//! homogeneous norm; A = (0, ∞) acts by dilation. The crate evaluates the
//! Poisson and λ-Poisson kernels, transforms positive boundary measures into
//! eigenfunctions of the Laplace–Beltrami operator 𝓛, and checks numerically
//! that admissible boundary limits of those eigenfunctions agree with strong
//! derivatives of the boundary measure.

pub mod baseline;
pub mod density;
pub mod error;
pub mod fatou;
pub mod field;
pub mod group;
pub mod haar;
pub mod kernel;
pub mod measure;
pub mod operator;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use field::{FieldOnS, Provenance, SpacePoint};
pub use group::{BallSpec, HTypeGroup, Point};
pub use kernel::{eigenfunction_from_boundary, SpectralParam};
pub use measure::{Atom, BoundaryMeasure, DerivativeEstimate, LimitValue};
pub use quadrature::{Estimate, QuadOptions};
pub use fatou::{verify_fatou, FatouConfig, FatouReport, Verdict};
