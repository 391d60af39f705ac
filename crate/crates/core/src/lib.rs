//! Lattice workbench for the one-particle structure behind relative Haag duality of the
//! free scalar and electromagnetic fields.
//!
//! The crate is organised bottom-up: [`grid`] and [`field`] provide the periodic lattice,
//! [`spectral`] the Fourier-multiplier operators, [`propagator`] the commutator function,
//! [`symplectic`] the shared subspace linear algebra, and [`scalar_space`], [`em_space`]
//! and [`fock`] the field-specific constructions. [`geometry`] is independent of the
//! lattice and handles exact causal regions in Minkowski space.

pub mod cauchy;
pub mod em_space;
pub mod error;
pub mod field;
pub mod fock;
pub mod geometry;
pub mod grid;
pub mod mask;
pub mod propagator;
pub mod quadrature;
pub mod scalar_space;
pub mod spectral;
pub mod symplectic;

pub use cauchy::CauchyDatum;
pub use error::{Error, Result};
pub use field::LatticeField;
pub use grid::{Dispersion, LatticeGrid};
pub use em_space::EMDatum;
pub use fock::FockContext;
pub use mask::SiteSet;
pub use symplectic::{Subspace, SymplecticSpace, Tolerances};
