//! Stability certificates for relative equilibria of Hamiltonian systems with
//! linear symplectic symmetry.
//!
//! The pipeline: build a [`HamiltonianSystem`], compute the isotropy data and
//! a symplectic slice at a point with [`slice::witt_artin`], find the
//! admissible velocities with [`certify::solve_velocities`], and search the
//! family for a definite restricted Hessian with
//! [`certify::definiteness_search`]. [`dynamics::stability_probe`] checks the
//! verdict by direct simulation.

pub mod certify;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod gallery;
pub mod invariants;
pub mod linalg;
pub mod momentum;
pub mod phase_space;
pub mod slice;
pub mod symmetry;
pub mod system;

pub use certify::{StabilityCertificate, Verdict};
pub use error::{Error, Result};
pub use momentum::{MomentumMap, MomentumValue};
pub use phase_space::{Monomial, Poly, SymplecticSpace};
pub use slice::WittArtinFrame;
pub use symmetry::{AlgebraVector, LieAlgebraBasis, StructureConstants, Subalgebra};
pub use system::HamiltonianSystem;
