//! Exterior-domain Stokes and steady Navier–Stokes flows on the hyperbolic
//! plane H²(−a²), computed in the Poincaré disk.
//!
//! The pipeline builds a harmonic 1-form `dF`, cuts it off near the obstacle,
//! repairs the divergence with a ring-supported correction `w`, and solves the
//! remaining variational problem for `w̃` (Stokes) or `w_R` (Navier–Stokes).
//! [`verify`] checks the resulting flow is nontrivial and not a potential flow.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod calculus;
pub mod divsolve;
pub mod error;
pub mod fields;
pub mod hypgeom;
pub mod mesh;
pub(crate) mod modes;
pub mod navierstokes;
pub(crate) mod stencil;
pub mod stokes;
pub(crate) mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use hypgeom::DomainSpec;
pub use mesh::{AnnulusGrid, BoundaryClass, OneFormField, ScalarField, TensorField};
