//! Finite element solver for the parabolic p-Laplace equation
//! `u_t - div((kappa + |grad u|)^(p-2) grad u) = f` with implicit Euler time
//! stepping, plus the error measures and experiment drivers of a convergence
//! study.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

// `!(x > 0)` rejects NaN together with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod constitutive;
pub mod error;
pub mod error_metrics;
pub mod experiments;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod projection;
pub mod quadrature;
pub mod scalar;
pub mod timestepper;

pub use constitutive::PLaplaceParams;
pub use error::{Error, Result};
pub use fespace::{FeFunction, FeSpace};
pub use mesh::{Domain, Mesh};
pub use scalar::Real;

pub type Mesh64 = Mesh<f64>;
pub type FeSpace64 = FeSpace<f64>;
pub type FeFunction64 = FeFunction<f64>;
pub type Params64 = PLaplaceParams<f64>;
