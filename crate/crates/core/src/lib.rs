//! Sparse ReLU-type networks realizing affine-system approximations, with a
//! bit-exact network codec, α-shearlet systems, M-term approximation, and a
//! small SGD + Lasso training harness.

pub mod activation;
pub mod affine;
pub mod approx;
pub mod codec;
pub mod error;
pub mod grid;
pub mod network;
pub mod train;

pub use activation::ActivationKind;
pub use error::{Error, Result};
pub use grid::{grid_norms, Grid, SampledFunction};
pub use network::{AffineLayer, Network};
