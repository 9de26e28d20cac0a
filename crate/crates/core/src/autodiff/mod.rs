//! Differentiation services.
//!
//! Two independent mechanisms live here:
//!
//! * [`Jet2`], a second-order Taylor jet carrying `(value, d/ds, d²/ds²)` of a
//!   quantity with respect to one scalar network input. Residuals containing
//!   `u'` and `u''` are assembled from jets.
//! * [`GradientTape`], a scalar reverse-mode tape giving exact parameter
//!   gradients of any loss written against the [`Real`] trait.
//!
//! Because [`Jet2`] is generic over [`Real`], a jet computation recorded on the
//! tape yields reverse-over-forward gradients. The batched training engine in
//! [`crate::nn`] implements the same reverse-over-forward sweep with dense
//! kernels; the tape is the scalar reference for it.

mod jet;
mod real;
mod tape;

pub use jet::{silu_derivatives, Jet2};
pub use real::Real;
pub use tape::{param_gradient, AutodiffError, GradientTape, Var};
