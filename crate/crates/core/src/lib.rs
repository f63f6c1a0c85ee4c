//! Random-feature estimators for the Gaussian and softmax kernels.
//!
//! The crate covers the trigonometric and positive baselines, generalized
//! exponential features (GERF) with their variance-optimal positive special
//! case (OPRF), discretely-induced features (Poisson and geometric, with
//! positivity-preserving shifted variants), block-orthogonal projection
//! ensembles, closed-form variance evaluation and parameter fitting, and the
//! FAVOR++ linear-attention operator.
//!
//! Every estimator `f1`, `f2` satisfies `K(x, y) = E Re(f1(w, x) f2(w, y))`
//! for the Gaussian kernel `K(x, y) = exp(-|x - y|^2 / 2)`; the softmax kernel
//! `exp(x^T y)` is served through the exact rescaling
//! `exp(|x|^2 / 2) K(x, y) exp(|y|^2 / 2)`.

pub mod apps;
pub mod error;
pub mod kernel_ops;
pub mod mechanisms;
pub mod projections;
pub mod rng;
pub mod stats;
pub mod summary;
pub mod variance;

pub use error::{Error, Result};
pub use rng::RngState;
