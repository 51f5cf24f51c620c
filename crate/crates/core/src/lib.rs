//! Estimation and inference for grouped time-varying network vector autoregressions.
//!
//! Each node `i` of a network evolves as
//!
//! ```text
//! x_{i,t} = b_{i,1}(t/T) * sum_j w~_ij x_{j,t-1} + b_{i,2}(t/T) * x_{i,t-1} + e_{i,t}
//! ```
//!
//! where `W~` is the row-normalized adjacency and the coefficient functions
//! `b_i(.)` are shared within latent groups of nodes. The crate covers the
//! whole workflow:
//!
//! - [`simulate`]: networks, group assignments, coefficient scenarios and panels.
//! - [`local`]: node-wise local linear fits, jackknife bias correction,
//!   residuals and covariance plug-ins.
//! - [`cluster`]: the normalized distance matrix and agglomerative clustering.
//! - [`select`]: pooled fits and the information criterion for the group count.
//! - [`postgroup`]: group-specific coefficient paths with pointwise bands.
//! - [`spectest`]: kernel-weighted specification test of constant coefficients.
//! - [`pipeline`] and [`mc`]: the end-to-end estimator and a Monte-Carlo harness.
//! - [`cli`]: the `netvar` command-line front end.
//!
//! See the `examples/` directory for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cluster;
pub mod config;
pub mod error;
pub mod groups;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod local;
pub mod mc;
pub mod pipeline;
pub mod postgroup;
pub mod rng;
pub mod select;
pub mod simulate;
pub mod spectest;

pub use error::{Error, Result};
pub use groups::GroupStructure;
pub use kernel::{Bandwidths, Kernel};
pub use simulate::{CoefficientScenario, ErrorModel, Network, Panel};
