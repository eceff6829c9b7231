//! Ensemble explicit dynamics for thin-shell vessel walls with spatially
//! random elastic modulus and thickness.
//!
//! The pipeline samples Matérn random fields on the lumen surface
//! ([`gmrf`]), builds per-realization shell stiffness ([`shell`]), and
//! advances all realizations together with a central-difference scheme
//! ([`integrator`]) on block-dense ensemble operators ([`linalg`]).

// Index loops mirror the math; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod geom;
pub mod linalg;
pub mod loading;
pub mod gmrf;
pub mod integrator;
pub mod mesh;
pub mod postproc;
pub mod scenario;
pub mod shell;
pub mod textfmt;
pub mod units;

pub use error::{Error, Result};
