//! Hypoelliptic diffusions, natural Ornstein–Uhlenbeck processes and
//! hypoelliptic simulated annealing on tori, the Heisenberg nilmanifold and
//! SU(2).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod annealing;
pub mod dynamics;
pub mod error;
pub mod functional;
pub mod group;
pub mod kernel;
pub mod rng;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use group::{
    directional_derivative, AlgebraVector, Constant, FnField, GroupElement, GroupModel, Quaternion, ScalarField,
};
