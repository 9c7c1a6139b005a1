//! H₂-optimal model reduction of SISO systems whose poles live in a
//! conformally mapped domain A = ψ(X).
//!
//! The main entry point is [`irka::irka_com`]; [`experiment::run`] wires the
//! whole pipeline (model, reduction, norms, simulation, artifacts) together.

// `!(x > y)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod error;
pub mod experiment;
pub mod h2norm;
pub mod irka;
pub mod linalg;
pub mod lti;
pub mod models;
pub mod quadrature;
pub mod timesim;

pub use num_complex::Complex64 as C64;

pub use conformal::{ConformalMap, DomainMembership, Ellipse, Region};
pub use error::{Error, Result};
pub use h2norm::InnerProductReport;
pub use irka::{irka_com, EscapePolicy, IrkaOptions, OptimalityMode, ReductionResult, ShiftSet};
pub use lti::{PoleResidueForm, StateSpaceSystem, TransferFunction};
pub use models::ModelSpec;
pub use quadrature::QuadratureSettings;
pub use timesim::{InputSignal, SimOptions, Trajectory};
