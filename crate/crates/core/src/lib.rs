//! Numerical laboratory for the epidemic process on a complete graph.
//!
//! A population of n nodes, each susceptible, infected, or recovered, evolves
//! by pairwise infection at rate tau/n per susceptible-infected pair and
//! recovery at rate gamma per infected node. The crate implements every
//! description of that process a desk-scale study needs, each behind its own
//! module, so they can be played against each other:
//!
//! - [`master`]: the exact distribution over the state triangle,
//! - [`gillespie`]: event-driven sampling of the same chain,
//! - [`meanfield`]: the deterministic infinite-population limit,
//! - [`closure`]: the reduced three-moment system that interpolates between
//!   the two, driven by pluggable closure values,
//! - [`bounds`]: the explicit Gronwall envelope certifying how fast the
//!   moments approach the limit,
//! - [`inequalities`]: the elementary variance and covariance bounds the
//!   envelope rests on, checked in exact arithmetic,
//! - [`acceptance`]: scripted end-to-end verification runs over all of it.
//!
//! Deterministic numerics are generic over the scalar type through
//! [`scalar::Real`]; `f64` is the default type parameter everywhere, so
//! `TrajectoryTable` means `TrajectoryTable<f64>` unless spelled otherwise.

pub mod acceptance;
pub mod bounds;
pub mod closure;
pub mod error;
pub mod expm;
pub mod gillespie;
pub mod inequalities;
pub mod master;
pub mod meanfield;
pub mod model;
pub mod moments;
pub mod ode;
pub mod scalar;
pub mod tolerances;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{validate_params, InitialCondition, ModelParams, Scenario};
pub use moments::{MomentSet, MomentVector};
pub use scalar::Real;
pub use trajectory::{uniform_grid, uniform_step, TrajectoryTable};
