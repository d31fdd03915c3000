//! Stochastic flows of the upper half-plane.
//!
//! Solves `dZ = F(Z)dt + dU` for holomorphic fields `F: ℍ → ℍ` and real
//! drivers `U`, and provides the surrounding toolkit: boundary curves of the
//! image domains, the exponential representation of `φ′`, Monte Carlo moment
//! scaling, and chordal Loewner chains.

pub mod analysis;
pub mod derivative;
pub mod error;
pub mod fields;
pub mod flow;
pub mod loewner;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result, Warning};
pub use fields::{iterate_field, shift_field, Atom, HalfPlaneField, Herglotz, HolomorphicField};
pub use flow::{
    boundary_curve, check_flow_property, closed_form_power_flow, flow_map, flow_point, integrate, BoundaryCurve,
    IntegratorOptions, Trajectory,
};
pub use num_complex::Complex64;
pub use paths::{DriverPath, PathKind};
