use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {z} lies below the real axis")]
    Domain { z: Complex64 },

    #[error("point {z} is a singular point of the field")]
    SingularPoint { z: Complex64 },

    #[error("{operation} is not available for {kind} fields")]
    Unsupported {
        operation: &'static str,
        kind: &'static str,
    },

    #[error("time {t} lies outside the path span [{t0}, {t1}]")]
    OutOfSpan { t: f64, t0: f64, t1: f64 },

    #[error("solution exploded at t = {time}: |Z| = {modulus:e} exceeds {bound:e}")]
    Explosion { time: f64, modulus: f64, bound: f64 },

    #[error("step at t = {time} landed at {z}, within {tolerance:e} of the singularity {singularity}")]
    SingularStep {
        time: f64,
        z: Complex64,
        singularity: Complex64,
        tolerance: f64,
    },

    #[error("insufficient lags: {0}")]
    InsufficientLags(String),

    #[error("degenerate curve: all sampled points coincide")]
    DegenerateCurve,

    #[error("window {window} around {center} leaves {left} / {right} samples per side (need {required})")]
    WindowTooSmall {
        center: f64,
        window: f64,
        left: usize,
        right: usize,
        required: usize,
    },

    #[error("every Monte Carlo path was censored")]
    AllCensored,
}

impl Error {
    /// Failures of the numerical integration itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Explosion { .. }
                | Error::SingularStep { .. }
                | Error::SingularPoint { .. }
                | Error::AllCensored
                | Error::DegenerateCurve
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Non-fatal conditions that every report carries forward to the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    SnapToGrid {
        requested: f64,
        snapped: f64,
    },
    Censoring {
        censored: usize,
        total: usize,
    },
    Truncation {
        horizon: f64,
        bound: Option<f64>,
        tail: f64,
    },
    SubdivisionCap {
        points: usize,
        cap: usize,
    },
    MomentBelowThreshold {
        p: f64,
        required: f64,
    },
}
