use std::path::PathBuf;

use thiserror::Error;

use crate::units::Dimension;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot convert {from} to {to}")]
    DimensionMismatch { from: Dimension, to: Dimension },
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("malformed quantity `{0}`")]
    BadQuantity(String),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("no residual barrier: schottky lowering {lowering:.4} eV exceeds work function {work_function:.4} eV")]
    OverBarrier { work_function: f64, lowering: f64 },
    #[error("channel of order {order} is already closed at zero intensity ({order}·ħω = {energy:.4} eV ≤ φ_eff = {barrier:.4} eV)")]
    ChannelClosed { order: u32, energy: f64, barrier: f64 },
    #[error("keldysh parameter undefined for zero ponderomotive energy")]
    ZeroPonderomotive,
    #[error("intensity {given:.4e} W/cm2 disagrees with {from_power:.4e} W/cm2 derived from power (>5%)")]
    IntensityMismatch { given: f64, from_power: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("emergent barrier {emergent:.4} eV deviates from analytic {analytic:.4} eV by more than 5%")]
    BarrierMismatch { emergent: f64, analytic: f64 },
    #[error("no bound state within {window:.3} eV of target {target:.3} eV (closest {closest:.3} eV)")]
    NoBoundState { target: f64, window: f64, closest: f64 },
    #[error("time step {dt:.4} a.u. resolves the optical cycle with only {steps_per_cycle:.1} steps (need 200)")]
    TimeStepTooLarge { dt: f64, steps_per_cycle: f64 },
    #[error("propagation unstable at step {step}: norm grew by {growth:.3e}")]
    Unstable { step: usize, growth: f64 },

    #[error("spectrum and voltage grid do not overlap")]
    NoOverlap,
    #[error("non-uniform grid")]
    NonUniformGrid,
    #[error("invalid smoothing window {window} / order {order}")]
    BadSmoothing { window: usize, order: usize },

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("no cut-on crossing in spectrum")]
    NoCutOn,
    #[error("slope must be negative, got {0:e}")]
    NonNegativeSlope(f64),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("config field {path}: {message}")]
    ConfigField { path: String, message: String },
    #[error("unknown plot-data kind `{0}`")]
    UnknownKind(String),
    #[error("malformed data file {path}: {message}")]
    DataFormat { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}
