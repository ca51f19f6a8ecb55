//! Strong-field above-threshold photoemission from metal nanotips.

pub mod analysis;
pub mod classical;
pub mod config;
pub mod error;
pub mod io;
pub mod laser;
pub mod scan;
pub mod spectro;
pub mod spectrum;
pub mod synthetic;
pub mod tdse;
pub mod tip;
pub mod units;

pub use error::{Error, Result};
pub use laser::{Envelope, Field, FieldTrace, LaserDrive};
pub use spectrum::Spectrum;
pub use tip::TipSurface;
