//! tempobeat: how representative is any hour or day of an hourly activity
//! series?
//!
//! The pipeline standardizes the series, profiles its periodicity with lagged
//! autocorrelation, decomposes variance across hour / day / month-year levels
//! with linear mixed models, and ranks weekday-hour slots by prediction RMSD
//! to recommend "average" sampling slots.
//!
//! Modules follow the pipeline stages:
//! - [`series`]: canonical types, standardization, anomaly screening, proxy
//!   validation, summary profiles
//! - [`ingest`]: CSV parsing, covariate engineering, dataset assembly, the
//!   canonical bundle
//! - [`acf`]: the lagged autocorrelation estimator and correlogram presets
//! - [`mlm`]: the empty/full/restricted mixed models, ML fitting, BLUPs, and
//!   the dense verification oracle
//! - [`rmsd`]: deviation decompositions and the slot recommendation
//! - [`synth`]: the seeded generator with known ground truth

pub mod acf;
pub mod error;
pub mod ingest;
pub mod mlm;
pub mod rmsd;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
