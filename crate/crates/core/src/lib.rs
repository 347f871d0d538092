//! Quantitative toolkit for measuring how a change in first-nature geography
//! (a channel opening or closing) propagates into market access, population,
//! occupations, trade and archaeological activity.
//!
//! Modules follow the pipeline order: [`geo`] prices a raster and computes
//! least-cost distances, [`market_access`] turns them into port-based market
//! access, [`paneldata`] aggregates census and trade records, [`estimators`]
//! fits event studies and PPML, [`archaeology`] builds Monte-Carlo activity
//! panels with clustered bootstrap inference, and [`matching`] builds
//! propensity-matched samples. [`synth`] generates synthetic worlds with known
//! ground truth.

pub mod archaeology;
pub mod error;
pub mod estimators;
pub mod geo;
pub mod io;
pub mod market_access;
pub mod matching;
pub mod paneldata;
pub mod synth;

pub use error::{Error, Result};
