//! Building height estimation from GNSS signal strength.
//!
//! Observations of satellites seen (or not) from receivers near a building
//! are reduced to `(C/N0, intersection height)` tuples against the building
//! footprint. A co-training loop between a signal-strength classifier and a
//! height classifier, both four-parameter logistic curves, then yields a
//! height estimate and an uncertainty range.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geo;
pub mod ingest;
pub mod mapper;
pub mod report;
pub mod signal_model;
pub mod synth;

use thiserror::Error;

pub use geo::{Footprint, GeoPoint, PlanarPoint};
pub use ingest::{BuildingDataset, ObservationRecord};
pub use mapper::{run_4pl, run_4plb, run_bayes, run_hinge, ConvergenceConfig, HeightEstimate};
pub use signal_model::{fit_4pl_mle, FourPLParams};

/// Any library error, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geo: {0}")]
    Geo(#[from] geo::GeoError),
    #[error("ingest: {0}")]
    Ingest(#[from] ingest::IngestError),
    #[error("signal_model: {0}")]
    Fit(#[from] signal_model::FitError),
    #[error("mapper: {0}")]
    Mapper(#[from] mapper::MapperError),
    #[error("synth: {0}")]
    Synth(#[from] synth::SynthError),
}
