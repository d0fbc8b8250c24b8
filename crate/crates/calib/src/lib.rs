//! File formats, data ingestion, parallel evaluation and the experiment
//! harness around [`abmcal_core`].

pub mod error;
pub mod harness;
pub mod ingest;
pub mod io;
pub mod parallel;

pub use abmcal_core as core;
pub use error::{Error, Result};
