//! Simulation, data ingestion, configuration, reporting and the command-line
//! workflows built on [`dm_testlab_core`].

pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod run;
pub mod sampler;
pub mod sim;

pub use dm_testlab_core as model;
pub use error::{AppError, IngestError, SimError};
