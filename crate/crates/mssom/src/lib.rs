//! File formats, CSV ingestion, the parallel grid runner and the command line
//! for minimally supervised SOM classification. The algorithms live in
//! [`mssom_core`].

pub mod cli;
pub mod csvio;
pub mod error;
pub mod formats;
pub mod grid;
pub mod report;

pub use error::{Error, Result};
