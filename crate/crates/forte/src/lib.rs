//! Host-side half of Forte: dataset CSV and model JSON formats, the file-backed
//! experiment store, the parallel experiment runner and job queue, the REST
//! service and the `forte` command line.

pub mod api;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod datadir;
pub mod export;
pub mod model_io;
pub mod queue;
pub mod runner;
pub mod store;
pub mod timefmt;
