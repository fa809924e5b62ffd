//! Core of the Forte net-load forecast evaluation workbench.
//!
//! Everything in this crate is a pure function of its inputs: the time-series
//! frame and its gap handling, the synthetic dataset generator, the reference
//! probabilistic forecaster, error metrics, and the noise-sensitivity
//! experiment arithmetic. IO, persistence, threading and HTTP live in the
//! `forte` crate.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calendar;
pub mod dataset;
pub mod experiment;
pub mod forecast;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod synth;
pub mod timeseries;

pub use dataset::Dataset;
pub use experiment::{
    DeviationRecord, ExperimentResults, ExperimentSpec, ExperimentStatus, Month,
};
pub use forecast::{Forecaster, ForecastSeries, ForecasterModel, Horizon};
pub use metrics::MetricSet;
pub use noise::{Direction, NoiseMode, NoisePerturbation};
pub use timeseries::{
    Channel, ChannelKind, GapInterval, Penetration, SampleQuality, SeriesError, TimeSeriesFrame,
};
