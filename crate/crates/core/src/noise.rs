//! Multiplicative noise models applied to one weather channel.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::KeyedStream;
use crate::timeseries::{ChannelKind, SeriesError, TimeSeriesFrame};

pub const MAX_LEVEL_PERCENT: f64 = 30.0;
/// Levels offered by the interactive "Add Noise" control.
pub const AD_HOC_LEVELS: [f64; 2] = [5.0, 10.0];

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NoiseError {
    #[error("constant bias cannot be applied in both directions")]
    InvalidCombination,
    #[error("noise level {0}% is not allowed")]
    InvalidLevel(f64),
    #[error("noise can only be applied to weather channels, not {0}")]
    NotWeather(ChannelKind),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    ConstantBias,
    UniformRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Add,
    Subtract,
    Both,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::ConstantBias => "constant_bias",
            NoiseMode::UniformRandom => "uniform_random",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePerturbation {
    pub variable: ChannelKind,
    pub mode: NoiseMode,
    pub direction: Direction,
    /// Percent in [0, 30].
    pub level: f64,
    pub seed: u64,
}

impl NoisePerturbation {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(0.0..=MAX_LEVEL_PERCENT).contains(&self.level) {
            return Err(NoiseError::InvalidLevel(self.level));
        }
        if self.level > 0.0 && self.mode == NoiseMode::ConstantBias && self.direction == Direction::Both {
            return Err(NoiseError::InvalidCombination);
        }
        Ok(())
    }
}

/// Perturbs each sample relative to its own value. Uniform draws for sample
/// `i` come from position `i` of the stream keyed by `p.seed`. NaN (missing)
/// samples pass through.
pub fn perturb(values: &[f64], p: &NoisePerturbation) -> Result<Vec<f64>, NoiseError> {
    p.validate()?;
    if p.level == 0.0 {
        return Ok(values.to_vec());
    }
    let frac = p.level / 100.0;
    Ok(match p.mode {
        NoiseMode::ConstantBias => {
            let factor = match p.direction {
                Direction::Add => 1.0 + frac,
                Direction::Subtract => 1.0 - frac,
                Direction::Both => unreachable!("rejected by validate"),
            };
            values.iter().map(|x| x * factor).collect()
        }
        NoiseMode::UniformRandom => {
            let (lo, hi) = match p.direction {
                Direction::Add => (0.0, frac),
                Direction::Subtract => (-frac, 0.0),
                Direction::Both => (-frac, frac),
            };
            let mut stream = KeyedStream::new(p.seed, 0);
            values
                .iter()
                .map(|x| {
                    let u = lo + (hi - lo) * stream.next_unit();
                    x * (1.0 + u)
                })
                .collect()
        }
    })
}

/// Applies `p` to its variable across the whole frame, keeping quality tags.
pub fn perturb_frame(frame: &TimeSeriesFrame, p: &NoisePerturbation) -> Result<TimeSeriesFrame, NoiseError> {
    if !p.variable.is_weather() {
        return Err(NoiseError::NotWeather(p.variable));
    }
    let channel = frame.channel(p.variable)?;
    let noisy = perturb(channel.raw_values(), p)?;
    Ok(frame.with_channel(channel.with_values(noisy))?)
}

/// Interactive two-sided uniform noise at 5% or 10%.
pub fn ad_hoc_noise(frame: &TimeSeriesFrame, variable: ChannelKind, level: f64, seed: u64) -> Result<TimeSeriesFrame, NoiseError> {
    if !AD_HOC_LEVELS.contains(&level) {
        return Err(NoiseError::InvalidLevel(level));
    }
    let p = NoisePerturbation { variable, mode: NoiseMode::UniformRandom, direction: Direction::Both, level, seed };
    perturb_frame(frame, &p)
}
