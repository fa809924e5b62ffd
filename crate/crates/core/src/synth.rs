//! Deterministic synthetic residential dataset: weather, demand, rooftop PV,
//! and net load at the four penetration levels.
//!
//! Every stochastic term is drawn from a [`KeyedStream`] addressed by
//! `(seed, stream, step)`, so the output is a pure function of the config.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::calendar::{civil, days_in_year, midnight, year_fraction, CADENCE_SECS, STEPS_PER_DAY};
use crate::dataset::Dataset;
use crate::rng::KeyedStream;
use crate::timeseries::{Channel, ChannelKind, Penetration};

const STREAM_TEMP: u64 = 1;
const STREAM_HUMIDITY: u64 = 2;
const STREAM_CLOUD_DAY: u64 = 3;
const STREAM_CLOUD_STEP: u64 = 4;
const STREAM_DEMAND: u64 = 5;
const STREAM_GAPS: u64 = 100;

/// Per-step AR(1) coefficient of the temperature anomaly.
const TEMP_AR_PHI: f64 = 0.995;
const POWER_FACTOR: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("invalid synth config: {0}")]
pub struct SynthError(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub year: i32,
    pub seed: u64,
    pub base_load_kw: f64,
    /// Balance point of the heating/cooling response.
    pub cooling_setpoint_f: f64,
    pub heating_gain_kw_per_f: f64,
    pub cooling_gain_kw_per_f: f64,
    pub pv_capacity_kw: f64,
    pub gap_rate: f64,
    pub noise_sd_kw: f64,
    pub annual_mean_f: f64,
    pub annual_amplitude_f: f64,
    pub diurnal_amplitude_f: f64,
    /// Stationary standard deviation of the AR(1) weather anomaly.
    pub temperature_anomaly_sd_f: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            year: 2020,
            seed: 2020,
            base_load_kw: 2.0,
            cooling_setpoint_f: 65.0,
            heating_gain_kw_per_f: 0.08,
            cooling_gain_kw_per_f: 0.10,
            pv_capacity_kw: 5.0,
            gap_rate: 0.02,
            noise_sd_kw: 0.08,
            annual_mean_f: 62.0,
            annual_amplitude_f: 22.0,
            diurnal_amplitude_f: 8.0,
            temperature_anomaly_sd_f: 3.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..0.5).contains(&self.gap_rate) {
            return Err(SynthError(alloc::format!("gap_rate {} must lie in [0, 0.5)", self.gap_rate)));
        }
        if self.heating_gain_kw_per_f < 0.0 || self.cooling_gain_kw_per_f < 0.0 {
            return Err(SynthError("heating and cooling gains must be >= 0".into()));
        }
        if self.pv_capacity_kw < 0.0 {
            return Err(SynthError("pv_capacity_kw must be >= 0".into()));
        }
        if self.noise_sd_kw < 0.0 || self.temperature_anomaly_sd_f < 0.0 {
            return Err(SynthError("noise levels must be >= 0".into()));
        }
        if midnight(self.year, 1, 1).is_none() {
            return Err(SynthError(alloc::format!("year {} out of range", self.year)));
        }
        Ok(())
    }
}

/// Hourly occupancy-driven load on top of the base load (kW).
fn occupancy_kw(hour: f64, weekend: bool) -> f64 {
    let bump = |centre: f64, width: f64| libm::exp(-((hour - centre) / width) * ((hour - centre) / width));
    let mut kw = 0.5 * bump(7.5, 1.5) + 1.0 * bump(19.0, 2.5);
    if weekend {
        kw += 0.3 * bump(13.0, 3.0);
    }
    kw
}

/// Clear-sky irradiance before clouds (W/m²); zero outside daylight.
fn clear_sky_wm2(hour: f64, season: f64) -> f64 {
    let day_length = 12.0 + 3.0 * season;
    let sunrise = 12.0 - day_length / 2.0;
    let since = hour - sunrise;
    if since <= 0.0 || since >= day_length {
        return 0.0;
    }
    let peak = 650.0 + 350.0 * season;
    peak * libm::sin(PI * since / day_length)
}

/// Generates one calendar year on the 15-minute grid, with gaps injected at
/// `config.gap_rate`.
pub fn generate(config: &SynthConfig) -> Result<Dataset, SynthError> {
    config.validate()?;
    let start = midnight(config.year, 1, 1).expect("validated year");
    let n = days_in_year(config.year) as usize * STEPS_PER_DAY;

    let mut temperature = Vec::with_capacity(n);
    let mut humidity = Vec::with_capacity(n);
    let mut irradiance = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);

    let mut temp_noise = KeyedStream::new(config.seed, STREAM_TEMP);
    let mut humid_noise = KeyedStream::new(config.seed, STREAM_HUMIDITY);
    let mut cloud_noise = KeyedStream::new(config.seed, STREAM_CLOUD_STEP);
    let mut demand_noise = KeyedStream::new(config.seed, STREAM_DEMAND);

    let innovation_sd = config.temperature_anomaly_sd_f * libm::sqrt(1.0 - TEMP_AR_PHI * TEMP_AR_PHI);
    let mut anomaly = config.temperature_anomaly_sd_f * temp_noise.next_normal();
    let mut cloud_day = 1.0;

    for i in 0..n {
        let ts = start + i as i64 * CADENCE_SECS;
        let c = civil(ts);
        let hour = f64::from(c.step_of_day) / 4.0;
        let yf = year_fraction(ts);
        // Coldest in mid January, warmest in mid July.
        let annual = -libm::cos(TAU * (yf - 15.0 / 366.0));
        // +1 at the summer solstice, -1 at the winter solstice.
        let season = libm::sin(TAU * (yf - 80.0 / 366.0));

        if i > 0 {
            anomaly = TEMP_AR_PHI * anomaly + innovation_sd * temp_noise.next_normal();
        }
        let diurnal = -libm::cos(TAU * (hour - 4.0) / 24.0);
        let temp = config.annual_mean_f
            + config.annual_amplitude_f * annual
            + config.diurnal_amplitude_f * diurnal
            + anomaly;

        let rh = (80.0 - 0.5 * (temp - 50.0)).clamp(15.0, 100.0) + 3.0 * humid_noise.next_normal();

        if c.step_of_day == 0 {
            let day = u64::from(c.ordinal - 1);
            cloud_day = 0.35 + 0.65 * KeyedStream::at(config.seed, STREAM_CLOUD_DAY, day, 1).next_unit();
        }
        let cloud = (cloud_day * (1.0 + 0.1 * cloud_noise.next_normal())).clamp(0.0, 1.0);
        let irr = clear_sky_wm2(hour, season) * cloud;

        let weekend = c.weekday >= 5;
        let heating = config.heating_gain_kw_per_f * (config.cooling_setpoint_f - temp).max(0.0);
        let cooling = config.cooling_gain_kw_per_f * (temp - config.cooling_setpoint_f).max(0.0);
        let load = config.base_load_kw
            + occupancy_kw(hour, weekend)
            + heating
            + cooling
            + config.noise_sd_kw * demand_noise.next_normal();

        temperature.push(temp);
        humidity.push(rh.clamp(15.0, 100.0));
        irradiance.push(irr.max(0.0));
        demand.push(load);
    }

    let pv: Vec<f64> = irradiance.iter().map(|irr| config.pv_capacity_kw * irr / 1000.0).collect();
    let apparent: Vec<f64> = demand.iter().map(|d| d / POWER_FACTOR).collect();
    let netload = Penetration::ALL
        .iter()
        .map(|p| {
            // P50 subtracts the full configured PV output.
            let share = p.fraction() / 0.5;
            let values = demand.iter().zip(&pv).map(|(d, g)| d - share * g).collect();
            Channel::observed(ChannelKind::NetLoadActual, values)
        })
        .collect();

    let weather = alloc::vec![
        Channel::observed(ChannelKind::Temperature, temperature),
        Channel::observed(ChannelKind::Humidity, humidity),
        Channel::observed(ChannelKind::ApparentPower, apparent),
        Channel::observed(ChannelKind::SolarIrradiance, irradiance),
    ];
    let dataset = Dataset::new(start, weather, netload).map_err(|e| SynthError(alloc::format!("{e}")))?;
    inject_gaps(&dataset, config.gap_rate, config.seed)
}

/// Marks random runs of 1-16 weather samples Missing until about `gap_rate`
/// of each weather channel is missing. Net load is never touched.
pub fn inject_gaps(dataset: &Dataset, gap_rate: f64, seed: u64) -> Result<Dataset, SynthError> {
    if !(0.0..0.5).contains(&gap_rate) {
        return Err(SynthError(alloc::format!("gap_rate {gap_rate} must lie in [0, 0.5)")));
    }
    let mut out = dataset.clone();
    let n = out.len();
    if gap_rate == 0.0 || n == 0 {
        return Ok(out);
    }
    let target = libm::round(gap_rate * n as f64) as usize;
    for (k, channel) in out.weather_mut().iter_mut().enumerate() {
        let mut draws = KeyedStream::new(seed, STREAM_GAPS + k as u64);
        while channel.missing_count() < target {
            let start = (draws.next_u64() % n as u64) as usize;
            let len = 1 + (draws.next_u64() % 16) as usize;
            for i in start..(start + len).min(n) {
                channel.set_missing(i);
            }
        }
    }
    Ok(out)
}
