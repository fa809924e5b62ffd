#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;

use forte::datadir::DataDir;
use forte_core::experiment::DayWindow;
use forte_core::forecast::fit;
use forte_core::synth::{generate, SynthConfig};
use forte_core::{
    Channel, Dataset, Direction, ExperimentSpec, ForecasterModel, Horizon, Month, NoiseMode, Penetration,
};

/// Default synthetic year, gaps included.
pub fn year() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| generate(&SynthConfig::default()).unwrap())
}

pub fn year_filled() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| year().interpolated().unwrap())
}

pub fn model_p50_min15() -> &'static ForecasterModel {
    static M: OnceLock<ForecasterModel> = OnceLock::new();
    M.get_or_init(|| fit(&year_filled().full_frame(Penetration::P50), Horizon::Min15, Penetration::P50).unwrap())
}

/// First `days` days of `ds`.
pub fn head(ds: &Dataset, days: usize) -> Dataset {
    let n = days * 96;
    let cut = |c: &Channel| c.slice(0..n);
    Dataset::new(
        ds.start(),
        ds.weather_channels().iter().map(cut).collect(),
        Penetration::ALL.iter().map(|p| cut(ds.netload(*p))).collect(),
    )
    .unwrap()
}

pub fn spec(months: Vec<Month>, levels: Vec<f64>, observations: u32) -> ExperimentSpec {
    ExperimentSpec {
        name: "fixture".into(),
        description: "test fixture".into(),
        variable: forte_core::ChannelKind::Temperature,
        penetration: Penetration::P50,
        horizon: Horizon::Min15,
        months,
        day_window: DayWindow { start: 3, end: 4 },
        noise_levels: levels,
        mode: NoiseMode::UniformRandom,
        direction: Direction::Both,
        observations,
        seed: 11,
    }
}

/// A data directory holding the default year and the P50/Min15 model.
pub fn populate(dir: &Path) -> DataDir {
    let d = DataDir::new(dir);
    d.store_dataset(year()).unwrap();
    d.save_model(model_p50_min15()).unwrap();
    d
}

pub fn forte_bin() -> &'static str {
    env!("CARGO_BIN_EXE_forte")
}
