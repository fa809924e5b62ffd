//! Aligned 15-minute multichannel series with per-sample quality tags.
//!
//! Frames use value semantics: every editing operation returns a new frame and
//! leaves its input untouched, so callers can keep the pre-edit frame for undo.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::CADENCE_SECS;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("channel `{0}` not found")]
    NotFound(String),
    #[error("channel {0} has no valued samples to interpolate from")]
    UninterpolatableChannel(ChannelKind),
    #[error("index {index} out of range for channel of length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("channel {0} is empty")]
    EmptyChannel(ChannelKind),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SampleQuality {
    Observed,
    Missing,
    Interpolated,
    UserEdited,
}

impl SampleQuality {
    pub fn has_value(self) -> bool {
        self != SampleQuality::Missing
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// Degrees Fahrenheit.
    Temperature,
    /// Percent relative humidity.
    Humidity,
    /// kVA.
    ApparentPower,
    /// W/m².
    SolarIrradiance,
    /// kW at the frame's penetration level.
    #[serde(rename = "netload")]
    NetLoadActual,
}

impl ChannelKind {
    pub const WEATHER: [ChannelKind; 4] = [
        ChannelKind::Temperature,
        ChannelKind::Humidity,
        ChannelKind::ApparentPower,
        ChannelKind::SolarIrradiance,
    ];

    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Temperature,
        ChannelKind::Humidity,
        ChannelKind::ApparentPower,
        ChannelKind::SolarIrradiance,
        ChannelKind::NetLoadActual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Temperature => "temperature",
            ChannelKind::Humidity => "humidity",
            ChannelKind::ApparentPower => "apparent_power",
            ChannelKind::SolarIrradiance => "solar_irradiance",
            ChannelKind::NetLoadActual => "netload",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            ChannelKind::Temperature => "°F",
            ChannelKind::Humidity => "%RH",
            ChannelKind::ApparentPower => "kVA",
            ChannelKind::SolarIrradiance => "W/m²",
            ChannelKind::NetLoadActual => "kW",
        }
    }

    pub fn is_weather(self) -> bool {
        self != ChannelKind::NetLoadActual
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SeriesError::NotFound(s.to_string()))
    }
}

/// Solar penetration scenario selecting the active net-load channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Penetration {
    P0,
    P20,
    P30,
    P50,
}

impl Penetration {
    pub const ALL: [Penetration; 4] =
        [Penetration::P0, Penetration::P20, Penetration::P30, Penetration::P50];

    pub fn percent(self) -> u32 {
        match self {
            Penetration::P0 => 0,
            Penetration::P20 => 20,
            Penetration::P30 => 30,
            Penetration::P50 => 50,
        }
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.percent()) / 100.0
    }

    pub fn index(self) -> usize {
        match self {
            Penetration::P0 => 0,
            Penetration::P20 => 1,
            Penetration::P30 => 2,
            Penetration::P50 => 3,
        }
    }
}

impl fmt::Display for Penetration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.percent())
    }
}

impl FromStr for Penetration {
    type Err = String;

    /// Accepts `50`, `p50` or `P50`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.trim_start_matches(['p', 'P']).trim_end_matches('%');
        Penetration::ALL
            .into_iter()
            .find(|p| digits.parse::<u32>().ok() == Some(p.percent()))
            .ok_or_else(|| alloc::format!("unknown penetration level `{s}` (expected 0, 20, 30 or 50)"))
    }
}

/// Maximal run of Missing samples, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapInterval {
    pub start_index: usize,
    pub end_index: usize,
    pub channel: ChannelKind,
}

impl GapInterval {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One named channel. Missing samples are stored as NaN and never exposed as
/// values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct Channel {
    kind: ChannelKind,
    values: Vec<f64>,
    quality: Vec<SampleQuality>,
}

/// Missing samples compare equal to each other.
impl PartialEq for Channel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.quality == other.quality
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    kind: ChannelKind,
    values: Vec<Option<f64>>,
    quality: Vec<SampleQuality>,
}

impl From<Channel> for ChannelRepr {
    fn from(c: Channel) -> Self {
        ChannelRepr {
            kind: c.kind,
            values: (0..c.len()).map(|i| c.value(i)).collect(),
            quality: c.quality,
        }
    }
}

impl TryFrom<ChannelRepr> for Channel {
    type Error = SeriesError;

    fn try_from(r: ChannelRepr) -> Result<Self, Self::Error> {
        if r.values.len() != r.quality.len() {
            return Err(SeriesError::InvalidFrame("values and quality lengths differ".into()));
        }
        let mut values = Vec::with_capacity(r.values.len());
        for (v, q) in r.values.iter().zip(&r.quality) {
            match (v, q.has_value()) {
                (Some(x), true) if x.is_finite() => values.push(*x),
                (None, false) => values.push(f64::NAN),
                _ => {
                    return Err(SeriesError::InvalidFrame(
                        "sample value does not agree with its quality tag".into(),
                    ))
                }
            }
        }
        Ok(Channel { kind: r.kind, values, quality: r.quality })
    }
}

impl Channel {
    /// Fully observed channel.
    pub fn observed(kind: ChannelKind, values: Vec<f64>) -> Self {
        let quality = alloc::vec![SampleQuality::Observed; values.len()];
        Channel { kind, values, quality }
    }

    /// `None` entries become Missing, the rest Observed.
    pub fn from_options(kind: ChannelKind, samples: &[Option<f64>]) -> Self {
        let values = samples.iter().map(|s| s.unwrap_or(f64::NAN)).collect();
        let quality = samples
            .iter()
            .map(|s| if s.is_some() { SampleQuality::Observed } else { SampleQuality::Missing })
            .collect();
        Channel { kind, values, quality }
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> Option<f64> {
        self.quality[index].has_value().then(|| self.values[index])
    }

    /// Raw sample buffer; Missing samples read as NaN.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn quality(&self) -> &[SampleQuality] {
        &self.quality
    }

    pub fn missing_count(&self) -> usize {
        self.quality.iter().filter(|q| **q == SampleQuality::Missing).count()
    }

    /// Marks a sample Missing.
    pub fn set_missing(&mut self, index: usize) {
        self.values[index] = f64::NAN;
        self.quality[index] = SampleQuality::Missing;
    }

    pub fn slice(&self, range: Range<usize>) -> Channel {
        Channel {
            kind: self.kind,
            values: self.values[range.clone()].to_vec(),
            quality: self.quality[range].to_vec(),
        }
    }

    /// Same tags, values replaced sample-for-sample; Missing samples stay Missing.
    pub fn with_values(&self, values: Vec<f64>) -> Channel {
        assert_eq!(values.len(), self.len());
        let values = values
            .into_iter()
            .zip(&self.quality)
            .map(|(v, q)| if q.has_value() { v } else { f64::NAN })
            .collect();
        Channel { kind: self.kind, values, quality: self.quality.clone() }
    }

    pub fn gaps(&self) -> Vec<GapInterval> {
        let mut gaps = Vec::new();
        let mut run_start = None;
        for (i, q) in self.quality.iter().enumerate() {
            match (*q == SampleQuality::Missing, run_start) {
                (true, None) => run_start = Some(i),
                (false, Some(s)) => {
                    gaps.push(GapInterval { start_index: s, end_index: i - 1, channel: self.kind });
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            gaps.push(GapInterval { start_index: s, end_index: self.len() - 1, channel: self.kind });
        }
        gaps
    }

    /// Fills every Missing sample on the line between its nearest valued
    /// neighbours; one-sided gaps take the nearest value.
    pub fn interpolated(&self) -> Result<Channel, SeriesError> {
        let anchors: Vec<usize> = (0..self.len()).filter(|&i| self.quality[i].has_value()).collect();
        let (Some(&first), Some(&last)) = (anchors.first(), anchors.last()) else {
            return Err(SeriesError::UninterpolatableChannel(self.kind));
        };
        let mut out = self.clone();
        for gap in self.gaps() {
            for i in gap.start_index..=gap.end_index {
                let v = if i < first {
                    self.values[first]
                } else if i > last {
                    self.values[last]
                } else {
                    let (a, b) = (gap.start_index - 1, gap.end_index + 1);
                    let (va, vb) = (self.values[a], self.values[b]);
                    va + (vb - va) * (i - a) as f64 / (b - a) as f64
                };
                out.values[i] = v;
                out.quality[i] = SampleQuality::Interpolated;
            }
        }
        Ok(out)
    }

    pub fn missing_percent(&self) -> Result<f64, SeriesError> {
        if self.is_empty() {
            return Err(SeriesError::EmptyChannel(self.kind));
        }
        let missing = self
            .quality
            .iter()
            .filter(|q| matches!(q, SampleQuality::Missing | SampleQuality::Interpolated))
            .count();
        Ok(100.0 * missing as f64 / self.len() as f64)
    }
}

/// Channels on one shared 15-minute grid starting at `start` (UTC epoch
/// seconds). Exactly one NetLoadActual channel belongs to the frame's
/// penetration level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    start: i64,
    penetration: Penetration,
    channels: Vec<Channel>,
}

impl TimeSeriesFrame {
    pub fn new(start: i64, penetration: Penetration, channels: Vec<Channel>) -> Result<Self, SeriesError> {
        let netloads = channels.iter().filter(|c| c.kind == ChannelKind::NetLoadActual).count();
        if netloads != 1 {
            return Err(SeriesError::InvalidFrame(alloc::format!(
                "expected exactly one netload channel, found {netloads}"
            )));
        }
        let len = channels[0].len();
        for (i, c) in channels.iter().enumerate() {
            if c.len() != len {
                return Err(SeriesError::InvalidFrame(alloc::format!(
                    "channel {} has {} samples, expected {len}",
                    c.kind,
                    c.len()
                )));
            }
            if channels[..i].iter().any(|o| o.kind == c.kind) {
                return Err(SeriesError::InvalidFrame(alloc::format!("duplicate channel {}", c.kind)));
            }
            if c.kind == ChannelKind::Humidity {
                let bad = (0..c.len()).any(|j| {
                    c.quality[j] == SampleQuality::Observed && !(0.0..=100.0).contains(&c.values[j])
                });
                if bad {
                    return Err(SeriesError::InvalidFrame("observed humidity outside [0, 100]".into()));
                }
            }
        }
        Ok(TimeSeriesFrame { start, penetration, channels })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn cadence_secs(&self) -> i64 {
        CADENCE_SECS
    }

    pub fn penetration(&self) -> Penetration {
        self.penetration
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn timestamp(&self, index: usize) -> i64 {
        self.start + index as i64 * CADENCE_SECS
    }

    /// Exclusive end of the grid.
    pub fn end(&self) -> i64 {
        self.timestamp(self.len())
    }

    /// Grid index of `ts`, if it lies on the grid inside the frame.
    pub fn index_of(&self, ts: i64) -> Option<usize> {
        let off = ts - self.start;
        (off >= 0 && off % CADENCE_SECS == 0)
            .then(|| (off / CADENCE_SECS) as usize)
            .filter(|&i| i < self.len())
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, kind: ChannelKind) -> Result<&Channel, SeriesError> {
        self.channels
            .iter()
            .find(|c| c.kind == kind)
            .ok_or_else(|| SeriesError::NotFound(kind.name().to_string()))
    }

    pub fn has_channel(&self, kind: ChannelKind) -> bool {
        self.channels.iter().any(|c| c.kind == kind)
    }

    /// New frame with `kind` replaced by `channel`.
    pub fn with_channel(&self, channel: Channel) -> Result<Self, SeriesError> {
        let pos = self
            .channels
            .iter()
            .position(|c| c.kind == channel.kind)
            .ok_or_else(|| SeriesError::NotFound(channel.kind.name().to_string()))?;
        if channel.len() != self.len() {
            return Err(SeriesError::InvalidFrame("replacement channel length differs".into()));
        }
        let mut out = self.clone();
        out.channels[pos] = channel;
        Ok(out)
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        TimeSeriesFrame {
            start: self.timestamp(range.start),
            penetration: self.penetration,
            channels: self.channels.iter().map(|c| c.slice(range.clone())).collect(),
        }
    }

    /// Interpolates every channel that has Missing samples.
    pub fn interpolated_all(&self) -> Result<Self, SeriesError> {
        let mut out = self.clone();
        for c in out.channels.iter_mut() {
            if c.missing_count() > 0 {
                *c = c.interpolated()?;
            }
        }
        Ok(out)
    }
}

pub fn detect_gaps(frame: &TimeSeriesFrame, channel: ChannelKind) -> Result<Vec<GapInterval>, SeriesError> {
    Ok(frame.channel(channel)?.gaps())
}

pub fn interpolate_linear(frame: &TimeSeriesFrame, channel: ChannelKind) -> Result<TimeSeriesFrame, SeriesError> {
    let filled = frame.channel(channel)?.interpolated()?;
    frame.with_channel(filled)
}

/// Replaces one sample with an analyst-supplied value tagged UserEdited.
pub fn apply_override(
    frame: &TimeSeriesFrame,
    channel: ChannelKind,
    index: usize,
    value: f64,
) -> Result<TimeSeriesFrame, SeriesError> {
    let src = frame.channel(channel)?;
    if index >= src.len() {
        return Err(SeriesError::OutOfRange { index, len: src.len() });
    }
    if !value.is_finite() {
        return Err(SeriesError::InvalidFrame("override value must be finite".into()));
    }
    let mut edited = src.clone();
    edited.values[index] = value;
    edited.quality[index] = SampleQuality::UserEdited;
    frame.with_channel(edited)
}

/// Percent of samples that are Missing or Interpolated.
pub fn data_quality(frame: &TimeSeriesFrame, channel: ChannelKind) -> Result<f64, SeriesError> {
    frame.channel(channel)?.missing_percent()
}
