//! A full multi-penetration dataset: shared weather channels plus one net-load
//! series per penetration level, queryable as [`TimeSeriesFrame`] slices.

use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::calendar::{civil, CADENCE_SECS};
use crate::timeseries::{Channel, ChannelKind, Penetration, SeriesError, TimeSeriesFrame};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    start: i64,
    /// Temperature, humidity, apparent power, irradiance in [`ChannelKind::WEATHER`] order.
    weather: Vec<Channel>,
    /// Net load indexed by [`Penetration::index`].
    netload: Vec<Channel>,
}

impl Dataset {
    pub fn new(start: i64, weather: Vec<Channel>, netload: Vec<Channel>) -> Result<Self, SeriesError> {
        if weather.len() != 4 || netload.len() != 4 {
            return Err(SeriesError::InvalidFrame("dataset needs 4 weather and 4 netload channels".into()));
        }
        for (c, kind) in weather.iter().zip(ChannelKind::WEATHER) {
            if c.kind() != kind {
                return Err(SeriesError::InvalidFrame(alloc::format!("expected {kind}, found {}", c.kind())));
            }
        }
        if netload.iter().any(|c| c.kind() != ChannelKind::NetLoadActual) {
            return Err(SeriesError::InvalidFrame("netload slots must hold netload channels".into()));
        }
        let len = weather[0].len();
        if weather.iter().chain(&netload).any(|c| c.len() != len) {
            return Err(SeriesError::InvalidFrame("channel lengths differ".into()));
        }
        if start % CADENCE_SECS != 0 {
            return Err(SeriesError::InvalidFrame("start is not on the 15-minute grid".into()));
        }
        let ds = Dataset { start, weather, netload };
        // Reuse the frame checks (humidity range) on one penetration.
        TimeSeriesFrame::new(start, Penetration::P0, ds.frame_channels(Penetration::P0, 0..len))?;
        Ok(ds)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// Exclusive end timestamp.
    pub fn end(&self) -> i64 {
        self.start + self.len() as i64 * CADENCE_SECS
    }

    pub fn len(&self) -> usize {
        self.weather[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn year(&self) -> i32 {
        civil(self.start).year
    }

    pub fn timestamp(&self, index: usize) -> i64 {
        self.start + index as i64 * CADENCE_SECS
    }

    /// Index of the grid point at `ts`; `ts == end()` maps to `len()`.
    pub fn index_of(&self, ts: i64) -> Option<usize> {
        let off = ts - self.start;
        (off >= 0 && off % CADENCE_SECS == 0)
            .then(|| (off / CADENCE_SECS) as usize)
            .filter(|&i| i <= self.len())
    }

    pub fn weather(&self, kind: ChannelKind) -> Result<&Channel, SeriesError> {
        self.weather
            .iter()
            .find(|c| c.kind() == kind)
            .ok_or_else(|| SeriesError::NotFound(alloc::string::ToString::to_string(kind.name())))
    }

    pub fn weather_channels(&self) -> &[Channel] {
        &self.weather
    }

    pub fn netload(&self, penetration: Penetration) -> &Channel {
        &self.netload[penetration.index()]
    }

    pub(crate) fn weather_mut(&mut self) -> &mut [Channel] {
        &mut self.weather
    }

    fn frame_channels(&self, penetration: Penetration, range: Range<usize>) -> Vec<Channel> {
        let mut channels: Vec<Channel> = self.weather.iter().map(|c| c.slice(range.clone())).collect();
        channels.push(self.netload[penetration.index()].slice(range));
        channels
    }

    /// Frame over `range` (grid indices) for one penetration level.
    pub fn frame(&self, penetration: Penetration, range: Range<usize>) -> Result<TimeSeriesFrame, SeriesError> {
        if range.start > range.end || range.end > self.len() {
            return Err(SeriesError::OutOfRange { index: range.end, len: self.len() });
        }
        TimeSeriesFrame::new(self.timestamp(range.start), penetration, self.frame_channels(penetration, range))
    }

    /// Whole dataset at one penetration level.
    pub fn full_frame(&self, penetration: Penetration) -> TimeSeriesFrame {
        self.frame(penetration, 0..self.len()).expect("full range is valid")
    }

    /// Every channel with gaps linearly interpolated; tags record which
    /// samples were filled.
    pub fn interpolated(&self) -> Result<Dataset, SeriesError> {
        let fill = |c: &Channel| if c.missing_count() > 0 { c.interpolated() } else { Ok(c.clone()) };
        Ok(Dataset {
            start: self.start,
            weather: self.weather.iter().map(fill).collect::<Result<_, _>>()?,
            netload: self.netload.iter().map(fill).collect::<Result<_, _>>()?,
        })
    }
}
