//! UTC calendar arithmetic on the fixed 15-minute grid.

use chrono::{DateTime, Datelike, NaiveDate, Timelike};

/// Seconds between consecutive samples.
pub const CADENCE_SECS: i64 = 900;
/// Samples per calendar day.
pub const STEPS_PER_DAY: usize = 96;

/// Broken-down view of one grid timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CivilTime {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    /// 1-based day of year.
    pub ordinal: u32,
    /// 0 = Monday.
    pub weekday: u32,
    /// Index of the 15-minute slot within the day.
    pub step_of_day: u32,
}

pub fn civil(ts: i64) -> CivilTime {
    let dt = DateTime::from_timestamp(ts, 0).expect("timestamp in chrono range");
    CivilTime {
        year: dt.year(),
        month: dt.month(),
        day: dt.day(),
        ordinal: dt.ordinal(),
        weekday: dt.weekday().num_days_from_monday(),
        step_of_day: (dt.hour() * 60 + dt.minute()) / 15,
    }
}

/// Midnight UTC of the given date, or `None` for an invalid date.
pub fn midnight(year: i32, month: u32, day: u32) -> Option<i64> {
    NaiveDate::from_ymd_opt(year, month, day)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

pub fn days_in_month(year: i32, month: u32) -> Option<u32> {
    let first = NaiveDate::from_ymd_opt(year, month, 1)?;
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)?
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)?
    };
    u32::try_from(next.signed_duration_since(first).num_days()).ok()
}

pub fn days_in_year(year: i32) -> u32 {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

/// Fractional position in the year in [0, 1), used for seasonal harmonics.
pub fn year_fraction(ts: i64) -> f64 {
    let c = civil(ts);
    let day = f64::from(c.ordinal - 1) + f64::from(c.step_of_day) / STEPS_PER_DAY as f64;
    day / f64::from(days_in_year(c.year))
}
