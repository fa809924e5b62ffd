use chrono::{DateTime, SecondsFormat, Utc};

/// `2020-01-01T00:00:00Z`.
pub fn format_timestamp(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

/// Parses an RFC 3339 timestamp with any offset into UTC epoch seconds.
pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    let t = DateTime::parse_from_rfc3339(s).map_err(|e| format!("`{s}` is not an ISO-8601 timestamp ({e})"))?;
    if t.timestamp_subsec_nanos() != 0 {
        return Err(format!("`{s}` has sub-second precision"));
    }
    Ok(t.timestamp())
}

pub fn now_rfc3339() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        assert_eq!(format_timestamp(1_577_836_800), "2020-01-01T00:00:00Z");
        assert_eq!(parse_timestamp("2020-01-01T00:00:00Z"), Ok(1_577_836_800));
        assert_eq!(parse_timestamp("2020-01-01T01:00:00+01:00"), Ok(1_577_836_800));
        assert!(parse_timestamp("2020-01-01").is_err());
        assert!(parse_timestamp("2020-01-01T00:00:00.5Z").is_err());
    }
}
