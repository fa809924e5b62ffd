mod common;

use forte::csv_io::{as_observed, read_dataset, write_dataset, IngestError, HEADER};
use forte_core::{ChannelKind, Penetration};

fn to_csv(ds: &forte_core::Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_dataset(&mut out, ds).unwrap();
    out
}

#[test]
fn round_trip_preserves_values_and_gaps() {
    let ds = common::head(common::year(), 20);
    let bytes = to_csv(&ds);
    let back = read_dataset(bytes.as_slice()).unwrap();
    assert_eq!(back, as_observed(&ds));
    let missing = |d: &forte_core::Dataset| d.weather(ChannelKind::Temperature).unwrap().quality().iter().filter(|q| **q == forte_core::SampleQuality::Missing).count();
    assert!(missing(&ds) > 0);
    assert_eq!(missing(&ds), missing(&back));
    assert_eq!(to_csv(&back), bytes);
}

#[test]
fn header_and_first_row_format() {
    let bytes = to_csv(&common::head(common::year(), 1));
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), HEADER.join(","));
    assert!(lines.next().unwrap().starts_with("2020-01-01T00:00:00Z,"));
    assert_eq!(text.lines().count(), 97);
}

fn sample() -> String {
    String::from_utf8(to_csv(&common::head(common::year_filled(), 2))).unwrap()
}

fn replace_line(text: &str, line: usize, f: impl Fn(&str) -> String) -> String {
    text.lines()
        .enumerate()
        .map(|(i, l)| if i + 1 == line { f(l) } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn non_numeric_cell_reports_row() {
    let bad = replace_line(&sample(), 40, |l| {
        let mut cols: Vec<&str> = l.split(',').collect();
        cols[2] = "abc";
        cols.join(",")
    });
    let err = read_dataset(bad.as_bytes()).unwrap_err();
    assert_eq!(err.row(), Some(40));
    assert!(err.to_string().contains("humidity_pct"), "{err}");
}

#[test]
fn broken_cadence_reports_row() {
    let bad = replace_line(&sample(), 11, |l| l.replacen(":15:00Z", ":20:00Z", 1).replacen(":30:00Z", ":35:00Z", 1).replacen(":45:00Z", ":50:00Z", 1).replacen(":00:00Z", ":05:00Z", 1));
    let err = read_dataset(bad.as_bytes()).unwrap_err();
    assert_eq!(err.row(), Some(11));
    assert!(err.to_string().contains("cadence"));
}

#[test]
fn wrong_field_count_and_bad_timestamp() {
    let short = replace_line(&sample(), 5, |l| l.rsplitn(2, ',').nth(1).unwrap().to_string());
    assert_eq!(read_dataset(short.as_bytes()).unwrap_err().row(), Some(5));
    let ts = replace_line(&sample(), 7, |l| l.replacen("2020-01-01T", "2020/01/01 ", 1));
    assert_eq!(read_dataset(ts.as_bytes()).unwrap_err().row(), Some(7));
}

#[test]
fn bad_header_and_empty_file() {
    let text = sample().replacen("temperature_f", "temp", 1);
    assert!(matches!(read_dataset(text.as_bytes()), Err(IngestError::Header(_))));
    let only_header = format!("{}\n", HEADER.join(","));
    assert!(matches!(read_dataset(only_header.as_bytes()), Err(IngestError::Empty)));
}

#[test]
fn empty_cells_become_missing() {
    let text = replace_line(&sample(), 3, |l| {
        let mut cols: Vec<&str> = l.split(',').collect();
        cols[1] = "";
        cols[8] = "";
        cols.join(",")
    });
    let ds = read_dataset(text.as_bytes()).unwrap();
    assert_eq!(ds.weather(ChannelKind::Temperature).unwrap().value(1), None);
    assert_eq!(ds.netload(Penetration::P50).value(1), None);
    assert!(ds.netload(Penetration::P0).value(1).is_some());
}
