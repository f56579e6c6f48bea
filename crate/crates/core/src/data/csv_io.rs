use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};

use super::{ReturnSeries, RvSeries};
use crate::error::{Error, Result};

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Which value column a minute file carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceColumn {
    /// `price` if present, else `return`.
    #[default]
    Auto,
    Price,
    Return,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a UTF-8 minute file with a header row, a `timestamp` column
/// (ISO-8601) and a `price` or `return` column. Rows are sorted by time;
/// prices become log returns stamped at the later of each pair.
pub fn load_csv<R: Read>(reader: R, column: PriceColumn) -> Result<ReturnSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let ts_col = find("timestamp").ok_or_else(|| parse_error(1, "missing `timestamp` column"))?;
    let (value_col, is_price) = match (column, find("price"), find("return")) {
        (PriceColumn::Auto | PriceColumn::Price, Some(c), _) => (c, true),
        (PriceColumn::Auto | PriceColumn::Return, _, Some(c)) => (c, false),
        _ => return Err(parse_error(1, "missing `price` / `return` column")),
    };

    let mut rows: Vec<(NaiveDateTime, f64, usize)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_error(line, e.to_string()))?;
        let ts_raw = record.get(ts_col).ok_or_else(|| parse_error(line, "missing timestamp"))?;
        let ts = parse_timestamp(ts_raw).ok_or_else(|| parse_error(line, format!("bad timestamp {ts_raw:?}")))?;
        let raw = record.get(value_col).ok_or_else(|| parse_error(line, "missing value"))?;
        let value: f64 = raw.parse().map_err(|_| parse_error(line, format!("bad number {raw:?}")))?;
        if !value.is_finite() {
            return Err(parse_error(line, "value is not finite"));
        }
        if is_price && value <= 0.0 {
            return Err(Error::NonPositivePrice { line });
        }
        rows.push((ts, value, line));
    }
    rows.sort_by_key(|r| r.0);

    let (stamps, values): (Vec<_>, Vec<_>) = if is_price {
        rows.windows(2).map(|w| (w[1].0, (w[1].1 / w[0].1).ln())).unzip()
    } else {
        rows.iter().map(|r| (r.0, r.1)).unzip()
    };
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    ReturnSeries::new(stamps, values)
}

pub fn write_returns_csv<W: Write>(mut w: W, series: &ReturnSeries) -> Result<()> {
    writeln!(w, "timestamp,return")?;
    for (ts, r) in series.timestamps().iter().zip(series.returns()) {
        writeln!(w, "{},{:.16e}", ts.format(TS_FORMAT), r)?;
    }
    Ok(())
}

/// Realized-variance cache: header `bar_ts,rv`, ISO timestamps and 17
/// significant digits so that files are reproducible and diffable.
pub fn write_rv_csv<W: Write>(mut w: W, rv: &RvSeries) -> Result<()> {
    writeln!(w, "bar_ts,rv")?;
    for (ts, v) in rv.bar_timestamps.iter().zip(&rv.rv) {
        writeln!(w, "{},{:.16e}", ts.format(TS_FORMAT), v)?;
    }
    Ok(())
}

pub fn read_rv_csv<R: Read>(reader: R, bar_minutes: u32) -> Result<RvSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    let ts_col = headers.iter().position(|h| h == "bar_ts").ok_or_else(|| parse_error(1, "missing `bar_ts`"))?;
    let rv_col = headers.iter().position(|h| h == "rv").ok_or_else(|| parse_error(1, "missing `rv`"))?;
    let mut stamps = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_error(line, e.to_string()))?;
        let ts = record
            .get(ts_col)
            .and_then(parse_timestamp)
            .ok_or_else(|| parse_error(line, "bad bar timestamp"))?;
        let v: f64 = record
            .get(rv_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_error(line, "bad rv value"))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(parse_error(line, "rv must be finite and non-negative"));
        }
        stamps.push(ts);
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    RvSeries::from_bars(stamps, values, bar_minutes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prices_become_log_returns() {
        let text = "timestamp,price\n2018-07-02T08:01:00,100\n2018-07-02T08:02:00,101\n";
        let s = load_csv(text.as_bytes(), PriceColumn::Auto).unwrap();
        assert_eq!(s.returns(), &[(1.01f64).ln()]);
        assert_eq!(s.timestamps()[0].format(TS_FORMAT).to_string(), "2018-07-02T08:02:00");
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let text = "timestamp,return\n2018-07-02 08:03:00,0.3\n2018-07-02T08:01:00Z,0.1\n2018-07-02T08:02,0.2\n";
        let s = load_csv(text.as_bytes(), PriceColumn::Return).unwrap();
        assert_eq!(s.returns(), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(
            load_csv("timestamp,price\n".as_bytes(), PriceColumn::Auto),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn reports_line_numbers() {
        let text = "timestamp,price\n2018-07-02T08:01:00,100\n2018-07-02T08:02:00,abc\n";
        assert!(matches!(load_csv(text.as_bytes(), PriceColumn::Auto), Err(Error::Parse { line: 3, .. })));
        let text = "timestamp,price\n2018-07-02T08:01:00,100\nnot-a-date,1\n";
        assert!(matches!(load_csv(text.as_bytes(), PriceColumn::Auto), Err(Error::Parse { line: 3, .. })));
        let text = "timestamp,price\n2018-07-02T08:01:00,100\n2018-07-02T08:02:00,0\n";
        assert!(matches!(load_csv(text.as_bytes(), PriceColumn::Auto), Err(Error::NonPositivePrice { line: 3 })));
    }

    #[test]
    fn duplicate_timestamps_are_rejected() {
        let text = "timestamp,return\n2018-07-02T08:01:00,0.1\n2018-07-02T08:01:00,0.2\n";
        assert!(matches!(
            load_csv(text.as_bytes(), PriceColumn::Auto),
            Err(Error::UnsortedTimestamps { .. })
        ));
    }

    #[test]
    fn returns_round_trip() {
        let text = "timestamp,return\n2018-07-02T08:01:00,0.001\n2018-07-02T08:02:00,-0.0023456789012345\n2018-07-02T08:03:00,1e-9\n";
        let s = load_csv(text.as_bytes(), PriceColumn::Auto).unwrap();
        let mut buf = Vec::new();
        write_returns_csv(&mut buf, &s).unwrap();
        let back = load_csv(buf.as_slice(), PriceColumn::Auto).unwrap();
        assert_eq!(back.timestamps(), s.timestamps());
        for (a, b) in back.returns().iter().zip(s.returns()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn rv_cache_is_stable() {
        let rv = RvSeries::from_bars(
            vec![
                parse_timestamp("2018-07-02T08:00:00").unwrap(),
                parse_timestamp("2018-07-02T08:30:00").unwrap(),
            ],
            vec![1.0 / 3.0, 2.5e-7],
            30,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_rv_csv(&mut buf, &rv).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "bar_ts,rv\n2018-07-02T08:00:00,3.3333333333333331e-1\n2018-07-02T08:30:00,2.4999999999999999e-7\n"
        );
        assert_eq!(read_rv_csv(buf.as_slice(), 30).unwrap(), rv);
    }
}
