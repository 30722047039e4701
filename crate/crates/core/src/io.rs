//! CSV and JSON readers/writers for series, TPDF estimates and models.
//! Floating-point values are written with 17 significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::estimate::TpdfEstimate;
use crate::{Error, Result};

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
];

/// A value series with optional timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub timestamps: Option<Vec<NaiveDateTime>>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pairs of (timestamp, value); errors if the series has no timestamps.
    pub fn timed(&self) -> Result<Vec<(NaiveDateTime, f64)>> {
        let ts = self
            .timestamps
            .as_ref()
            .ok_or_else(|| Error::Malformed("series has no timestamp column".into()))?;
        Ok(ts.iter().copied().zip(self.values.iter().copied()).collect())
    }
}

/// Parses ISO-8601 date-times (a bare date means midnight); an offset, if
/// present, is dropped after reading the local clock time.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_local());
    }
    for fmt in TIMESTAMP_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_time(NaiveTime::MIN));
    }
    Err(Error::Malformed(format!("unparseable timestamp '{s}'")))
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header_index(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Malformed(format!("line {line}: invalid {column} '{field}'")))
}

/// Reads a CSV with a `value` column and an optional `timestamp` column.
pub fn read_series<R: Read>(reader: R) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let value_col = header_index(&headers, &["value"])
        .ok_or_else(|| Error::Malformed("missing 'value' column".into()))?;
    let ts_col = header_index(&headers, &["timestamp", "time", "datetime"]);
    let mut series = Series {
        timestamps: ts_col.map(|_| Vec::new()),
        values: Vec::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Malformed(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = record
            .get(value_col)
            .ok_or_else(|| Error::Malformed(format!("line {line}: missing value")))?;
        let v = parse_f64(field, line, "value")?;
        if !v.is_finite() {
            return Err(Error::Malformed(format!("line {line}: non-finite value '{field}'")));
        }
        series.values.push(v);
        if let (Some(col), Some(ts)) = (ts_col, series.timestamps.as_mut()) {
            let raw = record
                .get(col)
                .ok_or_else(|| Error::Malformed(format!("line {line}: missing timestamp")))?;
            ts.push(parse_timestamp(raw).map_err(|e| Error::Malformed(format!("line {line}: {e}")))?);
        }
    }
    Ok(series)
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| with_path(e, path))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| with_path(e, path))
}

pub fn read_series_file(path: &Path) -> Result<Series> {
    read_series(BufReader::new(open(path)?))
}

pub fn write_series<W: Write>(writer: W, series: &Series) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    match &series.timestamps {
        Some(ts) => {
            w.write_record(["timestamp", "value"])?;
            for (t, v) in ts.iter().zip(&series.values) {
                w.write_record([format_timestamp(t), format_f64(*v)])?;
            }
        }
        None => {
            w.write_record(["value"])?;
            for v in &series.values {
                w.write_record([format_f64(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_file(path: &Path, series: &Series) -> Result<()> {
    write_series(BufWriter::new(create(path)?), series)
}

pub fn write_values_file(path: &Path, values: &[f64]) -> Result<()> {
    write_series_file(
        path,
        &Series {
            timestamps: None,
            values: values.to_vec(),
        },
    )
}

/// `lag,sigma_hat,n_exceed` for lags `1..=H`.
pub fn write_tpdf<W: Write>(writer: W, est: &TpdfEstimate) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lag", "sigma_hat", "n_exceed"])?;
    for (i, (s, n)) in est.sigma_hat.iter().zip(&est.n_exceed).enumerate() {
        w.write_record([(i + 1).to_string(), format_f64(*s), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tpdf_file(path: &Path, est: &TpdfEstimate) -> Result<()> {
    write_tpdf(BufWriter::new(create(path)?), est)
}

/// Reads a TPDF CSV. Lags must run `1, 2, …` without gaps; `n_exceed` is
/// optional. The radial quantile is not stored in the file and is `NaN`.
pub fn read_tpdf<R: Read>(reader: R) -> Result<TpdfEstimate> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let lag_col = header_index(&headers, &["lag"]).ok_or_else(|| Error::Malformed("missing 'lag' column".into()))?;
    let sigma_col = header_index(&headers, &["sigma_hat", "sigma"])
        .ok_or_else(|| Error::Malformed("missing 'sigma_hat' column".into()))?;
    let count_col = header_index(&headers, &["n_exceed"]);
    let mut est = TpdfEstimate {
        sigma_hat: Vec::new(),
        n_exceed: Vec::new(),
        r0_quantile: f64::NAN,
        warnings: Vec::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Malformed(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let lag: usize = record
            .get(lag_col)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Malformed(format!("line {line}: invalid lag")))?;
        if lag != est.sigma_hat.len() + 1 {
            return Err(Error::Malformed(format!(
                "line {line}: expected lag {}, found {lag}",
                est.sigma_hat.len() + 1
            )));
        }
        let s = parse_f64(record.get(sigma_col).unwrap_or(""), line, "sigma_hat")?;
        if !s.is_finite() {
            return Err(Error::Malformed(format!("line {line}: non-finite sigma_hat")));
        }
        est.sigma_hat.push(s);
        if let Some(c) = count_col {
            let n: usize = record
                .get(c)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::Malformed(format!("line {line}: invalid n_exceed")))?;
            est.n_exceed.push(n);
        }
    }
    if est.sigma_hat.is_empty() {
        return Err(Error::Malformed("TPDF file has no rows".into()));
    }
    Ok(est)
}

pub fn read_tpdf_file(path: &Path) -> Result<TpdfEstimate> {
    read_tpdf(BufReader::new(open(path)?))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::{GpdMethod, MarginalModel};

    #[test]
    fn series_round_trip_is_lossless() {
        let values = vec![0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, 123456.789e10];
        let mut buf = Vec::new();
        write_series(&mut buf, &Series { timestamps: None, values: values.clone() }).unwrap();
        let back = read_series(buf.as_slice()).unwrap();
        assert_eq!(back.values, values);
        assert!(back.timestamps.is_none());
    }

    #[test]
    fn timestamps_parse() {
        let data = "timestamp,value\n2017-12-01T00:00:00Z,3.5\n2017-12-01 01:00,4\n2017-12-01T02:00,1e1\n";
        let s = read_series(data.as_bytes()).unwrap();
        assert_eq!(s.values, vec![3.5, 4.0, 10.0]);
        let ts = s.timestamps.unwrap();
        assert_eq!(format_timestamp(&ts[1]), "2017-12-01T01:00:00");
        assert_eq!(format_timestamp(&parse_timestamp("2018-02-28").unwrap()), "2018-02-28T00:00:00");
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(read_series("x\n1\n".as_bytes()), Err(Error::Malformed(_))));
        assert!(matches!(read_series("value\nabc\n".as_bytes()), Err(Error::Malformed(_))));
        assert!(matches!(read_series("value\nNaN\n".as_bytes()), Err(Error::Malformed(_))));
        assert!(matches!(
            read_series("timestamp,value\nyesterday,1\n".as_bytes()),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(read_tpdf("lag,sigma_hat\n2,0.5\n".as_bytes()), Err(Error::Malformed(_))));
    }

    #[test]
    fn tpdf_round_trip() {
        let est = TpdfEstimate {
            sigma_hat: vec![0.7, 0.55, 1.0 / 7.0],
            n_exceed: vec![250, 249, 251],
            r0_quantile: 0.975,
            warnings: vec![],
        };
        let mut buf = Vec::new();
        write_tpdf(&mut buf, &est).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("lag,sigma_hat,n_exceed\n1,"));
        let back = read_tpdf(buf.as_slice()).unwrap();
        assert_eq!(back.sigma_hat, est.sigma_hat);
        assert_eq!(back.n_exceed, est.n_exceed);
    }

    #[test]
    fn marginal_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = MarginalModel {
            hourly_means: Some((0..24).map(|h| h as f64 / 3.0).collect()),
            body: vec![-1.0 / 3.0, 0.1, 2.0_f64.sqrt()],
            mu_hat: 0.123_456_789_012_345_68,
            gpd_scale: 1.0 / 7.0,
            gpd_shape: -0.1,
            tail_prob: 0.025,
            gpd_method: GpdMethod::Mle,
            warnings: vec![],
        };
        write_json_file(&path, &m).unwrap();
        let back: MarginalModel = read_json_file(&path).unwrap();
        assert_eq!(back, m);
    }
}
