//! Realized targets (`period,value`) and exogenous indicators
//! (`period,<name>,...`) as CSV. The period format is detected from the
//! first label.

use std::path::Path;

use super::fmt_f64;
use super::tables::OutputStamp;
use super::period::{detect_frequency, format_period, parse_period};
use crate::error::{BpsError, Result};
use crate::types::TimeSeriesF;

fn parse_err(path: &Path, row: u64, message: impl Into<String>) -> BpsError {
    BpsError::Parse {
        path: path.display().to_string(),
        row: row as usize,
        message: message.into(),
    }
}

/// Periods and columns of a wide CSV; empty fields become `None`.
type Wide = (String, Vec<String>, Vec<(i64, u64)>, Vec<Vec<Option<f64>>>);

fn read_wide(path: &Path) -> Result<Wide> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.first().map(String::as_str) != Some("period") || headers.len() < 2 {
        return Err(parse_err(path, 1, "expected a `period` column followed by value columns"));
    }
    let names = headers[1..].to_vec();
    let mut periods = vec![];
    let mut cols: Vec<Vec<Option<f64>>> = vec![vec![]; names.len()];
    let mut freq: Option<&'static str> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = rec.get(0).unwrap_or_default();
        let f = *freq.get_or_insert_with(|| detect_frequency(label));
        let t = parse_period(label, f).map_err(|e| parse_err(path, line, e.to_string()))?;
        if let Some((prev, _)) = periods.last() {
            if t != prev + 1 {
                return Err(parse_err(path, line, format!("period {label} does not follow the previous row")));
            }
        }
        periods.push((t, line));
        for (c, col) in cols.iter_mut().enumerate() {
            let field = rec.get(c + 1).unwrap_or_default().trim();
            col.push(if field.is_empty() {
                None
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("{}: cannot parse {field:?}", names[c])))?;
                if !v.is_finite() {
                    return Err(parse_err(path, line, format!("{}: value must be finite", names[c])));
                }
                Some(v)
            });
        }
    }
    if periods.is_empty() {
        return Err(parse_err(path, 1, "no rows"));
    }
    Ok((freq.unwrap_or("").to_string(), names, periods, cols))
}

/// Leading and trailing missing values are trimmed; interior gaps are errors.
fn column_series(path: &Path, name: &str, freq: &str, periods: &[(i64, u64)], col: &[Option<f64>]) -> Result<TimeSeriesF> {
    let first = col
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| parse_err(path, 1, format!("column {name} has no values")))?;
    let last = col.iter().rposition(Option::is_some).unwrap_or(first);
    let mut values = Vec::with_capacity(last - first + 1);
    for k in first..=last {
        values.push(col[k].ok_or_else(|| parse_err(path, periods[k].1, format!("column {name} has a gap")))?);
    }
    TimeSeriesF::new(values, periods[first].0, freq)
}

pub fn read_series(path: &Path) -> Result<TimeSeriesF> {
    let (freq, names, periods, cols) = read_wide(path)?;
    if names.len() != 1 {
        return Err(parse_err(path, 1, "expected columns period,value"));
    }
    column_series(path, &names[0], &freq, &periods, &cols[0])
}

pub fn read_indicators(path: &Path) -> Result<Vec<(String, TimeSeriesF)>> {
    let (freq, names, periods, cols) = read_wide(path)?;
    names
        .iter()
        .zip(&cols)
        .map(|(n, c)| Ok((n.clone(), column_series(path, n, &freq, &periods, c)?)))
        .collect()
}

pub fn write_series(path: &Path, series: &TimeSeriesF, stamp: Option<&OutputStamp>) -> Result<()> {
    write_indicators(path, &[("value".to_string(), series.clone())], stamp)
}

/// Indicators may cover different ranges; uncovered cells stay empty.
pub fn write_indicators(path: &Path, indicators: &[(String, TimeSeriesF)], stamp: Option<&OutputStamp>) -> Result<()> {
    let Some(lo) = indicators.iter().map(|(_, s)| s.start_index()).min() else {
        return Err(BpsError::DataShape("no series to write".into()));
    };
    let hi = indicators.iter().map(|(_, s)| s.end_index()).max().unwrap_or(lo);
    let freq = indicators[0].1.frequency_label();
    let mut file = std::fs::File::create(path)?;
    if let Some(s) = stamp {
        std::io::Write::write_all(&mut file, s.line().as_bytes())?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    let mut header = vec!["period".to_string()];
    header.extend(indicators.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for t in lo..=hi {
        let mut rec = vec![format_period(t, freq)];
        rec.extend(indicators.iter().map(|(_, s)| s.at(t).map(fmt_f64).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
