//! Daily infections from a cumulative confirmed-cases table.
//!
//! The table has the columns `Province/State, Country/Region, Lat, Long`
//! followed by one column per date written `M/D/YY`. Rows of one country
//! are summed across provinces.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;

use abmcal_core::abm::EpidemicSeries;

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 7;
const REGION_COLUMN: usize = 1;
const FIRST_DATE_COLUMN: usize = 4;

/// Cumulative counts of one region, one value per date.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeSeries {
    pub dates: Vec<NaiveDate>,
    pub counts: Vec<f64>,
}

pub fn parse_table_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%m/%d/%y").ok()
}

pub fn parse_iso_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::Invalid(format!("{s:?} is not a YYYY-MM-DD date")))
}

pub fn read_region<R: Read>(reader: R, region: &str) -> Result<CumulativeSeries> {
    let mut csv = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let source = Path::new("<table>");
    let header = csv.headers().map_err(Error::csv(source))?.clone();
    if header.len() <= FIRST_DATE_COLUMN {
        return Err(Error::Invalid("table has no date columns".into()));
    }
    let dates = header
        .iter()
        .skip(FIRST_DATE_COLUMN)
        .map(|h| parse_table_date(h).ok_or_else(|| Error::Invalid(format!("date column {h:?} is not M/D/YY"))))
        .collect::<Result<Vec<_>>>()?;
    if dates.windows(2).any(|w| w[1] != w[0].succ_opt().unwrap_or(w[0])) {
        return Err(Error::Invalid("date columns are not consecutive days".into()));
    }
    let mut counts = vec![0.0; dates.len()];
    let mut found = false;
    for record in csv.records() {
        let record = record.map_err(Error::csv(source))?;
        if record.get(REGION_COLUMN).map(str::trim) != Some(region) {
            continue;
        }
        found = true;
        for (total, cell) in counts.iter_mut().zip(record.iter().skip(FIRST_DATE_COLUMN)) {
            let cell = cell.trim();
            let value: f64 = if cell.is_empty() {
                0.0
            } else {
                cell.parse()
                    .map_err(|_| Error::Invalid(format!("cannot parse count {cell:?} for {region}")))?
            };
            *total += value;
        }
    }
    if !found {
        return Err(Error::UnknownRegion(region.into()));
    }
    Ok(CumulativeSeries { dates, counts })
}

/// Next-day minus current-day counts; the final day has no successor and is
/// dropped. Decreases are clipped to zero.
pub fn daily_differences(cumulative: &[f64]) -> Vec<f64> {
    let mut clipped = 0;
    let daily = cumulative
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d < 0.0 {
                clipped += 1;
                0.0
            } else {
                d
            }
        })
        .collect();
    if clipped > 0 {
        warn!("{clipped} decreasing cumulative step(s) clipped to zero new infections");
    }
    daily
}

/// Mean of each day and the `window - 1` days before it. Days without a
/// full window keep their own value.
pub fn trailing_moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            if i + 1 < window {
                values[i]
            } else {
                values[i + 1 - window..=i].iter().sum::<f64>() / window as f64
            }
        })
        .collect()
}

/// Smoothed daily infections of `region` between `from` and `to` inclusive.
pub fn ingest<R: Read>(reader: R, region: &str, from: NaiveDate, to: NaiveDate) -> Result<EpidemicSeries> {
    let series = read_region(reader, region)?;
    let daily = trailing_moving_average(&daily_differences(&series.counts), DEFAULT_WINDOW);
    let dates = &series.dates[..daily.len()];
    let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
        return Err(Error::Invalid("table needs at least two dates".into()));
    };
    if from > to || from < first || to > last {
        return Err(Error::DateRange { from, to, first, last });
    }
    let start = (from - first).num_days() as usize;
    let end = (to - first).num_days() as usize;
    Ok(EpidemicSeries(
        daily[start..=end].iter().map(|v| v.round().max(0.0) as u64).collect(),
    ))
}

pub fn ingest_file(path: &Path, region: &str, from: NaiveDate, to: NaiveDate) -> Result<EpidemicSeries> {
    let file = std::fs::File::open(path).map_err(Error::io(path))?;
    ingest(file, region, from, to)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences() {
        assert_eq!(daily_differences(&[0.0, 1.0, 3.0, 6.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(daily_differences(&[5.0, 4.0, 6.0]), vec![0.0, 2.0]);
        assert_eq!(daily_differences(&[4.0; 5]), vec![0.0; 4]);
    }

    #[test]
    fn moving_average() {
        assert_eq!(trailing_moving_average(&[3.0; 10], 7), vec![3.0; 10]);
        let v: Vec<f64> = (0..9).map(f64::from).collect();
        let m = trailing_moving_average(&v, 7);
        assert_eq!(&m[..6], &v[..6]);
        assert_eq!(m[6], 3.0);
        assert_eq!(m[8], 5.0);
    }

    #[test]
    fn table_dates() {
        assert_eq!(parse_table_date("6/16/20"), NaiveDate::from_ymd_opt(2020, 6, 16));
        assert_eq!(parse_table_date("12/1/21"), NaiveDate::from_ymd_opt(2021, 12, 1));
        assert!(parse_table_date("2020-06-16").is_none());
        assert!(parse_iso_date("2020-06-16").is_ok());
        assert!(parse_iso_date("6/16/20").is_err());
    }
}
