//! Readers and writers for the on-disk formats.
//!
//! * series CSV: `day,new_infections`
//! * ground-truth CSV: `iteration,seed,ksts,label,p1..p7`
//! * scaled cumulative CSV: `day,scaled_cumulative`
//! * run configs, results and reports as JSON

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use abmcal_core::abm::EpidemicSeries;
use abmcal_core::framework::{FrameworkConfig, GroundTruthDb, LabeledSample};
use abmcal_core::ks::{CumulativeDistribution, Label};
use abmcal_core::space::ParameterVector;

use crate::error::{Error, Result};

pub const SERIES_HEADER: [&str; 2] = ["day", "new_infections"];
pub const DB_HEADER: [&str; 11] = [
    "iteration", "seed", "ksts", "label", "p1", "p2", "p3", "p4", "p5", "p6", "p7",
];
pub const CUMULATIVE_HEADER: [&str; 2] = ["day", "scaled_cumulative"];

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn check_header(path: &Path, reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(Error::csv(path))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(format_error(
            path,
            format!("expected header {:?}, found {:?}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(Error::io(path))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn create_csv(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(Error::io(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn parse<T: std::str::FromStr>(path: &Path, line: usize, field: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| format_error(path, format!("line {line}: cannot parse {field} from {value:?}")))
}

/// Reads a daily series; days must run 0, 1, 2, ... without gaps.
pub fn read_series(path: &Path) -> Result<EpidemicSeries> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, &SERIES_HEADER)?;
    let mut daily = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(Error::csv(path))?;
        let line = i + 2;
        let day: usize = parse(path, line, "day", &record[0])?;
        if day != i {
            return Err(format_error(path, format!("line {line}: expected day {i}, found {day}")));
        }
        daily.push(parse(path, line, "new_infections", &record[1])?);
    }
    if daily.is_empty() {
        return Err(format_error(path, "series has no rows"));
    }
    Ok(EpidemicSeries(daily))
}

pub fn write_series(path: &Path, series: &EpidemicSeries) -> Result<()> {
    let mut w = create_csv(path)?;
    w.write_record(SERIES_HEADER).map_err(Error::csv(path))?;
    for (day, n) in series.as_slice().iter().enumerate() {
        w.write_record([day.to_string(), n.to_string()]).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_cumulative(path: &Path, cdf: &CumulativeDistribution) -> Result<()> {
    let mut w = create_csv(path)?;
    w.write_record(CUMULATIVE_HEADER).map_err(Error::csv(path))?;
    for (day, v) in cdf.values().iter().enumerate() {
        w.write_record([day.to_string(), v.to_string()]).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_db(path: &Path, db: &GroundTruthDb) -> Result<()> {
    let mut w = create_csv(path)?;
    w.write_record(DB_HEADER).map_err(Error::csv(path))?;
    for row in db.rows() {
        let mut record = vec![
            row.iteration.to_string(),
            row.seed.to_string(),
            row.ksts.to_string(),
            row.label.as_str().to_string(),
        ];
        record.extend(row.params.iter().map(f64::to_string));
        w.write_record(&record).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_db(path: &Path) -> Result<GroundTruthDb> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, &DB_HEADER)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(Error::csv(path))?;
        let line = i + 2;
        let label = match &record[3] {
            "positive" => Label::Positive,
            "negative" => Label::Negative,
            other => return Err(format_error(path, format!("line {line}: unknown label {other:?}"))),
        };
        let params = (4..11)
            .map(|c| parse(path, line, DB_HEADER[c], &record[c]))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(LabeledSample {
            iteration: parse(path, line, "iteration", &record[0])?,
            seed: parse(path, line, "seed", &record[1])?,
            ksts: parse(path, line, "ksts", &record[2])?,
            label,
            params: ParameterVector(params),
        });
    }
    Ok(GroundTruthDb::from(rows))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(Error::json(path))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::json(path))?;
    w.write_all(b"\n").map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}

pub fn read_config(path: &Path) -> Result<FrameworkConfig> {
    let config: FrameworkConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}
