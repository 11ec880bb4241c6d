//! Long-format scenario CSV: header `scenario,value`, one observation per
//! row. Blocks follow the first appearance of each scenario id.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::IoError;
use crate::types::{Partition, PortfolioSample};

pub const HEADER: [&str; 2] = ["scenario", "value"];

/// Parse scenario rows from any reader. `source` names the input in errors.
pub fn read_scenarios(reader: impl Read, source: &str) -> Result<PortfolioSample, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(IoError::EmptyFile { input: source.to_owned() }),
        Some(r) => r.map_err(|e| csv_error(source, e))?,
    };
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(IoError::MissingHeader {
            line: 1,
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    // (label, values) in first-appearance order
    let mut blocks: Vec<(String, Vec<f64>)> = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(IoError::MalformedRow {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(IoError::EmptyScenarioId { line });
        }
        let raw = &record[1];
        let value: f64 = raw.parse().map_err(|_| IoError::NonNumeric {
            line,
            value: raw.to_owned(),
        })?;
        if !value.is_finite() {
            return Err(IoError::NonFinite {
                line,
                value: raw.to_owned(),
            });
        }
        match blocks.iter_mut().find(|(label, _)| label == id) {
            Some((_, values)) => values.push(value),
            None => blocks.push((id.to_owned(), vec![value])),
        }
    }
    if blocks.is_empty() {
        return Err(IoError::EmptyFile { input: source.to_owned() });
    }

    let sizes = blocks.iter().map(|(_, v)| v.len()).collect();
    let (labels, values): (Vec<String>, Vec<Vec<f64>>) = blocks.into_iter().unzip();
    let partition = Partition::new(sizes).map_err(|e| IoError::Data(e.to_string()))?;
    PortfolioSample::new(values.concat(), partition)
        .and_then(|m| m.with_labels(labels))
        .map_err(|e| IoError::Data(e.to_string()))
}

pub fn load_scenario_csv(path: &Path) -> Result<PortfolioSample, IoError> {
    let file = File::open(path).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_scenarios(file, &path.display().to_string())
}

/// Write a sample back as scenario rows. Unlabeled blocks are named `s1, s2, …`.
pub fn write_scenarios(m: &PortfolioSample, writer: impl Write) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| IoError::Io {
        path: "<writer>".into(),
        message: e.to_string(),
    };
    wtr.write_record(HEADER).map_err(io)?;
    for h in 0..m.partition().block_count() {
        let label = m
            .labels()
            .map(|l| l[h].clone())
            .unwrap_or_else(|| format!("s{}", h + 1));
        for x in m.block(h) {
            wtr.write_record([label.as_str(), &x.to_string()]).map_err(io)?;
        }
    }
    wtr.flush().map_err(|e| IoError::Io {
        path: "<writer>".into(),
        message: e.to_string(),
    })
}

fn csv_error(source: &str, e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    IoError::MalformedRow {
        line,
        message: format!("{source}: {e}"),
    }
}
