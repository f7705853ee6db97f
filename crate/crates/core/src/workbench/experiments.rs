//! Experimental saturation-pressure files.
//!
//! Comma-separated text with the header `T_K,z_CO2,kind,p_MPa`. Lines
//! starting with `#` are ignored.

use std::path::Path;

use crate::error::{Error, Result};
use crate::optimizer::{ExperimentalDataset, ExperimentalRecord};
use crate::saturation::SaturationKind;

pub const HEADER: [&str; 4] = ["T_K", "z_CO2", "kind", "p_MPa"];

pub fn load_experiments(path: &Path) -> Result<ExperimentalDataset> {
    let text = std::fs::read_to_string(path)?;
    let fluid = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_experiments(&text, &path.display().to_string(), &fluid)
}

pub fn parse_experiments(text: &str, file: &str, fluid: &str) -> Result<ExperimentalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let err = |line: u64, column: usize, message: String| Error::Parse {
        file: file.to_string(),
        line: line as usize,
        column,
        message,
    };

    let mut header_seen = false;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            err(line, 1, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if !header_seen {
            let ok = row.len() == HEADER.len()
                && row.iter().zip(HEADER).all(|(a, b)| a.eq_ignore_ascii_case(b));
            if !ok {
                return Err(err(
                    line,
                    1,
                    format!("expected header {}, found {:?}", HEADER.join(","), row.iter().collect::<Vec<_>>()),
                ));
            }
            header_seen = true;
            continue;
        }
        if row.len() != HEADER.len() {
            return Err(err(line, 1, format!("row {line}: expected 4 fields, found {}", row.len())));
        }
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                err(line, i + 1, format!("row {line}: {} {:?} is not a number", HEADER[i], &row[i]))
            })
        };
        let temperature = num(0)?;
        let z_co2 = num(1)?;
        let kind: SaturationKind = row[2]
            .parse()
            .map_err(|_| err(line, 3, format!("row {line}: unknown kind {:?}", &row[2])))?;
        let p_exp = num(3)?;
        if !(p_exp.is_finite() && p_exp > 0.0) {
            return Err(err(line, 4, format!("row {line}: pressure must be positive, got {p_exp}")));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(err(line, 1, format!("row {line}: temperature must be positive")));
        }
        if !(0.0..1.0).contains(&z_co2) {
            return Err(err(line, 2, format!("row {line}: z_CO2 {z_co2} outside [0, 1)")));
        }
        records.push(ExperimentalRecord {
            temperature,
            z_co2,
            kind,
            p_exp,
        });
    }
    if records.is_empty() {
        return Err(Error::InvalidInput(format!("{file}: dataset is empty")));
    }
    ExperimentalDataset::new(fluid, records)
}

/// File text for `data`, records in stored order.
pub fn write_experiments(data: &ExperimentalDataset) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in &data.records {
        out.push_str(&format!("{},{},{},{}\n", r.temperature, r.z_co2, r.kind.as_str(), r.p_exp));
    }
    out
}
