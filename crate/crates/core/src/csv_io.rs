//! Thin wrappers around the `csv` crate for the small numeric tables this
//! crate reads and writes. Output always uses LF line endings.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Parsed rows of a headered numeric CSV, with 1-based source line numbers.
pub(crate) struct NumericTable {
    pub rows: Vec<(usize, Vec<f64>)>,
}

pub(crate) fn read_numeric<R: Read>(reader: R, source_name: &str, columns: usize) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() != columns || header.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err(Error::parse(
            source_name,
            1,
            format!("expected a header row with {columns} column names"),
        ));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(source_name, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != columns {
            return Err(Error::parse(
                source_name,
                line,
                format!("expected {columns} fields, found {}", record.len()),
            ));
        }
        let values = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(source_name, line, format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(NumericTable { rows })
}

pub(crate) fn read_numeric_file(path: &Path, columns: usize) -> Result<NumericTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_numeric(file, &path.display().to_string(), columns)
}

pub(crate) fn writer<W: Write>(inner: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(inner)
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e.to_string()),
    }
}
