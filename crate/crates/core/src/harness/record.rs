//! One CSV row per metric.

use std::io::{Read, Write};

use crate::csv_io::{self, csv_err};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "scenario",
    "nonlinearity",
    "est_snr_db",
    "det_snr_db",
    "method",
    "trial",
    "seed",
    "metric_name",
    "metric_value",
];

/// Written in place of `metric_value` when the trial failed.
pub const ERROR_SENTINEL: &str = "ERR";

pub const NMSE_F_DB: &str = "nmse_f_db";
pub const NMSE_COMBINED_DB: &str = "nmse_combined_db";
pub const MSE_TRACE_FINAL: &str = "mse_trace_final";
pub const BER: &str = "ber";
pub const THEORY_BER: &str = "theory_ber";
pub const COMPOSITION_ERROR_MAX: &str = "composition_error_max";
/// Prefix of the per-magnitude composition error; the magnitude follows.
pub const COMPOSITION_ERROR_AT: &str = "composition_error@";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scenario: String,
    pub nonlinearity: String,
    pub est_snr_db: Option<f64>,
    pub det_snr_db: Option<f64>,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub metric_name: String,
    /// NaN marks a failed trial.
    pub metric_value: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::parse("records", line, format!("not a number: {field:?}")))
}

impl ResultRecord {
    fn fields(&self) -> [String; 9] {
        [
            self.scenario.clone(),
            self.nonlinearity.clone(),
            fmt_opt(self.est_snr_db),
            fmt_opt(self.det_snr_db),
            self.method.clone(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.metric_name.clone(),
            if self.metric_value.is_nan() {
                ERROR_SENTINEL.to_string()
            } else {
                self.metric_value.to_string()
            },
        ]
    }

    pub fn is_error(&self) -> bool {
        self.metric_value.is_nan()
    }
}

/// Writes the header and all rows with LF line endings.
pub fn write_records<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv_io::writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record(r.fields()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

pub fn records_to_string(records: &[ResultRecord]) -> String {
    let mut buf = Vec::new();
    write_records(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("records are UTF-8")
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::parse("records", 1, e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::parse("records", 1, "unexpected header"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse("records", 0, e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::parse("records", line, "wrong field count"));
        }
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::parse("records", line, format!("not an integer: {s:?}")))
        };
        let metric_value = if &rec[8] == ERROR_SENTINEL {
            f64::NAN
        } else {
            rec[8]
                .parse()
                .map_err(|_| Error::parse("records", line, format!("not a number: {:?}", &rec[8])))?
        };
        out.push(ResultRecord {
            scenario: rec[0].to_string(),
            nonlinearity: rec[1].to_string(),
            est_snr_db: parse_opt(&rec[2], line)?,
            det_snr_db: parse_opt(&rec[3], line)?,
            method: rec[4].to_string(),
            trial: int(&rec[5])? as usize,
            seed: int(&rec[6])?,
            metric_name: rec[7].to_string(),
            metric_value,
        });
    }
    Ok(out)
}
