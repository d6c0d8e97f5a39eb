use std::io::{BufRead, Write};
use std::path::Path;

use crate::cli::config::OutputFormat;
use crate::cli::sweep::{Probability, ResultRow};
use crate::error::{Error, Result};
use crate::outage::EstimatorKind;

pub const CSV_HEADER: [&str; 12] = [
    "estimator",
    "M",
    "N",
    "W",
    "R",
    "P_S",
    "sigma2",
    "threshold",
    "probability",
    "error_estimate",
    "wall_time_ms",
    "seed",
];

fn float(x: f64) -> String {
    format!("{x:e}")
}

fn csv_record(row: &ResultRow) -> [String; 12] {
    [
        row.estimator.name().to_string(),
        row.elements.to_string(),
        row.ports.to_string(),
        float(row.size),
        float(row.target_rate),
        float(row.transmit_power),
        float(row.noise_power),
        float(row.threshold),
        match &row.probability {
            Probability::Value(p) => float(*p),
            Probability::Skipped(why) => why.clone(),
        },
        row.error_estimate.map(float).unwrap_or_default(),
        float(row.wall_time_ms),
        row.seed.to_string(),
    ]
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        source: e.into(),
    };
    writer.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        writer.write_record(csv_record(row)).map_err(io)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}

pub fn write_json_lines<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    let io = |source| Error::Io {
        path: "<jsonl>".into(),
        source,
    };
    for row in rows {
        let line = serde_json::to_string(row).expect("rows always serialize");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes rows in `format` to `path`, or to stdout when no path is given.
pub fn emit(rows: &[ResultRow], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let out = std::io::BufWriter::new(file);
            match format {
                OutputFormat::Csv => write_csv(rows, out),
                OutputFormat::JsonLines => write_json_lines(rows, out),
            }
        }
        None => {
            let out = std::io::stdout().lock();
            match format {
                OutputFormat::Csv => write_csv(rows, out),
                OutputFormat::JsonLines => write_json_lines(rows, out),
            }
        }
    }
}

/// Reads rows written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |k: usize| record.get(k).unwrap_or_default();
        let num = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().map_err(|_| {
                parse_err(
                    line,
                    format!("{}: not a number: {:?}", CSV_HEADER[k], field(k)),
                )
            })
        };
        let int = |k: usize| -> Result<u64> {
            field(k).parse::<u64>().map_err(|_| {
                parse_err(
                    line,
                    format!("{}: not an integer: {:?}", CSV_HEADER[k], field(k)),
                )
            })
        };
        let estimator: EstimatorKind = field(0)
            .parse()
            .map_err(|_| parse_err(line, format!("estimator: unknown {:?}", field(0))))?;
        let probability = match field(8).parse::<f64>() {
            Ok(p) => Probability::Value(p),
            Err(_) => Probability::Skipped(field(8).to_string()),
        };
        let error_estimate = if field(9).is_empty() {
            None
        } else {
            Some(num(9)?)
        };
        rows.push(ResultRow {
            estimator,
            elements: int(1)? as usize,
            ports: int(2)? as usize,
            size: num(3)?,
            target_rate: num(4)?,
            transmit_power: num(5)?,
            noise_power: num(6)?,
            threshold: num(7)?,
            probability,
            error_estimate,
            wall_time_ms: num(10)?,
            seed: int(11)?,
        });
    }
    Ok(rows)
}

/// Reads rows written by [`write_json_lines`].
pub fn read_json_lines(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(rows)
}
