//! Output formats: versioned CSV with a provenance comment line, and JSON with
//! string sentinels for infinite values.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Decimal rendering for CSV cells; infinities become `+inf` / `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

/// JSON value for a float; non-finite values become strings.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        Value::String(fmt_f64(x))
    }
}

pub fn json_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_f64(x)).collect())
}

/// The provenance line that opens every CSV artifact.
pub fn header_comment(experiment: &str, params: &str) -> String {
    format!("# pspin-cw v{VERSION} {experiment} {params}")
}

/// Destination for tabular output: a file or stdout.
pub enum Sink {
    File(PathBuf),
    Stdout,
}

impl Sink {
    pub fn from_option(path: Option<&Path>) -> Self {
        match path {
            Some(p) => Sink::File(p.to_path_buf()),
            None => Sink::Stdout,
        }
    }

    fn label(&self) -> PathBuf {
        match self {
            Sink::File(p) => p.clone(),
            Sink::Stdout => PathBuf::from("<stdout>"),
        }
    }

    fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match self {
            Sink::File(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
            Sink::Stdout => Box::new(BufWriter::new(io::stdout())),
        })
    }

    /// Writes a CSV table preceded by the provenance comment.
    pub fn write_csv(&self, comment: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let label = self.label();
        let mut out = self.open()?;
        writeln!(out, "{comment}").map_err(|e| Error::io(&label, e))?;
        let mut w = csv::Writer::from_writer(out);
        let wrap = |source| Error::Csv { path: label.clone(), source };
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(row).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(&label, e))?;
        Ok(())
    }

    pub fn write_json(&self, value: &Value) -> Result<()> {
        let label = self.label();
        let mut out = self.open()?;
        serde_json::to_writer_pretty(&mut out, value)?;
        writeln!(out).map_err(|e| Error::io(&label, e))?;
        out.flush().map_err(|e| Error::io(&label, e))?;
        Ok(())
    }
}
