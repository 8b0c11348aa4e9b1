//! Minimal CSV emission: comma separated, LF line endings, floats in
//! scientific notation with 16 significant digits, and trailing `#` comment
//! lines recording the seed and the resolved configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v as i64)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Int(i64::from(v))
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_owned())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

impl From<Option<f64>> for Field {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Field::Empty, Field::Float)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.15e}")
    }
}

fn push_field(out: &mut String, f: &Field) {
    match f {
        Field::Float(v) => out.push_str(&format_float(*v)),
        Field::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Field::Text(s) => {
            if s.contains([',', '"', '\n']) {
                out.push('"');
                out.push_str(&s.replace('"', "\"\""));
                out.push('"');
            } else {
                out.push_str(s);
            }
        }
        Field::Empty => {}
    }
}

/// An in-memory table written in one go.
#[derive(Debug, Clone)]
pub struct CsvTable {
    columns: usize,
    text: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            columns: header.len(),
            text,
        }
    }

    pub fn row(&mut self, fields: Vec<Field>) {
        assert_eq!(fields.len(), self.columns, "CSV row width");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            push_field(&mut self.text, f);
        }
        self.text.push('\n');
    }

    /// Appends the provenance footer.
    pub fn finish(mut self, cfg: &ExperimentConfig, seeds: &[u64]) -> String {
        let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(
            self.text,
            "# seed={} config_sha256={}",
            seeds.join(";"),
            cfg.digest()
        );
        let _ = writeln!(self.text, "# config={}", cfg.to_json());
        self.text
    }

    pub fn write(
        self,
        path: &Path,
        cfg: &ExperimentConfig,
        seeds: &[u64],
    ) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        std::fs::write(path, self.finish(cfg, seeds)).map_err(|e| HarnessError::io(path, e))
    }
}
