//! Deterministic writers. Every file carries a provenance block: the SHA-256
//! of the effective config, the tool version and the units of its columns or
//! fields. Floats are written with 17 significant digits.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = concat!("mimcavity ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool: &'static str,
    pub command: String,
    /// `(field, unit)` pairs.
    pub units: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(config_text: &str, command: &str) -> Self {
        let digest = Sha256::digest(config_text.as_bytes());
        Self {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            tool: TOOL,
            command: command.to_string(),
            units: Vec::new(),
        }
    }

    pub fn with_units(&self, units: &[(&str, &str)]) -> Self {
        Self {
            units: units.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            ..self.clone()
        }
    }
}

/// `{:.16e}`: 17 significant digits, exact round trip.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

/// Pretty JSON whose floats use [`fmt_f64`].
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializable");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8")
}

/// Single-line JSON with default float formatting, for error reports.
pub fn to_compact_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CompactFormatter);
    value.serialize(&mut ser).expect("serializable");
    String::from_utf8(buf).expect("utf-8")
}

/// A CSV table with `name[unit]` headers; non-finite cells are left empty.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Number(v.unwrap_or(f64::NAN))
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Table {
    pub fn new(headers: &[(&str, &str)]) -> Self {
        Self {
            headers: headers.iter().map(|(n, u)| (n.to_string(), u.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, provenance: &Provenance) -> String {
        let mut out = String::new();
        out.push_str(&format!("# config_sha256: {}\n", provenance.config_sha256));
        out.push_str(&format!("# tool: {}\n", provenance.tool));
        out.push_str(&format!("# command: {}\n", provenance.command));
        let units: Vec<String> = self.headers.iter().map(|(n, u)| format!("{n}={u}")).collect();
        out.push_str(&format!("# units: {}\n", units.join(" ")));
        let has_missing = self
            .rows
            .iter()
            .flatten()
            .any(|c| matches!(c, Cell::Number(v) if !v.is_finite()));
        if has_missing {
            out.push_str("# missing: allowed\n");
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.headers.iter().map(|(n, u)| format!("{n}[{u}]")))
            .expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Number(v) => fmt_f64(*v),
                Cell::Text(t) => t.clone(),
            }))
            .expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("flush")).expect("utf-8"));
        out
    }

    /// JSON form: provenance plus one array per column.
    pub fn render_json(&self, provenance: &Provenance) -> String {
        let columns: serde_json::Map<String, serde_json::Value> = self
            .headers
            .iter()
            .enumerate()
            .map(|(j, (n, _))| {
                let values = self
                    .rows
                    .iter()
                    .map(|r| match &r[j] {
                        Cell::Number(v) => serde_json::Value::from(*v),
                        Cell::Text(t) => serde_json::Value::from(t.clone()),
                    })
                    .collect();
                (n.clone(), serde_json::Value::Array(values))
            })
            .collect();
        let p = Provenance {
            units: self.headers.clone(),
            ..provenance.clone()
        };
        to_json(&serde_json::json!({ "provenance": p, "columns": columns }))
    }
}

/// Writes a file, creating the directory; returns its path.
pub fn write_file(dir: &Path, name: &str, content: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(path)
}

/// JSON summary with a provenance block.
pub fn summary_json<T: Serialize>(provenance: &Provenance, body: &T) -> String {
    to_json(&serde_json::json!({ "provenance": provenance, "result": body }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
        let j = to_json(&serde_json::json!({ "x": 0.1 }));
        assert!(j.contains("1.0000000000000001e-1"), "{j}");
    }

    #[test]
    fn table_has_provenance() {
        let mut t = Table::new(&[("x", "m"), ("tag", "label")]);
        t.push(vec![1.5.into(), "a".into()]);
        t.push(vec![f64::NAN.into(), "b".into()]);
        let text = t.render(&Provenance::new("{}", "test"));
        assert!(text.starts_with("# config_sha256: 44136fa3"));
        assert!(text.contains("# missing: allowed"));
        assert!(text.contains("x[m],tag[label]\n1.5000000000000000e0,a\n,b\n"));
    }
}
