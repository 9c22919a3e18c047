//! CSV ingestion of measured series and rasters.
//!
//! A file starts with optional `# key: value` metadata lines followed by a
//! header whose cells are `name[unit]`. Two layouts are read:
//!
//! * series: one row per sample, one column per header cell. Cells of a
//!   column with unit `label` are kept as text.
//! * grid: the corner cell is `rows[unit]/columns[unit]`, the remaining header
//!   cells are the column-axis values and the first cell of each row is the
//!   row-axis value.
//!
//! Positions may be given in a length unit or in `steps` (converted with the
//! `step_size` metadata, e.g. `# step_size: 0.05 um`). Detunings may be given
//! in a frequency unit or as `fraction` of the optical frequency. Everything
//! is stored in SI (m, rad, Hz). Missing or NaN cells are rejected unless the
//! file declares `# missing: allowed`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::{Dimension, Unit};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    /// Optical frequency (Hz) used for `fraction` detunings.
    pub optical_frequency: f64,
    /// Motor step size (m); overrides the file's `step_size`.
    pub step_size: Option<f64>,
    /// Remove a least-squares line from the value data (see [`Series::detrend`]
    /// and [`Grid::detrend`]).
    pub detrend: bool,
}

impl RasterOptions {
    pub fn new(optical_frequency: f64) -> Self {
        Self {
            optical_frequency,
            step_size: None,
            detrend: false,
        }
    }
}

/// Declared unit of a column after conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnUnit {
    Physical(Unit),
    Steps,
    Fraction,
    Label,
    /// Dimensionless (`1`) values.
    Plain,
}

impl ColumnUnit {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "steps" => Some(ColumnUnit::Steps),
            "fraction" => Some(ColumnUnit::Fraction),
            "label" => Some(ColumnUnit::Label),
            "1" | "" => Some(ColumnUnit::Plain),
            _ => Unit::parse(s).map(ColumnUnit::Physical),
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            ColumnUnit::Physical(u) => u.symbol(),
            ColumnUnit::Steps => "steps",
            ColumnUnit::Fraction => "fraction",
            ColumnUnit::Label => "label",
            ColumnUnit::Plain => "1",
        }
    }

    /// SI dimension of the converted values.
    pub fn dimension(&self) -> Option<Dimension> {
        match self {
            ColumnUnit::Physical(u) => Some(u.dimension()),
            ColumnUnit::Steps => Some(Dimension::Length),
            ColumnUnit::Fraction => Some(Dimension::Frequency),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: ColumnUnit,
    /// SI values; empty for label columns.
    pub values: Vec<f64>,
    /// Text cells of a label column.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<Column>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.columns
            .first()
            .map_or(0, |c| c.values.len().max(c.labels.len()))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// First numeric column with the given dimension.
    pub fn column_of(&self, dim: Dimension) -> Option<&Column> {
        self.columns.iter().find(|c| c.unit.dimension() == Some(dim))
    }

    pub fn labels(&self) -> Option<&Column> {
        self.columns.iter().find(|c| c.unit == ColumnUnit::Label)
    }

    /// Subtracts the least-squares line in the first column from every other
    /// numeric column.
    pub fn detrend(&mut self) {
        let Some(x) = self.columns.first().map(|c| c.values.clone()) else {
            return;
        };
        for c in self.columns.iter_mut().skip(1) {
            if c.unit != ColumnUnit::Label {
                remove_line(&x, &mut c.values);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub unit: ColumnUnit,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub metadata: BTreeMap<String, String>,
    pub rows: Axis,
    pub columns: Axis,
    /// `values[row][column]`.
    pub values: Vec<Vec<f64>>,
}

impl Grid {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.values.len(), self.columns.values.len())
    }

    /// Removes a least-squares line along the row axis from each column.
    pub fn detrend(&mut self) {
        for j in 0..self.columns.values.len() {
            let mut col: Vec<f64> = self.values.iter().map(|r| r[j]).collect();
            remove_line(&self.rows.values, &mut col);
            for (r, v) in self.values.iter_mut().zip(col) {
                r[j] = v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Series(Series),
    Grid(Grid),
}

fn remove_line(x: &[f64], y: &mut [f64]) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y.iter())
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        *yi -= my + b * (xi - mx);
    }
}

/// Splits `name[unit]`.
fn parse_header_cell(cell: &str) -> Option<(String, ColumnUnit)> {
    let cell = cell.trim();
    let open = cell.find('[')?;
    if !cell.ends_with(']') {
        return None;
    }
    let name = cell[..open].trim();
    let unit = ColumnUnit::parse(cell[open + 1..cell.len() - 1].trim())?;
    if name.is_empty() {
        return None;
    }
    Some((name.to_string(), unit))
}

struct Context<'a> {
    path: &'a Path,
    options: &'a RasterOptions,
    step_size: Option<f64>,
    missing_allowed: bool,
}

impl Context<'_> {
    fn err(&self, message: impl Into<String>) -> CliError {
        CliError::ingestion(self.path.display().to_string(), message)
    }

    fn scale(&self, unit: ColumnUnit, name: &str) -> CliResult<f64> {
        Ok(match unit {
            ColumnUnit::Physical(u) => u.to_si(),
            ColumnUnit::Steps => self
                .step_size
                .ok_or_else(|| self.err(format!("column `{name}` is in steps but no step_size is declared")))?,
            ColumnUnit::Fraction => self.options.optical_frequency,
            ColumnUnit::Plain | ColumnUnit::Label => 1.0,
        })
    }

    fn number(&self, cell: &str, line: usize, name: &str, scale: f64) -> CliResult<f64> {
        let cell = cell.trim();
        let v = if cell.is_empty() {
            f64::NAN
        } else {
            cell.parse::<f64>()
                .map_err(|_| self.err(format!("line {line}: `{cell}` in column `{name}` is not a number")))?
        };
        if v.is_nan() && !self.missing_allowed {
            return Err(self.err(format!("line {line}: missing or NaN value in column `{name}`")));
        }
        if v.is_infinite() {
            return Err(self.err(format!("line {line}: infinite value in column `{name}`")));
        }
        Ok(v * scale)
    }
}

fn parse_step_size(text: &str) -> Option<f64> {
    let mut parts = text.split_whitespace();
    let value: f64 = parts.next()?.parse().ok()?;
    let unit = match parts.next() {
        Some(u) => Unit::parse(u)?,
        None => Unit::Metre,
    };
    (unit.dimension() == Dimension::Length && value > 0.0 && value.is_finite()).then(|| value * unit.to_si())
}

/// Reads a series or grid file into SI values.
pub fn ingest_raster(path: &Path, options: &RasterOptions) -> CliResult<Raster> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ingestion(path.display().to_string(), e.to_string()))?;
    parse_raster(&text, path, options)
}

pub fn parse_raster(text: &str, path: &Path, options: &RasterOptions) -> CliResult<Raster> {
    let mut metadata = BTreeMap::new();
    let mut body_start = 0;
    let mut first_line = 1;
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if !trimmed.is_empty() {
            break;
        }
        body_start += line.len() + 1;
        first_line += 1;
    }
    let body = &text[body_start.min(text.len())..];
    let mut ctx = Context {
        path,
        options,
        step_size: options.step_size,
        missing_allowed: false,
    };
    let err = |m: String| CliError::ingestion(path.display().to_string(), m);
    if ctx.step_size.is_none() {
        if let Some(s) = metadata.get("step_size") {
            ctx.step_size = Some(parse_step_size(s).ok_or_else(|| err(format!("bad step_size `{s}`")))?);
        }
    }
    if let Some(m) = metadata.get("missing") {
        ctx.missing_allowed = match m.as_str() {
            "allowed" => true,
            "rejected" => false,
            other => return Err(err(format!("bad missing policy `{other}`"))),
        };
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| err(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(err("missing header".into()));
    }
    let records: Vec<(usize, csv::StringRecord)> = reader
        .records()
        .map(|r| {
            r.map(|rec| {
                let line = rec.position().map_or(0, |p| p.line() as usize) + first_line - 1;
                (line, rec)
            })
            .map_err(|e| err(e.to_string()))
        })
        .collect::<CliResult<_>>()?;

    let mut raster = if let Some((rows, cols)) = header[0].split_once('/') {
        parse_grid(&ctx, &header, rows, cols, &records, metadata)?
    } else {
        parse_series(&ctx, &header, &records, metadata)?
    };
    if options.detrend {
        match &mut raster {
            Raster::Series(s) => s.detrend(),
            Raster::Grid(g) => g.detrend(),
        }
    }
    Ok(raster)
}

fn parse_series(
    ctx: &Context,
    header: &[String],
    records: &[(usize, csv::StringRecord)],
    metadata: BTreeMap<String, String>,
) -> CliResult<Raster> {
    let mut columns = Vec::with_capacity(header.len());
    for cell in header {
        let (name, unit) = parse_header_cell(cell).ok_or_else(|| ctx.err(format!("header cell `{cell}` is not `name[unit]`")))?;
        if columns.iter().any(|c: &Column| c.name == name) {
            return Err(ctx.err(format!("duplicate column `{name}`")));
        }
        columns.push(Column {
            name,
            unit,
            values: Vec::new(),
            labels: Vec::new(),
        });
    }
    let scales = columns
        .iter()
        .map(|c| ctx.scale(c.unit, &c.name))
        .collect::<CliResult<Vec<_>>>()?;
    for (line, rec) in records {
        if rec.len() != columns.len() {
            return Err(ctx.err(format!("line {line}: expected {} cells, found {}", columns.len(), rec.len())));
        }
        for ((c, cell), scale) in columns.iter_mut().zip(rec.iter()).zip(&scales) {
            if c.unit == ColumnUnit::Label {
                if cell.is_empty() && !ctx.missing_allowed {
                    return Err(ctx.err(format!("line {line}: missing label in column `{}`", c.name)));
                }
                c.labels.push(cell.to_string());
            } else {
                let v = ctx.number(cell, *line, &c.name, *scale)?;
                c.values.push(v);
            }
        }
    }
    if records.is_empty() {
        return Err(ctx.err("no data rows"));
    }
    Ok(Raster::Series(Series { metadata, columns }))
}

fn parse_grid(
    ctx: &Context,
    header: &[String],
    rows: &str,
    cols: &str,
    records: &[(usize, csv::StringRecord)],
    metadata: BTreeMap<String, String>,
) -> CliResult<Raster> {
    let corner = &header[0];
    let bad_corner = || ctx.err(format!("corner cell `{corner}` is not `rows[unit]/columns[unit]`"));
    let (row_name, row_unit) = parse_header_cell(rows).ok_or_else(bad_corner)?;
    let (col_name, col_unit) = parse_header_cell(cols).ok_or_else(bad_corner)?;
    if row_unit == ColumnUnit::Label || col_unit == ColumnUnit::Label {
        return Err(bad_corner());
    }
    let value_unit = match metadata.get("values") {
        Some(v) => {
            let (_, u) = parse_header_cell(v).ok_or_else(|| ctx.err(format!("values metadata `{v}` is not `name[unit]`")))?;
            u
        }
        None => ColumnUnit::Plain,
    };
    let (rs, cs, vs) = (
        ctx.scale(row_unit, &row_name)?,
        ctx.scale(col_unit, &col_name)?,
        ctx.scale(value_unit, "values")?,
    );
    let col_values = header[1..]
        .iter()
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| v * cs)
                .ok_or_else(|| ctx.err(format!("column-axis value `{c}` is not a finite number")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if col_values.is_empty() {
        return Err(ctx.err("grid has no columns"));
    }
    let mut row_values = Vec::with_capacity(records.len());
    let mut values = Vec::with_capacity(records.len());
    for (line, rec) in records {
        if rec.len() != header.len() {
            return Err(ctx.err(format!("line {line}: expected {} cells, found {}", header.len(), rec.len())));
        }
        let r = rec[0]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ctx.err(format!("line {line}: row-axis value `{}` is not a finite number", &rec[0])))?;
        row_values.push(r * rs);
        values.push(
            rec.iter()
                .skip(1)
                .map(|cell| ctx.number(cell, *line, "values", vs))
                .collect::<CliResult<Vec<_>>>()?,
        );
    }
    if values.is_empty() {
        return Err(ctx.err("grid has no rows"));
    }
    for (axis, name) in [(&row_values, &row_name), (&col_values, &col_name)] {
        let up = axis.windows(2).all(|w| w[1] > w[0]);
        let down = axis.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(ctx.err(format!("axis `{name}` is not monotone")));
        }
    }
    Ok(Raster::Grid(Grid {
        metadata,
        rows: Axis {
            name: row_name,
            unit: row_unit,
            values: row_values,
        },
        columns: Axis {
            name: col_name,
            unit: col_unit,
            values: col_values,
        },
        values,
    }))
}
