//! Run configuration: a strict JSON layout with explicit units, resolved to
//! SI values for the model.

use std::path::Path;

use mimcavity::{fractional_splitting, CavityGeometry, MembraneConfig, Method, ModeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A number with its unit, e.g. `{"value": 50, "unit": "nm"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Self { value, unit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m")]
    Metre,
    #[serde(rename = "mm")]
    Millimetre,
    #[serde(rename = "um", alias = "µm")]
    Micrometre,
    #[serde(rename = "nm")]
    Nanometre,
    #[serde(rename = "rad")]
    Radian,
    #[serde(rename = "mrad")]
    Milliradian,
    #[serde(rename = "urad", alias = "µrad")]
    Microradian,
    #[serde(rename = "Hz")]
    Hertz,
    #[serde(rename = "kHz")]
    Kilohertz,
    #[serde(rename = "MHz")]
    Megahertz,
    #[serde(rename = "GHz")]
    Gigahertz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Angle,
    Frequency,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            Metre | Millimetre | Micrometre | Nanometre => Dimension::Length,
            Radian | Milliradian | Microradian => Dimension::Angle,
            Hertz | Kilohertz | Megahertz | Gigahertz => Dimension::Frequency,
        }
    }

    /// Multiplier to the SI unit (m, rad, Hz).
    pub fn to_si(self) -> f64 {
        use Unit::*;
        match self {
            Metre | Radian | Hertz => 1.0,
            Millimetre | Milliradian => 1e-3,
            Micrometre | Microradian => 1e-6,
            Nanometre => 1e-9,
            Kilohertz => 1e3,
            Megahertz => 1e6,
            Gigahertz => 1e9,
        }
    }

    pub fn symbol(self) -> &'static str {
        use Unit::*;
        match self {
            Metre => "m",
            Millimetre => "mm",
            Micrometre => "um",
            Nanometre => "nm",
            Radian => "rad",
            Milliradian => "mrad",
            Microradian => "urad",
            Hertz => "Hz",
            Kilohertz => "kHz",
            Megahertz => "MHz",
            Gigahertz => "GHz",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

/// SI value of a quantity of the given dimension.
pub fn si_quantity(q: &Quantity, dim: Dimension, key: &str) -> CliResult<f64> {
    if q.unit.dimension() != dim {
        return Err(CliError::config(key, format!("unit `{}` is not a {dim:?} unit", q.unit.symbol()).to_lowercase()));
    }
    if !q.value.is_finite() {
        return Err(CliError::config(key, "value must be finite"));
    }
    Ok(q.value * q.unit.to_si())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_roc: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rayleigh_range: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist: Option<Quantity>,
    /// Derived from the waist and Rayleigh range when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refractive_index: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_y: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_z: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin_limit: Option<bool>,
}

/// A grid, either `{unit, start, stop, points}` or `{unit, values}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridInput {
    pub unit: Unit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl GridInput {
    fn resolve(&self, dim: Dimension, key: &str) -> CliResult<Vec<f64>> {
        if self.unit.dimension() != dim {
            return Err(CliError::config(key, format!("unit `{}` is not a {dim:?} unit", self.unit.symbol()).to_lowercase()));
        }
        let raw = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    return Err(CliError::config(key, "points must be at least 1"));
                }
                if n == 1 {
                    if a != b {
                        return Err(CliError::config(key, "a single point needs start == stop"));
                    }
                    vec![a]
                } else {
                    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
                }
            }
            _ => return Err(CliError::config(key, "give either `values` or all of `start`, `stop`, `points`")),
        };
        if raw.is_empty() {
            return Err(CliError::config(key, "grid is empty"));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config(key, "grid values must be finite"));
        }
        if raw.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config(key, "grid must be strictly increasing"));
        }
        Ok(raw.iter().map(|v| v * self.unit.to_si()).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<GridInput>,
    /// Values of `α_z`; `α_y` comes from the membrane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilts: Option<GridInput>,
    /// Laser-detuning axis for rasterized outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detunings: Option<GridInput>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesInput {
    /// Longitudinal index of the reference TEM00 mode; default from geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitudinal: Option<u32>,
    /// Transverse orders to include, each at the longitudinal index that
    /// brings it closest to the reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifolds: Option<Vec<u32>>,
    /// Explicit `[l, m, n]` list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<[u32; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Numeric,
    Analytic,
    Unlinearized,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Numeric => vec![Method::Numeric],
            MethodChoice::Analytic => vec![Method::Analytic],
            MethodChoice::Unlinearized => vec![Method::Unlinearized],
            MethodChoice::Both => vec![Method::Analytic, Method::Numeric],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<TableFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Hyperbola,
    BandPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloInput {
    pub trials: usize,
    /// Gaussian noise added to the fitted model for each trial.
    pub noise: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInput {
    pub kind: FitKind,
    /// Raster file; relative paths are taken from the config's directory.
    pub data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_background: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detrend: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateInput {
    /// Series of motor travel and measured tilt.
    pub data: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub membrane: Option<MembraneInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModesInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateInput>,
}

/// Reads and strictly parses a config file; errors name the offending key.
pub fn parse_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config("<file>", format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(if key == "." { "<root>".to_string() } else { key }, e.into_inner().to_string())
    })?;
    config.resolve()?;
    Ok(config)
}

/// Canonical JSON text of a config; parsing it gives back the same config.
pub fn serialize_config(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

/// Fully resolved settings in SI units.
#[derive(Debug, Clone)]
pub struct Settings {
    pub geometry: CavityGeometry,
    pub membrane: MembraneConfig,
    pub positions: Option<Vec<f64>>,
    pub tilts: Option<Vec<f64>>,
    pub detunings: Option<Vec<f64>>,
    pub mode_set: Vec<ModeIndex>,
    pub method: MethodChoice,
    pub output_dir: Option<String>,
    pub tables: TableFormat,
}

impl RunConfig {
    pub fn resolve(&self) -> CliResult<Settings> {
        let g = self.geometry.clone().unwrap_or_default();
        let d = CavityGeometry::default();
        let len = |q: &Option<Quantity>, key: &str, default: f64| -> CliResult<f64> {
            q.as_ref().map_or(Ok(default), |q| si_quantity(q, Dimension::Length, key))
        };
        let wavelength = g
            .wavelength
            .as_ref()
            .map(|q| si_quantity(q, Dimension::Length, "geometry.wavelength"))
            .transpose()?;
        let geometry = CavityGeometry::new(
            len(&g.length, "geometry.length", d.length())?,
            len(&g.mirror_roc, "geometry.mirror_roc", d.mirror_roc())?,
            len(&g.rayleigh_range, "geometry.rayleigh_range", d.rayleigh_range())?,
            len(&g.waist, "geometry.waist", d.waist())?,
            wavelength,
        )
        .map_err(|e| {
            let msg = e.to_string();
            let field = ["length", "mirror_roc", "rayleigh_range", "waist", "wavelength"]
                .into_iter()
                .find(|f| msg.starts_with(&format!("{f} ")));
            let key = match field {
                Some(f) => format!("geometry.{f}"),
                None if msg.contains("paraxial") => "geometry.waist".into(),
                None if msg.contains("unstable") => "geometry.length".into(),
                None => "geometry".into(),
            };
            CliError::config(key, msg)
        })?;

        let m = self.membrane.clone().unwrap_or_default();
        let dm = MembraneConfig::default();
        let angle = |q: &Option<Quantity>, key: &str| -> CliResult<f64> {
            q.as_ref().map_or(Ok(0.0), |q| si_quantity(q, Dimension::Angle, key))
        };
        let membrane = MembraneConfig {
            center_position: len(&m.position, "membrane.position", dm.center_position)?,
            thickness: len(&m.thickness, "membrane.thickness", dm.thickness)?,
            refractive_index: m.refractive_index.unwrap_or(dm.refractive_index),
            tilt_y: angle(&m.tilt_y, "membrane.tilt_y")?,
            tilt_z: angle(&m.tilt_z, "membrane.tilt_z")?,
            thin_limit: m.thin_limit.unwrap_or(dm.thin_limit),
        };
        membrane.validate().map_err(|e| {
            let msg = e.to_string();
            let key = [
                ("position", "membrane.position"),
                ("thickness", "membrane.thickness"),
                ("refractive index", "membrane.refractive_index"),
                ("tilt_y", "membrane.tilt_y"),
                ("tilt_z", "membrane.tilt_z"),
            ]
            .into_iter()
            .find(|(f, _)| msg.contains(f))
            .map_or("membrane", |(_, k)| k);
            CliError::config(key, msg)
        })?;

        let sweep = self.sweep.clone().unwrap_or_default();
        let positions = sweep
            .positions
            .as_ref()
            .map(|g| g.resolve(Dimension::Length, "sweep.positions"))
            .transpose()?;
        let tilts = sweep
            .tilts
            .as_ref()
            .map(|g| g.resolve(Dimension::Angle, "sweep.tilts"))
            .transpose()?;
        let detunings = sweep
            .detunings
            .as_ref()
            .map(|g| g.resolve(Dimension::Frequency, "sweep.detunings"))
            .transpose()?;

        let mode_set = resolve_modes(self.modes.as_ref(), &geometry)?;
        let output = self.output.clone().unwrap_or_default();
        Ok(Settings {
            geometry,
            membrane,
            positions,
            tilts,
            detunings,
            mode_set,
            method: self.method.unwrap_or(MethodChoice::Analytic),
            output_dir: output.directory,
            tables: output.tables.unwrap_or_default(),
        })
    }
}

fn resolve_modes(modes: Option<&ModesInput>, geom: &CavityGeometry) -> CliResult<Vec<ModeIndex>> {
    let m = modes.cloned().unwrap_or_default();
    let l = m.longitudinal.unwrap_or_else(|| geom.reference_longitudinal_index());
    let set = match (&m.manifolds, &m.explicit) {
        (Some(_), Some(_)) => return Err(CliError::config("modes", "give either `manifolds` or `explicit`, not both")),
        (None, Some(list)) => list.iter().map(|&[l, m, n]| ModeIndex::new(l, m, n)).collect(),
        (None, None) => ModeIndex::singlet_triplet(l),
        (Some(orders), None) => {
            let reference = ModeIndex::new(l, 0, 0);
            let mut set = Vec::new();
            for &order in orders {
                // Longitudinal index that brings this order nearest the reference.
                let best = (l.saturating_sub(order)..=l)
                    .min_by(|&a, &b| {
                        let fa = fractional_splitting(reference, ModeIndex::new(a, order, 0), geom).abs();
                        let fb = fractional_splitting(reference, ModeIndex::new(b, order, 0), geom).abs();
                        fa.total_cmp(&fb)
                    })
                    .unwrap_or(l);
                set.extend(ModeIndex::manifold(best, order));
            }
            set
        }
    };
    if set.is_empty() {
        return Err(CliError::config("modes", "empty mode set"));
    }
    Ok(set)
}
