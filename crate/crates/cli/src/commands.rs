//! Subcommand implementations. Each writes its tables and a JSON summary
//! into the output directory and returns the summary.

use std::path::{Path, PathBuf};

use mimcavity::fitting::{band_spatial_frequency, reflectivity_bound, Branch, LEVER_ARM_REFERENCE};
use mimcavity::{
    band_sweep, diagonal_band, find_crossings, fit_band_phase, fit_hyperbola, fit_tilt_calibration, full_spectrum,
    gap_map, gaps_near, monte_carlo_coverage, node_curvature, vij_analytic, vij_numeric, AvoidedCrossing, CrossingLabel,
    Method, ModeIndex, Observation, SingleModeCavity, SplittingCurve,
};
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{serialize_config, Dimension, FitKind, RunConfig, Settings, TableFormat};
use crate::error::{CliError, CliResult};
use crate::output::{summary_json, write_file, Cell, Provenance, Table};
use crate::raster::{ingest_raster, Raster, RasterOptions, Series};

/// Sample count of the default `bands` grid (two half-wavelength periods).
pub const DEFAULT_BAND_POINTS: usize = 401;
/// Default `gapmap` grid: 0 to 500 µm.
pub const DEFAULT_GAPMAP_POINTS: usize = 26;
pub const DEFAULT_GAPMAP_SPAN: f64 = 500e-6;
/// Coverage threshold, in reported standard deviations.
pub const COVERAGE_SIGMAS: f64 = 3.0;

pub struct Context {
    pub config: RunConfig,
    pub settings: Settings,
    /// Base for relative data paths.
    pub config_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    canonical: String,
}

impl Context {
    pub fn new(config: RunConfig, config_dir: PathBuf, out_dir: PathBuf, seed: u64) -> CliResult<Self> {
        let settings = config.resolve()?;
        let canonical = serialize_config(&config);
        Ok(Self {
            config,
            settings,
            config_dir,
            out_dir,
            seed,
            canonical,
        })
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(&self.canonical, command)
    }

    fn table(&self, name: &str, table: &Table, prov: &Provenance) -> CliResult<PathBuf> {
        match self.settings.tables {
            TableFormat::Csv => write_file(&self.out_dir, &format!("{name}.csv"), &table.render(prov)),
            TableFormat::Json => write_file(&self.out_dir, &format!("{name}.json"), &table.render_json(prov)),
        }
    }

    fn summary(&self, name: &str, prov: &Provenance, body: &Value) -> CliResult<PathBuf> {
        write_file(&self.out_dir, &format!("{name}.json"), &summary_json(prov, body))
    }

    fn data_path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }

    fn methods(&self) -> Vec<Method> {
        self.settings.method.methods()
    }
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::Numeric => "numeric",
        Method::Analytic => "analytic",
        Method::Unlinearized => "unlinearized",
    }
}

fn mode_name(m: ModeIndex) -> String {
    format!("TEM{}{}_{}", m.m, m.n, m.l)
}

fn file_list(files: &[PathBuf]) -> Value {
    Value::from(
        files
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect::<Vec<_>>(),
    )
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Band diagrams from the coupled model plus the uncoupled diagonal bands.
pub fn bands(ctx: &Context) -> CliResult<Value> {
    let s = &ctx.settings;
    let x0 = s.membrane.center_position;
    let positions = s
        .positions
        .clone()
        .unwrap_or_else(|| linspace(x0, x0 + s.geometry.wavelength(), DEFAULT_BAND_POINTS));
    let prov = ctx.provenance("bands");
    let mut files = Vec::new();
    let mut sweeps = Vec::new();
    for method in ctx.methods() {
        let bs = band_sweep(&positions, &s.membrane, &s.geometry, &s.mode_set, method)?;
        let names: Vec<String> = (0..bs.band_count()).map(|b| format!("band{b}")).collect();
        let mut headers = vec![("position", "m")];
        headers.extend(names.iter().map(|n| (n.as_str(), "Hz")));
        let mut table = Table::new(&headers);
        for p in 0..positions.len() {
            let mut row: Vec<Cell> = vec![positions[p].into()];
            row.extend((0..bs.band_count()).map(|b| Cell::from(bs.detuning_hz(p, b))));
            table.push(row);
        }
        files.push(ctx.table(&format!("bands_{}", method_name(method)), &table, &prov)?);
        sweeps.push(json!({
            "method": method_name(method),
            "min_overlap": bs.min_overlap,
            "warnings": bs.warnings,
        }));
    }

    // Uncoupled bands of each mode in the set, Hz relative to its own resonance.
    let f0 = s.geometry.optical_frequency_hz();
    let names: Vec<String> = s.mode_set.iter().map(|&m| mode_name(m)).collect();
    let mut headers = vec![("position", "m")];
    headers.extend(names.iter().map(|n| (n.as_str(), "Hz")));
    let diag = s
        .mode_set
        .iter()
        .map(|&m| diagonal_band(m, &positions, &s.membrane, &s.geometry))
        .collect::<mimcavity::Result<Vec<_>>>()?;
    let mut table = Table::new(&headers);
    for p in 0..positions.len() {
        let mut row: Vec<Cell> = vec![positions[p].into()];
        row.extend(diag.iter().map(|d| Cell::from(d[p] * f0)));
        table.push(row);
    }
    files.push(ctx.table("diagonal", &table, &prov)?);

    // Full diagram of all manifolds up to the highest order in the set, in FSR.
    let max_order = s.mode_set.iter().map(|m| m.order()).max().unwrap_or(0);
    let spectrum = full_spectrum(max_order, &positions, &s.membrane, &s.geometry)?;
    let names: Vec<String> = spectrum.iter().map(|b| mode_name(b.mode)).collect();
    let mut headers = vec![("position", "m")];
    headers.extend(names.iter().map(|n| (n.as_str(), "fsr")));
    let mut table = Table::new(&headers);
    for p in 0..positions.len() {
        let mut row: Vec<Cell> = vec![positions[p].into()];
        row.extend(spectrum.iter().map(|b| Cell::from(b.detuning_fsr[p])));
        table.push(row);
    }
    files.push(ctx.table("spectrum", &table, &prov)?);

    let body = json!({
        "modes": s.mode_set,
        "points": positions.len(),
        "fsr_hz": s.geometry.fsr_hz(),
        "sweeps": sweeps,
        "files": file_list(&files),
    });
    ctx.summary("bands", &prov.with_units(&[("fsr_hz", "Hz")]), &body)?;
    Ok(body)
}

/// The four labelled gaps against membrane position, per tilt.
pub fn gapmap(ctx: &Context) -> CliResult<Value> {
    let s = &ctx.settings;
    let positions = s
        .positions
        .clone()
        .unwrap_or_else(|| linspace(0.0, DEFAULT_GAPMAP_SPAN, DEFAULT_GAPMAP_POINTS));
    let tilts = s.tilts.clone().unwrap_or_else(|| vec![s.membrane.tilt_z]);
    let prov = ctx.provenance("gapmap");
    let mut files = Vec::new();
    let mut found = Vec::new();
    for method in ctx.methods() {
        let map = gap_map(&positions, &tilts, &s.membrane, &s.geometry, &s.mode_set, method)?;
        let mut headers = vec![("tilt_z", "rad"), ("position", "m")];
        headers.extend(CrossingLabel::GAPS.iter().map(|l| (l.as_str(), "Hz")));
        let mut table = Table::new(&headers);
        let mut counts = [0usize; 4];
        for (t, &tilt) in tilts.iter().enumerate() {
            for (p, &x) in positions.iter().enumerate() {
                let mut row: Vec<Cell> = vec![tilt.into(), x.into()];
                for (k, &label) in CrossingLabel::GAPS.iter().enumerate() {
                    let g = map.gap(label, t, p);
                    counts[k] += g.is_some() as usize;
                    row.push(g.into());
                }
                table.push(row);
            }
        }
        files.push(ctx.table(&format!("gapmap_{}", method_name(method)), &table, &prov)?);
        found.push(json!({
            "method": method_name(method),
            "cells_with_gap": CrossingLabel::GAPS.iter().zip(counts).map(|(l, c)| (l.as_str().to_string(), Value::from(c))).collect::<serde_json::Map<_, _>>(),
        }));
    }
    let body = json!({
        "positions": positions.len(),
        "tilts": tilts,
        "methods": found,
        "files": file_list(&files),
    });
    ctx.summary("gapmap", &prov.with_units(&[("tilts", "rad")]), &body)?;
    Ok(body)
}

#[derive(Serialize)]
struct CrossingReport<'a> {
    #[serde(flatten)]
    crossing: &'a AvoidedCrossing,
    hyperbola_curvature: f64,
    curvature_ratio_to_slab: f64,
}

/// Avoided crossings in the period after the membrane position (or along the
/// configured position grid), with curvature and effective reflectivity.
pub fn crossing(ctx: &Context) -> CliResult<Value> {
    let s = &ctx.settings;
    let prov = ctx.provenance("crossing");
    let m = &s.membrane;
    let slab = SingleModeCavity::slab(s.geometry.length(), s.geometry.wavelength(), m.refractive_index, m.thickness);
    let slab_curvature = node_curvature(&slab)?;
    let mut files = Vec::new();
    let mut per_method = Vec::new();
    for method in ctx.methods() {
        let crossings = match &s.positions {
            Some(p) => find_crossings(&band_sweep(p, m, &s.geometry, &s.mode_set, method)?)?,
            None => gaps_near(m.center_position, m, &s.geometry, &s.mode_set, method)?,
        };
        let mut table = Table::new(&[
            ("label", "label"),
            ("partner", "label"),
            ("center", "m"),
            ("gap", "Hz"),
            ("slope", "Hz/m"),
            ("curvature", "Hz/m^2"),
            ("hyperbola_curvature", "Hz/m^2"),
            ("effective_reflectivity", "1"),
            ("detuning", "Hz"),
        ]);
        let mut reports = Vec::new();
        for c in &crossings {
            let hc = if c.gap > 0.0 { c.hyperbola_curvature() } else { f64::INFINITY };
            table.push(vec![
                c.label.as_str().into(),
                mode_name(c.partner).into(),
                c.center_position.into(),
                c.gap.into(),
                c.asymptotic_slope.into(),
                c.curvature.into(),
                hc.into(),
                c.effective_reflectivity.into(),
                c.detuning.into(),
            ]);
            reports.push(CrossingReport {
                crossing: c,
                hyperbola_curvature: hc,
                curvature_ratio_to_slab: c.curvature / slab_curvature,
            });
        }
        files.push(ctx.table(&format!("crossings_{}", method_name(method)), &table, &prov)?);
        per_method.push(json!({ "method": method_name(method), "crossings": reports }));
    }
    let body = json!({
        "slab_reflectivity": slab.power_reflectivity(),
        "slab_node_curvature": slab_curvature,
        "methods": per_method,
        "files": file_list(&files),
    });
    let units = [
        ("slab_node_curvature", "Hz/m^2"),
        ("center_position", "m"),
        ("gap", "Hz"),
        ("asymptotic_slope", "Hz/m"),
        ("curvature", "Hz/m^2"),
        ("detuning", "Hz"),
    ];
    ctx.summary("crossing", &prov.with_units(&units), &body)?;
    Ok(body)
}

fn load_series(ctx: &Context, path: &str, detrend: bool) -> CliResult<(PathBuf, Series)> {
    let path = ctx.data_path(path);
    let options = RasterOptions {
        detrend,
        ..RasterOptions::new(ctx.settings.geometry.optical_frequency_hz())
    };
    match ingest_raster(&path, &options)? {
        Raster::Series(s) => Ok((path, s)),
        Raster::Grid(_) => Err(CliError::ingestion(path.display().to_string(), "expected a series, found a grid")),
    }
}

struct Samples {
    x: Vec<f64>,
    y: Vec<f64>,
    weight: Vec<f64>,
    labels: Vec<String>,
}

/// Position, value and optional `sigma` columns of a series, with labels.
fn samples(path: &Path, series: &Series, value_dim: Dimension) -> CliResult<Samples> {
    let err = |m: &str| CliError::ingestion(path.display().to_string(), m);
    let x = series
        .column_of(Dimension::Length)
        .ok_or_else(|| err("no position column (length or steps)"))?;
    let y = series
        .columns
        .iter()
        .find(|c| c.unit.dimension() == Some(value_dim) && c.name != "sigma")
        .ok_or_else(|| err("no value column of the expected dimension"))?;
    let weight = match series.column("sigma") {
        Some(c) => {
            if c.values.iter().any(|s| !(*s > 0.0)) {
                return Err(err("sigma must be positive"));
            }
            c.values.iter().map(|s| 1.0 / (s * s)).collect()
        }
        None => vec![1.0; x.values.len()],
    };
    let labels: Vec<String> = series
        .labels()
        .map(|c| c.labels.iter().map(|l| l.to_lowercase()).collect())
        .unwrap_or_default();
    let keep: Vec<usize> = (0..x.values.len())
        .filter(|&i| x.values[i].is_finite() && y.values[i].is_finite())
        .collect();
    Ok(Samples {
        x: keep.iter().map(|&i| x.values[i]).collect(),
        y: keep.iter().map(|&i| y.values[i]).collect(),
        weight: keep.iter().map(|&i| weight[i]).collect(),
        labels: if labels.is_empty() {
            Vec::new()
        } else {
            keep.iter().map(|&i: &usize| labels[i].clone()).collect()
        },
    })
}

fn split_by_label(path: &Path, s: &Samples, names: [&str; 2], required: bool) -> CliResult<[Vec<Observation<f64>>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for i in 0..s.x.len() {
        let k = match s.labels.get(i) {
            None if !required => 0,
            None => {
                return Err(CliError::ingestion(
                    path.display().to_string(),
                    format!("a label column with `{}`/`{}` is required", names[0], names[1]),
                ))
            }
            Some(l) => names.iter().position(|n| n == l).ok_or_else(|| {
                CliError::ingestion(path.display().to_string(), format!("unknown label `{l}`"))
            })?,
        };
        out[k].push(Observation::weighted(s.x[i], s.y[i], s.weight[i]));
    }
    Ok(out)
}

fn normal(sigma: f64) -> CliResult<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| CliError::config("fit.monte_carlo.noise", e.to_string()))
}

/// Hyperbola or band-phase fit of ingested data, with optional Monte-Carlo
/// coverage of the reported uncertainties.
pub fn fit(ctx: &Context) -> CliResult<Value> {
    let input = ctx
        .config
        .fit
        .clone()
        .ok_or_else(|| CliError::config("fit", "the fit command needs a `fit` section"))?;
    let (path, series) = load_series(ctx, &input.data, input.detrend.unwrap_or(false))?;
    let s = samples(&path, &series, Dimension::Frequency)?;
    let geom = ctx.settings.geometry;
    let prov = ctx.provenance("fit");
    let noise = input
        .monte_carlo
        .as_ref()
        .map(|mc| -> CliResult<(usize, f64)> {
            let sigma = crate::config::si_quantity(&mc.noise, Dimension::Frequency, "fit.monte_carlo.noise")?;
            if !(sigma > 0.0) || mc.trials == 0 {
                return Err(CliError::config("fit.monte_carlo", "needs trials > 0 and positive noise"));
            }
            Ok((mc.trials, sigma))
        })
        .transpose()?;

    let mut table = Table::new(&[("position", "m"), ("observed", "Hz"), ("fitted", "Hz"), ("group", "label")]);
    let body = match input.kind {
        FitKind::Hyperbola => {
            let [upper, lower] = split_by_label(&path, &s, ["upper", "lower"], false)?;
            let background = input.linear_background.unwrap_or(false);
            let h = fit_hyperbola(&upper, &lower, background)?;
            for (obs, branch, name) in [(&upper, Branch::Upper, "upper"), (&lower, Branch::Lower, "lower")] {
                for o in obs.iter() {
                    table.push(vec![o.input.into(), o.output.into(), h.evaluate(o.input, branch).into(), name.into()]);
                }
            }
            let bound = if h.gap > 0.0 { reflectivity_bound(h.slope, h.gap, &geom).ok() } else { None };
            let coverage = noise.map(|(trials, sigma)| {
                let truth = h.fit.values();
                let names: Vec<&str> = h.fit.parameters.iter().map(|p| p.name.as_str()).collect();
                let dist = normal(sigma)?;
                let synth = |obs: &[Observation<f64>], branch, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Observation<f64>> {
                    obs.iter()
                        .map(|o| {
                            let y = h.evaluate(o.input, branch) + dist.sample(rng);
                            Observation::weighted(o.input, y, 1.0 / (sigma * sigma))
                        })
                        .collect()
                };
                let report = monte_carlo_coverage(trials, ctx.seed, COVERAGE_SIGMAS, &names, &truth, |rng| {
                    let u = synth(&upper, Branch::Upper, rng);
                    let l = synth(&lower, Branch::Lower, rng);
                    let f = fit_hyperbola(&u, &l, background)?;
                    let unc = f.fit.parameters.iter().map(|p| p.uncertainty).collect();
                    Ok((f.fit.values(), unc, f.fit.converged))
                });
                Ok::<_, CliError>(report)
            });
            json!({
                "kind": "hyperbola",
                "fit": h,
                "reflectivity_bound": bound,
                "monte_carlo": coverage.transpose()?,
            })
        }
        FitKind::BandPhase => {
            let [singlet, triplet] = split_by_label(&path, &s, ["singlet", "triplet"], true)?;
            let f = fit_band_phase(&singlet, &triplet, &geom)?;
            let modes = ModeIndex::singlet_triplet(geom.reference_longitudinal_index());
            let omega = [band_spatial_frequency(modes[0], &geom), band_spatial_frequency(modes[1], &geom)];
            let eval = |k: usize, x: f64| {
                let p = if k == 0 { f.singlet.values() } else { f.triplet.values() };
                p[0] + p[1] * (omega[k] * x).cos() + p[2] * (omega[k] * x).sin()
            };
            for (k, (obs, name)) in [(&singlet, "singlet"), (&triplet, "triplet")].into_iter().enumerate() {
                for o in obs.iter() {
                    table.push(vec![o.input.into(), o.output.into(), eval(k, o.input).into(), name.into()]);
                }
            }
            let coverage = noise.map(|(trials, sigma)| {
                let dist = normal(sigma)?;
                let synth = |k: usize, obs: &[Observation<f64>], rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Observation<f64>> {
                    obs.iter()
                        .map(|o| Observation::weighted(o.input, eval(k, o.input) + dist.sample(rng), 1.0 / (sigma * sigma)))
                        .collect()
                };
                let report = monte_carlo_coverage(trials, ctx.seed, COVERAGE_SIGMAS, &["displacement"], &[f.displacement], |rng| {
                    let a = synth(0, &singlet, rng);
                    let b = synth(1, &triplet, rng);
                    let g = fit_band_phase(&a, &b, &geom)?;
                    let ok = g.singlet.converged && g.triplet.converged;
                    Ok((vec![g.displacement], vec![g.displacement_uncertainty], ok))
                });
                Ok::<_, CliError>(report)
            });
            json!({
                "kind": "band_phase",
                "fit": f,
                "monte_carlo": coverage.transpose()?,
            })
        }
    };
    let mut files = vec![ctx.table("fit_residuals", &table, &prov)?];
    let mut body = body;
    body["seed"] = Value::from(ctx.seed);
    body["data"] = Value::from(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
    let units = [
        ("slope", "Hz/m"),
        ("gap", "Hz"),
        ("center", "m"),
        ("curvature", "Hz/m^2"),
        ("relative_phase", "rad"),
        ("displacement", "m"),
    ];
    files.push(ctx.summary("fit", &prov.with_units(&units), &body)?);
    body["files"] = file_list(&files);
    Ok(body)
}

/// Tilt-stage calibration from motor travel and measured tilt, or from
/// measured triplet splittings converted to tilt with the model.
pub fn calibrate(ctx: &Context) -> CliResult<Value> {
    let input = ctx
        .config
        .calibrate
        .clone()
        .ok_or_else(|| CliError::config("calibrate", "the calibrate command needs a `calibrate` section"))?;
    let (path, series) = load_series(ctx, &input.data, false)?;
    let s = &ctx.settings;
    let prov = ctx.provenance("calibrate");
    let (source, tilt_samples) = if series.column_of(Dimension::Angle).is_some() {
        let smp = samples(&path, &series, Dimension::Angle)?;
        ("tilt", smp)
    } else {
        let smp = samples(&path, &series, Dimension::Frequency)?;
        let method = ctx.methods()[0];
        let grid = linspace(0.0, 1e-3, 81);
        let curve = SplittingCurve::compute(&grid, &s.membrane, &s.geometry, &ModeIndex::singlet_triplet(s.geometry.reference_longitudinal_index()), method)?;
        // Propagate σ through the local slope of the curve.
        let y = smp
            .y
            .iter()
            .map(|&f| curve.tilt(f))
            .collect::<mimcavity::Result<Vec<_>>>()?;
        let weight = y
            .iter()
            .zip(&smp.weight)
            .map(|(&a, &w)| {
                let (lo, hi) = ((a - 1e-6).max(0.0), (a + 1e-6).min(1e-3));
                let slope = (curve.splitting(hi)? - curve.splitting(lo)?) / (hi - lo);
                Ok(w * slope * slope)
            })
            .collect::<mimcavity::Result<Vec<_>>>()?;
        ("splitting", Samples { y, weight, ..smp })
    };
    // Fit in µm and mrad.
    let obs: Vec<Observation<f64>> = (0..tilt_samples.x.len())
        .map(|i| {
            Observation::weighted(
                tilt_samples.x[i] * 1e6,
                tilt_samples.y[i] * 1e3,
                tilt_samples.weight[i] * 1e-6,
            )
        })
        .collect();
    let cal = fit_tilt_calibration(&obs)?;
    let mut table = Table::new(&[("travel", "um"), ("tilt", "mrad"), ("fitted", "mrad")]);
    for o in &obs {
        table.push(vec![o.input.into(), o.output.into(), cal.tilt(o.input).into()]);
    }
    let mut files = vec![ctx.table("calibration", &table, &prov)?];
    let mut body = json!({
        "source": source,
        "calibration": cal,
        "lever_arm_reference": LEVER_ARM_REFERENCE,
        "data": path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
    });
    let units = [
        ("conversion", "mrad/um"),
        ("residual_tilt", "mrad"),
        ("lever_arm_reference", "mrad/um"),
    ];
    files.push(ctx.summary("calibrate", &prov.with_units(&units), &body)?);
    body["files"] = file_list(&files);
    Ok(body)
}

/// Closed-form against quadrature matrix elements; fails (exit 3) when any
/// element differs by more than 1% of the largest.
pub fn oracle(ctx: &Context) -> CliResult<Value> {
    let s = &ctx.settings;
    let prov = ctx.provenance("oracle");
    let set = &s.mode_set;
    let pairs: Vec<(usize, usize)> = (0..set.len()).flat_map(|i| (i..set.len()).map(move |j| (i, j))).collect();
    let numeric = pairs
        .iter()
        .map(|&(i, j)| vij_numeric(set[i], set[j], &s.membrane, &s.geometry))
        .collect::<mimcavity::Result<Vec<_>>>()?;
    let analytic: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| vij_analytic(set[i], set[j], &s.membrane, &s.geometry))
        .collect();
    let scale = numeric.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut table = Table::new(&[
        ("mode_i", "label"),
        ("mode_j", "label"),
        ("analytic", "1"),
        ("numeric", "1"),
        ("relative_error", "1"),
    ]);
    let mut worst = 0.0f64;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let e = (analytic[k] - numeric[k]).abs() / scale;
        worst = worst.max(e);
        table.push(vec![
            mode_name(set[i]).into(),
            mode_name(set[j]).into(),
            analytic[k].into(),
            numeric[k].into(),
            e.into(),
        ]);
    }
    let pass = worst < 0.01;
    let mut files = vec![ctx.table("oracle", &table, &prov)?];
    let mut body = json!({
        "modes": set,
        "largest_element": scale,
        "max_relative_error": worst,
        "tolerance": 0.01,
        "pass": pass,
    });
    files.push(ctx.summary("oracle", &prov, &body)?);
    body["files"] = file_list(&files);
    if !pass {
        return Err(CliError::Numerical(format!(
            "closed form differs from quadrature by {:.3}% of the largest element",
            worst * 100.0
        )));
    }
    Ok(body)
}
