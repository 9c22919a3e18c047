//! Weighted nonlinear least squares and the model fits built on it:
//! avoided-crossing hyperbolas, band phases, tilt from triplet splitting and
//! tilt-stage calibration.
//!
//! Weights are inverse variances. The reported covariance is `(JᵀWJ)⁻¹` at
//! the optimum, so uncertainties are absolute when the weights are, and
//! scale as `1/√c` when all weights are multiplied by `c`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::beam::{resonant_wavenumber, CavityGeometry, ModeIndex};
use crate::coupling::Method;
use crate::error::{Error, Result};
use crate::membrane::MembraneConfig;
use crate::single_mode::ReflectivityMap;
use crate::spectra::triplet_splitting;

/// One data point: model input, measured output and weight `1/σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<X> {
    pub input: X,
    pub output: f64,
    pub weight: f64,
}

impl<X> Observation<X> {
    pub fn new(input: X, output: f64) -> Self {
        Self { input, output, weight: 1.0 }
    }

    pub fn weighted(input: X, output: f64, weight: f64) -> Self {
        Self { input, output, weight }
    }
}

/// Name, unit and starting value of a fit parameter. `scale` sets the
/// finite-difference step and convergence threshold; zero means "use the
/// magnitude of the starting value".
#[derive(Debug, Clone)]
pub struct ParameterSpec {
    pub name: String,
    pub unit: String,
    pub initial: f64,
    pub scale: f64,
}

impl ParameterSpec {
    pub fn new(name: &str, unit: &str, initial: f64) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            initial,
            scale: 0.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitParameter {
    pub name: String,
    pub unit: String,
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    pub covariance: Vec<Vec<f64>>,
    /// `√(Σ w r²)` at the returned point.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Why the fit stopped when it did not converge.
    pub message: Option<String>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.uncertainty)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    fn index(&self, name: &str) -> usize {
        self.parameters.iter().position(|p| p.name == name).expect("parameter exists")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LeastSquaresOptions {
    pub max_iterations: usize,
    /// Relative step size below which the fit has converged.
    pub step_tolerance: f64,
    /// Smallest singular value (relative to the largest) of the column-scaled
    /// Jacobian before the problem counts as rank deficient.
    pub rank_tolerance: f64,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-12,
            rank_tolerance: 1e-10,
        }
    }
}

/// Levenberg-Marquardt minimization of `Σ w (y − f(x; p))²`.
///
/// Jacobians are central differences with steps of `1e-6` times each
/// parameter's scale. A rank-deficient Jacobian or an exhausted iteration
/// budget returns the best point with `converged = false`; the covariance
/// then comes from the pseudo-inverse.
pub fn least_squares<X, F>(model: F, data: &[Observation<X>], params: &[ParameterSpec]) -> Result<FitResult>
where
    X: Sync,
    F: Fn(&X, &[f64]) -> f64 + Sync,
{
    least_squares_with(model, data, params, LeastSquaresOptions::default())
}

pub fn least_squares_with<X, F>(
    model: F,
    data: &[Observation<X>],
    params: &[ParameterSpec],
    opts: LeastSquaresOptions,
) -> Result<FitResult>
where
    X: Sync,
    F: Fn(&X, &[f64]) -> f64 + Sync,
{
    let m = params.len();
    let n = data.len();
    if m == 0 {
        return Err(Error::Fit("no parameters".into()));
    }
    if n < m {
        return Err(Error::Fit(format!("{n} data points for {m} parameters")));
    }
    if data
        .iter()
        .any(|d| !d.output.is_finite() || !d.weight.is_finite() || d.weight < 0.0)
    {
        return Err(Error::Fit("data outputs and weights must be finite, weights non-negative".into()));
    }
    if params.iter().any(|p| !p.initial.is_finite()) {
        return Err(Error::Fit("non-finite initial guess".into()));
    }
    let scales: Vec<f64> = params
        .iter()
        .map(|p| {
            let s = if p.scale > 0.0 { p.scale } else { p.initial.abs() };
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let sqrt_w: Vec<f64> = data.iter().map(|d| d.weight.sqrt()).collect();

    let residuals = |p: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            n,
            data.iter().zip(&sqrt_w).map(|(d, sw)| sw * (d.output - model(&d.input, p))),
        )
    };
    let cost = |r: &DVector<f64>| -> f64 {
        let c = r.norm_squared();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    };
    // Jacobian of the model (not the residual), weighted and column-scaled.
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                let h = 1e-6 * scales[j].max(p[j].abs());
                let mut plus = p.to_vec();
                let mut minus = p.to_vec();
                plus[j] += h;
                minus[j] -= h;
                let width = plus[j] - minus[j];
                data.iter()
                    .zip(&sqrt_w)
                    .map(|(d, sw)| sw * (model(&d.input, &plus) - model(&d.input, &minus)) / width * scales[j])
                    .collect()
            })
            .collect();
        DMatrix::from_fn(n, m, |i, j| cols[j][i])
    };

    let mut p: Vec<f64> = params.iter().map(|s| s.initial).collect();
    let mut r = residuals(&p);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::Fit("model is not finite at the initial guess".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut message = None;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        if c == 0.0 {
            converged = true;
            break;
        }
        let j = jacobian(&p);
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let diag_floor = jtj.diagonal().max() * 1e-12;
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(diag_floor).max(f64::MIN_POSITIVE);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            // Scaled step u; the parameter step is u·scale.
            let u = chol.solve(&jtr);
            let trial: Vec<f64> = (0..m).map(|k| p[k] + u[k] * scales[k]).collect();
            let rt = residuals(&trial);
            let ct = cost(&rt);
            small_step = (0..m).all(|k| (u[k] * scales[k]).abs() <= opts.step_tolerance * (p[k].abs() + scales[k]));
            if ct <= c {
                p = trial;
                r = rt;
                let improvement = c - ct;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small_step || improvement <= 1e-15 * c {
                    small_step = true;
                }
                break;
            }
            if small_step {
                break;
            }
            lambda *= 4.0;
        }
        if small_step {
            converged = true;
            break;
        }
        if !accepted {
            // No downhill step at any damping: a stationary point to working precision.
            converged = true;
            break;
        }
    }
    if !converged {
        message = Some(format!("no convergence after {iterations} iterations"));
    }

    let j = jacobian(&p);
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let rank_deficient = !(smax > 0.0) || smin <= opts.rank_tolerance * smax;
    let jtj = j.transpose() * &j;
    let scaled_cov = if rank_deficient {
        converged = false;
        message = Some("rank-deficient Jacobian: parameters are not separately identifiable".into());
        jtj.pseudo_inverse(opts.rank_tolerance * smax * smax)
            .unwrap_or_else(|_| DMatrix::zeros(m, m))
    } else {
        jtj.clone()
            .cholesky()
            .map(|ch| ch.inverse())
            .or_else(|| jtj.pseudo_inverse(0.0).ok())
            .unwrap_or_else(|| DMatrix::zeros(m, m))
    };
    let covariance: Vec<Vec<f64>> = (0..m)
        .map(|a| (0..m).map(|b| scaled_cov[(a, b)] * scales[a] * scales[b]).collect())
        .collect();
    let parameters = params
        .iter()
        .enumerate()
        .map(|(k, s)| FitParameter {
            name: s.name.clone(),
            unit: s.unit.clone(),
            value: p[k],
            uncertainty: covariance[k][k].max(0.0).sqrt(),
        })
        .collect();
    Ok(FitResult {
        parameters,
        covariance,
        residual_norm: c.sqrt(),
        converged,
        iterations,
        message,
    })
}

// Half-width of the 1σ interval of √s given s ± σ, which stays finite at s = 0.
fn sqrt_uncertainty(s: f64, sigma: f64) -> f64 {
    ((s + sigma).max(0.0).sqrt() - (s - sigma).max(0.0).sqrt()) / 2.0
}

/// Which branch of the avoided crossing a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Upper,
    Lower,
}

/// Two-level hyperbola `y = y0 + b·(x − xc) ± √(a²(x − xc)² + s)` with
/// `s = (Δf/2)²`, in SI units (m, Hz).
#[derive(Debug, Clone, Serialize)]
pub struct HyperbolaFit {
    pub fit: FitResult,
    /// Asymptotic slope `a`, Hz/m.
    pub slope: f64,
    /// Gap `Δf = 2√s`, Hz.
    pub gap: f64,
    pub gap_uncertainty: f64,
    pub center: f64,
    /// `2a²/Δf`, Hz/m².
    pub curvature: f64,
    pub curvature_uncertainty: f64,
}

impl HyperbolaFit {
    pub fn evaluate(&self, x: f64, branch: Branch) -> f64 {
        hyperbola(&(x, branch), &self.fit.values())
    }
}

fn hyperbola(input: &(f64, Branch), p: &[f64]) -> f64 {
    let (x, branch) = *input;
    let u = x - p[2];
    let root = (p[0] * p[0] * u * u + p[1]).sqrt();
    let background = p.get(4).map_or(0.0, |b| b * u);
    match branch {
        Branch::Upper => p[3] + background + root,
        Branch::Lower => p[3] + background - root,
    }
}

/// Fits one or both branches of an avoided crossing. Points are `(x [m],
/// detuning [Hz])` with weights; `linear_background` adds a common slope for
/// a tilted pair mean or a linear drift.
///
/// Starting values: center at the minimum of the upper branch (else the
/// maximum of the lower one), slope from the endpoints, gap from the branch
/// separation or from a local parabola.
pub fn fit_hyperbola(
    upper: &[Observation<f64>],
    lower: &[Observation<f64>],
    linear_background: bool,
) -> Result<HyperbolaFit> {
    let data: Vec<Observation<(f64, Branch)>> = upper
        .iter()
        .map(|o| Observation::weighted((o.input, Branch::Upper), o.output, o.weight))
        .chain(
            lower
                .iter()
                .map(|o| Observation::weighted((o.input, Branch::Lower), o.output, o.weight)),
        )
        .collect();
    if data.iter().any(|d| !d.input.0.is_finite()) {
        return Err(Error::Fit("non-finite positions".into()));
    }
    let (xc0, y_extreme, sign, primary) = match (upper.is_empty(), lower.is_empty()) {
        (true, true) => return Err(Error::Fit("no hyperbola data".into())),
        (false, _) => {
            let o = upper.iter().min_by(|a, b| a.output.total_cmp(&b.output)).unwrap();
            (o.input, o.output, 1.0, upper)
        }
        (true, false) => {
            let o = lower.iter().max_by(|a, b| a.output.total_cmp(&b.output)).unwrap();
            (o.input, o.output, -1.0, lower)
        }
    };
    let (xmin, xmax) = primary
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.input), hi.max(o.input)));
    if !(xmin < xc0 && xc0 < xmax) {
        return Err(Error::Fit("data do not bracket the turning point".into()));
    }
    let end = |x: f64| primary.iter().find(|o| o.input == x).unwrap().output;
    let a0 = 0.5 * ((end(xmin) - y_extreme).abs() / (xc0 - xmin) + (end(xmax) - y_extreme).abs() / (xmax - xc0));
    let a0 = if a0 > 0.0 { a0 } else { 1.0 };
    let half_gap0 = if !upper.is_empty() && !lower.is_empty() {
        let top = upper.iter().map(|o| o.output).fold(f64::INFINITY, f64::min);
        let bottom = lower.iter().map(|o| o.output).fold(f64::NEG_INFINITY, f64::max);
        ((top - bottom) / 2.0).abs()
    } else {
        // Curvature of a parabola through the turning point and its neighbours.
        let mut sorted: Vec<&Observation<f64>> = primary.iter().collect();
        sorted.sort_by(|a, b| a.input.total_cmp(&b.input));
        let i = sorted.iter().position(|o| o.input == xc0).unwrap();
        let (l, c, r) = (sorted[i - 1], sorted[i], sorted[i + 1]);
        let d1 = (r.output - c.output) / (r.input - c.input);
        let d0 = (c.output - l.output) / (c.input - l.input);
        let curv = (2.0 * (d1 - d0) / (r.input - l.input)).abs();
        if curv > 0.0 {
            a0 * a0 / curv
        } else {
            a0 * (xmax - xmin) / 100.0
        }
    };
    let y00 = if !upper.is_empty() && !lower.is_empty() {
        let top = upper.iter().map(|o| o.output).fold(f64::INFINITY, f64::min);
        top - half_gap0
    } else {
        y_extreme - sign * half_gap0
    };
    let width = xmax - xmin;
    let mut specs = vec![
        ParameterSpec::new("slope", "Hz/m", a0),
        ParameterSpec::new("half_gap_squared", "Hz^2", half_gap0 * half_gap0).with_scale((a0 * width / 10.0).powi(2)),
        ParameterSpec::new("center", "m", xc0).with_scale(width),
        ParameterSpec::new("offset", "Hz", y00).with_scale(a0 * width),
    ];
    if linear_background {
        specs.push(ParameterSpec::new("background_slope", "Hz/m", 0.0).with_scale(a0));
    }
    let fit = least_squares(hyperbola, &data, &specs)?;
    let a = fit.value("slope").unwrap().abs();
    let s = fit.value("half_gap_squared").unwrap();
    let sigma_s = fit.uncertainty("half_gap_squared").unwrap();
    let gap = 2.0 * s.max(0.0).sqrt();
    let gap_uncertainty = 2.0 * sqrt_uncertainty(s, sigma_s);
    let curvature = if s > 0.0 { a * a / s.sqrt() } else { f64::INFINITY };
    let curvature_uncertainty = if s > 0.0 {
        let (ia, is) = (fit.index("slope"), fit.index("half_gap_squared"));
        let ga = 2.0 * a / s.sqrt();
        let gs = -a * a / (2.0 * s.powf(1.5));
        let var = ga * ga * fit.covariance[ia][ia] + 2.0 * ga * gs * fit.covariance[ia][is] + gs * gs * fit.covariance[is][is];
        var.max(0.0).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(HyperbolaFit {
        slope: a,
        gap,
        gap_uncertainty,
        center: fit.value("center").unwrap(),
        curvature,
        curvature_uncertainty,
        fit,
    })
}

/// Lower bound on the effective single-mode reflectivity implied by an
/// asymptotic slope `a` (Hz/m) and a gap upper bound `Δf` (Hz).
pub fn reflectivity_bound(slope: f64, gap: f64, geom: &CavityGeometry) -> Result<f64> {
    if !(slope > 0.0 && gap > 0.0) {
        return Err(Error::InvalidArgument("slope and gap must be positive".into()));
    }
    ReflectivityMap::new(geom.length(), geom.wavelength())?.invert(2.0 * slope * slope / gap)
}

/// Spatial frequency `Ω = (2k x_R − (N + 1))/x_R` of a diagonal band near the
/// waist. The axial Gouy phase contributes `−2(N + 1)Δ0`; averaging over the
/// curved phase front gives back `+(N + 1)Δ0`.
pub fn band_spatial_frequency(mode: ModeIndex, geom: &CavityGeometry) -> f64 {
    let k = resonant_wavenumber(mode, geom);
    let xr = geom.rayleigh_range();
    (2.0 * k * xr - (mode.order() + 1) as f64) / xr
}

#[derive(Debug, Clone, Serialize)]
pub struct BandPhaseFit {
    pub singlet: FitResult,
    pub triplet: FitResult,
    /// `φ_s − φ_t − π`, wrapped to `(−π, π]`, rad.
    pub relative_phase: f64,
    pub relative_phase_uncertainty: f64,
    /// Displacement from the waist of the series origin, m.
    pub displacement: f64,
    pub displacement_uncertainty: f64,
}

fn fit_cosine(series: &[Observation<f64>], omega: f64, name: &str) -> Result<(FitResult, f64, f64)> {
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.input), hi.max(o.input)));
    let period = 2.0 * std::f64::consts::PI / omega;
    if !(hi - lo >= 2.0 * period * (1.0 - 1e-9)) {
        return Err(Error::Fit(format!("{name} band spans less than two periods")));
    }
    // Start from the discrete Fourier component at Ω.
    let wsum: f64 = series.iter().map(|o| o.weight).sum();
    let mean = series.iter().map(|o| o.weight * o.output).sum::<f64>() / wsum;
    let proj = |f: &dyn Fn(f64) -> f64| {
        2.0 * series.iter().map(|o| o.weight * (o.output - mean) * f(omega * o.input)).sum::<f64>() / wsum
    };
    let (p0, q0) = (proj(&f64::cos), proj(&f64::sin));
    let amp = p0.hypot(q0).max(f64::MIN_POSITIVE);
    let specs = [
        ParameterSpec::new("offset", "1", mean).with_scale(amp),
        ParameterSpec::new("cos", "1", p0).with_scale(amp),
        ParameterSpec::new("sin", "1", q0).with_scale(amp),
    ];
    let fit = least_squares(|x: &f64, p: &[f64]| p[0] + p[1] * (omega * x).cos() + p[2] * (omega * x).sin(), series, &specs)?;
    let (p, q) = (fit.parameters[1].value, fit.parameters[2].value);
    // R cos(Ωx + φ) = p cos Ωx + q sin Ωx  ⇒  φ = atan2(−q, p).
    let phi = (-q).atan2(p);
    let r2 = p * p + q * q;
    let (gp, gq) = (q / r2, -p / r2);
    let c = &fit.covariance;
    let var = gp * gp * c[1][1] + 2.0 * gp * gq * c[1][2] + gq * gq * c[2][2];
    Ok((fit, phi, var.max(0.0)))
}

/// Estimates the displacement from the waist from the phase lag between the
/// singlet and triplet diagonal bands.
///
/// Positions are stage coordinates in metres (origin at the unknown
/// membrane position), detunings in any common unit. Each band is fitted to
/// `c + R cos(Ω x + φ)` with `Ω` from [`band_spatial_frequency`]; the two
/// bands have opposite sign, so the displacement is
/// `wrap(φ_s − φ_t − π)/(Ω_s − Ω_t)`.
pub fn fit_band_phase(singlet: &[Observation<f64>], triplet: &[Observation<f64>], geom: &CavityGeometry) -> Result<BandPhaseFit> {
    let modes = ModeIndex::singlet_triplet(geom.reference_longitudinal_index());
    let (ws, wt) = (band_spatial_frequency(modes[0], geom), band_spatial_frequency(modes[1], geom));
    let (fs, phis, vs) = fit_cosine(singlet, ws, "singlet")?;
    let (ft, phit, vt) = fit_cosine(triplet, wt, "triplet")?;
    let pi = std::f64::consts::PI;
    let mut rel = phis - phit - pi;
    rel -= 2.0 * pi * ((rel + pi) / (2.0 * pi)).ceil() - 2.0 * pi;
    if rel <= -pi {
        rel += 2.0 * pi;
    }
    let sigma = (vs + vt).sqrt();
    let dw = ws - wt;
    Ok(BandPhaseFit {
        singlet: fs,
        triplet: ft,
        relative_phase: rel,
        relative_phase_uncertainty: sigma,
        displacement: rel / dw,
        displacement_uncertainty: sigma / dw.abs(),
    })
}

/// Forward model of the even-triplet splitting (Hz) against tilt `α_z`.
#[derive(Debug, Clone, Serialize)]
pub struct SplittingCurve {
    pub position: f64,
    pub tilts: Vec<f64>,
    pub splittings: Vec<f64>,
}

impl SplittingCurve {
    /// Evaluates [`triplet_splitting`] on a strictly increasing, non-negative
    /// tilt grid (in parallel, collected in order).
    pub fn compute(
        tilts: &[f64],
        membrane: &MembraneConfig,
        geom: &CavityGeometry,
        mode_set: &[ModeIndex],
        method: Method,
    ) -> Result<Self> {
        if tilts.len() < 2 || tilts[0] < 0.0 || tilts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("tilt grid must be non-negative, increasing, ≥ 2 points".into()));
        }
        let splittings = tilts
            .par_iter()
            .map(|&a| triplet_splitting(membrane.center_position, &membrane.with_tilt(membrane.tilt_y, a), geom, mode_set, method))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            position: membrane.center_position,
            tilts: tilts.to_vec(),
            splittings,
        })
    }

    // Interpolation runs in √splitting, which is close to linear in α.
    fn roots(&self) -> Vec<f64> {
        self.splittings.iter().map(|s| s.max(0.0).sqrt()).collect()
    }

    pub fn splitting(&self, tilt: f64) -> Result<f64> {
        let r = self.roots();
        let t = &self.tilts;
        if tilt < t[0] || tilt > t[t.len() - 1] {
            return Err(Error::InvalidArgument(format!("tilt {tilt:e} outside the curve")));
        }
        let i = t.partition_point(|&x| x <= tilt).clamp(1, t.len() - 1);
        let f = (tilt - t[i - 1]) / (t[i] - t[i - 1]);
        Ok((r[i - 1] + f * (r[i] - r[i - 1])).powi(2))
    }

    pub fn tilt(&self, splitting: f64) -> Result<f64> {
        let r = self.roots();
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Fit("splitting curve is not monotone in tilt".into()));
        }
        if !(splitting >= 0.0) {
            return Err(Error::InvalidArgument("splitting must be non-negative".into()));
        }
        let target = splitting.sqrt();
        if target < r[0] || target > r[r.len() - 1] {
            return Err(Error::InvalidArgument(format!("splitting {splitting:e} Hz outside the curve")));
        }
        let i = r.partition_point(|&x| x <= target).clamp(1, r.len() - 1);
        let f = (target - r[i - 1]) / (r[i] - r[i - 1]);
        Ok(self.tilts[i - 1] + f * (self.tilts[i] - self.tilts[i - 1]))
    }
}

/// Tilt (rad) that reproduces a measured triplet splitting (Hz) at the
/// membrane's position, from a 0-1 mrad forward curve with 81 points.
pub fn splitting_to_tilt(splitting: f64, membrane: &MembraneConfig, geom: &CavityGeometry, method: Method) -> Result<f64> {
    let tilts: Vec<f64> = (0..=80).map(|i| 1e-3 * i as f64 / 80.0).collect();
    let set = ModeIndex::singlet_triplet(geom.reference_longitudinal_index());
    SplittingCurve::compute(&tilts, membrane, geom, &set, method)?.tilt(splitting)
}

/// Tilt-stage calibration `α = √((a·q_z)² + α_y²)`.
#[derive(Debug, Clone, Serialize)]
pub struct TiltCalibration {
    /// mrad per µm of motor travel.
    pub conversion: f64,
    pub conversion_uncertainty: f64,
    /// Residual misalignment about the other axis, mrad.
    pub residual_tilt: f64,
    pub residual_tilt_uncertainty: f64,
    pub fit: FitResult,
}

impl TiltCalibration {
    pub fn tilt(&self, q: f64) -> f64 {
        calibration_model(&q, &self.fit.values())
    }
}

fn calibration_model(q: &f64, p: &[f64]) -> f64 {
    ((p[0] * q).powi(2) + p[1]).max(0.0).sqrt()
}

/// Conversion (mrad/µm) expected from a lever arm in metres.
pub fn lever_arm_conversion(lever_arm: f64) -> f64 {
    1e-6 / lever_arm * 1e3
}

/// Reference conversion from the 12.7 mm lever arm, mrad/µm.
pub const LEVER_ARM_REFERENCE: f64 = 0.0787;

/// Fits `(a, α_y)` to samples of motor travel `q_z` (µm) and measured tilt
/// `α` (mrad). The fit runs on `α_y²` so that data with `α_y = 0` keep a
/// finite uncertainty. Start: `a` from the endpoint slope, `α_y²` from the
/// smallest observed tilt.
pub fn fit_tilt_calibration(samples: &[Observation<f64>]) -> Result<TiltCalibration> {
    if samples.len() < 3 {
        return Err(Error::Fit("tilt calibration needs at least 3 samples".into()));
    }
    let far = samples
        .iter()
        .max_by(|a, b| a.input.abs().total_cmp(&b.input.abs()))
        .unwrap();
    let near = samples
        .iter()
        .min_by(|a, b| a.output.total_cmp(&b.output))
        .unwrap();
    if far.input == 0.0 {
        return Err(Error::Fit("motor positions are all zero".into()));
    }
    let s0 = near.output.powi(2);
    let a0 = ((far.output.powi(2) - s0).max(0.0).sqrt() / far.input.abs()).max(1e-12);
    let amax = samples.iter().map(|o| o.output.abs()).fold(0.0, f64::max);
    let specs = [
        ParameterSpec::new("conversion", "mrad/um", a0),
        ParameterSpec::new("residual_tilt_squared", "mrad^2", s0).with_scale((amax * amax / 10.0).max(f64::MIN_POSITIVE)),
    ];
    let fit = least_squares(calibration_model, samples, &specs)?;
    let a = fit.parameters[0].value.abs();
    let s = fit.parameters[1].value;
    let sigma_s = fit.parameters[1].uncertainty;
    Ok(TiltCalibration {
        conversion: a,
        conversion_uncertainty: fit.parameters[0].uncertainty,
        residual_tilt: s.max(0.0).sqrt(),
        residual_tilt_uncertainty: sqrt_uncertainty(s, sigma_s),
        fit,
    })
}

/// Fraction of trials whose estimate lies within `k` reported standard
/// deviations of the truth, per parameter.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub trials: usize,
    pub sigmas: f64,
    pub names: Vec<String>,
    pub coverage: Vec<f64>,
    /// Trials where the fit errored or did not converge.
    pub failures: usize,
}

/// Monte-Carlo coverage harness. Trial `i` draws from its own ChaCha stream
/// `(seed, i)`, so results do not depend on the worker count. `trial`
/// returns `(estimates, uncertainties)` aligned with `truth`.
pub fn monte_carlo_coverage<F>(trials: usize, seed: u64, sigmas: f64, names: &[&str], truth: &[f64], trial: F) -> CoverageReport
where
    F: Fn(&mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>, bool)> + Sync,
{
    let outcomes: Vec<Option<Vec<bool>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            match trial(&mut rng) {
                Ok((est, unc, true)) => Some(
                    est.iter()
                        .zip(&unc)
                        .zip(truth)
                        .map(|((e, u), t)| (e - t).abs() <= sigmas * u)
                        .collect(),
                ),
                _ => None,
            }
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let coverage = (0..truth.len())
        .map(|k| outcomes.iter().filter(|o| o.as_ref().is_some_and(|v| v[k])).count() as f64 / trials as f64)
        .collect();
    CoverageReport {
        trials,
        sigmas,
        names: names.iter().map(|s| s.to_string()).collect(),
        coverage,
        failures,
    }
}
