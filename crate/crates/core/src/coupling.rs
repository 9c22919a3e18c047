//! Membrane-induced coupling between near-degenerate cavity modes.
//!
//! Writing a perturbed mode as `ψ = Σ cᵢ φᵢ` over a near-degenerate set and
//! projecting the perturbed wave equation onto each `Re φᵢ` gives, to first
//! order, the symmetric eigenproblem
//!
//! ```text
//! (diag(g) − V) c = δ c,     κ = κ_ref (1 + δ),   κᵢ = κ_ref (1 + gᵢ)
//! ```
//!
//! with `Vᵢⱼ = ∫∫∫ Re φᵢ · V · Re φⱼ` and `gᵢ` the unperturbed Gouy offsets.
//! `δ` is a fractional change in `κ = ω²/c²`; the frequency shift is `δ/2`.
//!
//! Two routes to `Vᵢⱼ` are provided. [`vij_numeric`] integrates the exact
//! mode functions across the slab by brute force. [`vij_analytic`] uses the
//! near-waist mode form: the slab integral is expanded to second order in
//! the thickness, the cubic phase `(y²+z²)Δ_c` is linearized, and the
//! remaining Gaussian integrals reduce to the closed-form [`xi_integral`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::beam::{resonant_wavenumber, BeamFrame, CavityGeometry, ModeIndex};
use crate::error::{Error, Result};
use crate::hermite::{factorial, hermite, hermite_coefficients, poly_mul};
use crate::membrane::MembraneConfig;
use crate::quadrature::{GaussHermite, GaussLegendre};

/// Beyond this distance from the waist the analytic elements lose accuracy.
pub const NEAR_WAIST_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Brute-force quadrature with the exact mode functions.
    Numeric,
    /// Closed form with the linearized `(y²+z²)Δ_c` phase.
    Analytic,
    /// Closed form except for the fast-term transverse integral, which is done
    /// by Gauss-Hermite quadrature without linearizing.
    Unlinearized,
}

impl Method {
    /// Matrix element under this method.
    pub fn element(self, a: ModeIndex, b: ModeIndex, membrane: &MembraneConfig, geom: &CavityGeometry) -> Result<f64> {
        match self {
            Method::Numeric => vij_numeric(a, b, membrane, geom),
            Method::Analytic => Ok(vij_analytic(a, b, membrane, geom)),
            Method::Unlinearized => Ok(vij_analytic_unlinearized(a, b, membrane, geom)),
        }
    }
}

/// Dimensionless constants for one mode pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationContext {
    /// `P0 = (n²−1)(t/cos α) c_i c_j / (πL √(2^{Nᵢ+Nⱼ} mᵢ! nᵢ! mⱼ! nⱼ!))`.
    pub prefactor: f64,
    /// `Δt = t / (x_R cos α)`.
    pub thickness: f64,
    /// `Δ0 = x0 / x_R`.
    pub center: f64,
    pub beta_y: f64,
    pub beta_z: f64,
    /// `A = √(kⱼ/kᵢ)`, the Hermite-argument rescaling between the two modes.
    pub wavenumber_ratio: f64,
    /// `K = (kᵢ + kⱼ) x_R − (Nᵢ + Nⱼ + 2)`.
    pub phase_constant: f64,
    /// `K′ = Nⱼ − Nᵢ − (kⱼ − kᵢ) x_R`.
    pub slow_phase_constant: f64,
    /// `T = 1 − Δt² K² / 24`, or 1 in the thin limit.
    pub thickness_correction: f64,
}

impl PerturbationContext {
    pub fn new(a: ModeIndex, b: ModeIndex, membrane: &MembraneConfig, geom: &CavityGeometry) -> Self {
        let xr = geom.rayleigh_range();
        let ka = resonant_wavenumber(a, geom);
        let kb = resonant_wavenumber(b, geom);
        let wa2 = 2.0 * xr / ka;
        let wb2 = 2.0 * xr / kb;
        let s = 1.0 / wa2 + 1.0 / wb2;
        let width_product = 2.0 * (wa2 * wb2).sqrt() / (wa2 + wb2);
        let t_axial = membrane.axial_thickness();
        let facts = factorial(a.m as usize) * factorial(a.n as usize) * factorial(b.m as usize) * factorial(b.n as usize);
        let prefactor = membrane.contrast() * t_axial * width_product
            / (PI * geom.length() * (2f64.powi((a.order() + b.order()) as i32) * facts).sqrt());
        let phase_constant = (ka + kb) * xr - (a.order() + b.order() + 2) as f64;
        let thickness = t_axial / xr;
        let thickness_correction = if membrane.thin_limit {
            1.0
        } else {
            1.0 - thickness * thickness * phase_constant * phase_constant / 24.0
        };
        Self {
            prefactor,
            thickness,
            center: membrane.center_position / xr,
            beta_y: membrane.tilt_y / (xr * s.sqrt()),
            beta_z: membrane.tilt_z / (xr * s.sqrt()),
            wavenumber_ratio: (kb / ka).sqrt(),
            phase_constant,
            slow_phase_constant: b.order() as f64 - a.order() as f64 - (kb - ka) * xr,
            thickness_correction,
        }
    }
}

/// `ξ = ∫ (x − iβK/2)^q e^{-x²} H_{nᵢ}((x − iβK/2)/√A) H_{nⱼ}((x − iβK/2)√A) dx`.
///
/// The integrand is a polynomial in the shifted variable, so it is expanded
/// in monomials and each shifted Gaussian moment `M_k(s) = ∫(x+s)^k e^{-x²}`
/// follows from `M_{k+1} = s M_k + (k/2) M_{k−1}`.
pub fn xi_integral(n_i: u32, n_j: u32, q: u32, shift: f64, a: f64) -> Result<Complex64> {
    if q > 3 {
        return Err(Error::InvalidArgument(format!("ξ power q must be 0..=3, got {q}")));
    }
    Ok(xi_unchecked(n_i, n_j, q, shift, a))
}

fn xi_unchecked(n_i: u32, n_j: u32, q: u32, shift: f64, a: f64) -> Complex64 {
    let scale = |n: u32, c: f64| -> Vec<f64> {
        hermite_coefficients(n as usize)
            .into_iter()
            .enumerate()
            .map(|(p, v)| v * c.powi(p as i32))
            .collect()
    };
    let mut poly = vec![0.0; q as usize];
    poly.extend(poly_mul(&scale(n_i, 1.0 / a.sqrt()), &scale(n_j, a.sqrt())));
    let s = Complex64::new(0.0, -shift / 2.0);
    let mut prev = Complex64::new(PI.sqrt(), 0.0);
    let mut total = prev * poly[0];
    if poly.len() > 1 {
        let mut cur = s * PI.sqrt();
        total += cur * poly[1];
        for (k, &c) in poly.iter().enumerate().skip(2) {
            let next = s * cur + prev * ((k - 1) as f64 / 2.0);
            prev = cur;
            cur = next;
            total += cur * c;
        }
    }
    total
}

/// Whether the analytic form is applied outside its accuracy regime.
pub fn outside_near_waist(membrane: &MembraneConfig) -> bool {
    membrane.center_position.abs() > NEAR_WAIST_LIMIT
}

/// Closed-form near-waist `Vᵢⱼ`.
///
/// `Re[½∫φᵢφⱼV + ½∫φᵢφⱼ*V]`: the first term carries the fast phase `K`
/// and the thickness correction `T`; the second carries only the slow phase
/// `K′` and is evaluated without linearization.
pub fn vij_analytic(a: ModeIndex, b: ModeIndex, membrane: &MembraneConfig, geom: &CavityGeometry) -> f64 {
    let ctx = PerturbationContext::new(a, b, membrane, geom);
    let fast = fast_term_linearized(a, b, &ctx);
    slow_term(a, b, &ctx, fast)
}

/// As [`vij_analytic`] but with the fast-term transverse integral done by
/// quadrature instead of linearizing `e^{-i(y²+z²)Δ_c}`. Used to estimate the
/// linearization error.
pub fn vij_analytic_unlinearized(
    a: ModeIndex,
    b: ModeIndex,
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
) -> f64 {
    let ctx = PerturbationContext::new(a, b, membrane, geom);
    let fast = fast_term_quadrature(a, b, &ctx);
    slow_term(a, b, &ctx, fast)
}

fn slow_term(a: ModeIndex, b: ModeIndex, ctx: &PerturbationContext, fast: Complex64) -> f64 {
    let kp = ctx.slow_phase_constant;
    let gamma = xi_unchecked(a.m, b.m, 0, -kp * ctx.beta_y, ctx.wavenumber_ratio)
        * xi_unchecked(a.n, b.n, 0, -kp * ctx.beta_z, ctx.wavenumber_ratio);
    let phase = kp * ctx.center - (a.l as f64 - b.l as f64) * PI / 2.0;
    let damping = (-kp * kp * (ctx.beta_y.powi(2) + ctx.beta_z.powi(2)) / 4.0).exp();
    let slow = gamma * Complex64::from_polar(ctx.prefactor * damping, phase);
    fast.re + slow.re
}

fn fast_term_linearized(a: ModeIndex, b: ModeIndex, ctx: &PerturbationContext) -> Complex64 {
    let k = ctx.phase_constant;
    let xi_y = |q: u32| xi_unchecked(a.m, b.m, q, ctx.beta_y * k, ctx.wavenumber_ratio);
    let xi_z = |p: u32| xi_unchecked(a.n, b.n, p, ctx.beta_z * k, ctx.wavenumber_ratio);
    let (y0, y1, y2, y3) = (xi_y(0), xi_y(1), xi_y(2), xi_y(3));
    let (z0, z1, z2, z3) = (xi_z(0), xi_z(1), xi_z(2), xi_z(3));
    let i = Complex64::i();
    let bracket = y0 * z0
        - i * ((y2 * z0 + y0 * z2) * ctx.center + (y3 * z0 + y1 * z2) * ctx.beta_y + (y2 * z1 + y0 * z3) * ctx.beta_z);
    let phase = -k * ctx.center - (a.l + b.l) as f64 * PI / 2.0;
    let damping = (-k * k * (ctx.beta_y.powi(2) + ctx.beta_z.powi(2)) / 4.0).exp();
    bracket * Complex64::from_polar(ctx.prefactor * ctx.thickness_correction * damping, phase)
}

fn fast_term_quadrature(a: ModeIndex, b: ModeIndex, ctx: &PerturbationContext) -> Complex64 {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    let gh = RULE.get_or_init(|| GaussHermite::new(48));
    let k = ctx.phase_constant;
    let (ci, cj) = (1.0 / ctx.wavenumber_ratio.sqrt(), ctx.wavenumber_ratio.sqrt());
    let mut acc = Complex64::new(0.0, 0.0);
    for (&u, &wu) in gh.nodes.iter().zip(&gh.weights) {
        let py = hermite(a.m as usize, ci * u) * hermite(b.m as usize, cj * u);
        for (&v, &wv) in gh.nodes.iter().zip(&gh.weights) {
            let pz = hermite(a.n as usize, ci * v) * hermite(b.n as usize, cj * v);
            let dc = ctx.center + ctx.beta_y * u + ctx.beta_z * v;
            let phase = -(k + u * u + v * v) * dc;
            acc += Complex64::from_polar(py * pz * wu * wv, phase);
        }
    }
    acc * Complex64::from_polar(
        ctx.prefactor * ctx.thickness_correction,
        -((a.l + b.l) as f64) * PI / 2.0,
    )
}

/// Aligned-membrane shorthand for the singlet–even-triplet coupling,
/// `V_sy = V_sz ≈ (−1)^{l_s} Δ0 (n²−1)t/(√2 L) · T cos[((k_s+k_y)x_R − 4)Δ0]`.
pub fn interaction_shorthand(center: f64, geom: &CavityGeometry, membrane: &MembraneConfig) -> Result<f64> {
    if membrane.tilt() != 0.0 {
        return Err(Error::Membrane(
            "the aligned-membrane shorthand requires zero tilt".into(),
        ));
    }
    let l = geom.reference_longitudinal_index();
    let set = ModeIndex::singlet_triplet(l);
    let xr = geom.rayleigh_range();
    let ks = resonant_wavenumber(set[0], geom);
    let ky = resonant_wavenumber(set[1], geom);
    let k = (ks + ky) * xr - 4.0;
    let ctx = PerturbationContext::new(set[0], set[1], membrane, geom);
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign
        * center
        * membrane.sheet_weight()
        / (2f64.sqrt() * geom.length())
        * ctx.thickness_correction
        * (k * center).cos())
}

/// Resolution for the brute-force matrix elements.
#[derive(Debug, Clone, Copy)]
pub struct NumericOptions {
    /// Gauss-Hermite order per transverse axis; a second pass at
    /// `transverse_nodes + 16` provides the error estimate.
    pub transverse_nodes: usize,
    /// Gauss-Legendre nodes across the slab.
    pub slab_nodes: usize,
    /// Accepted discrepancy between the two passes, relative to `(n²−1)t/L`.
    pub tolerance: f64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            transverse_nodes: 40,
            slab_nodes: 64,
            tolerance: 1e-7,
        }
    }
}

/// Brute-force `∫∫∫ Re φᵢ · V · Re φⱼ` with the exact mode functions.
pub fn vij_numeric(a: ModeIndex, b: ModeIndex, membrane: &MembraneConfig, geom: &CavityGeometry) -> Result<f64> {
    vij_numeric_with(a, b, membrane, geom, NumericOptions::default())
}

pub fn vij_numeric_with(
    a: ModeIndex,
    b: ModeIndex,
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
    opts: NumericOptions,
) -> Result<f64> {
    let coarse = numeric_pass(a, b, membrane, geom, opts.transverse_nodes, opts.slab_nodes);
    let fine = numeric_pass(a, b, membrane, geom, opts.transverse_nodes + 16, opts.slab_nodes);
    let scale = membrane.sheet_weight().abs().max(f64::MIN_POSITIVE) / geom.length();
    let achieved = (fine - coarse).abs();
    if achieved > opts.tolerance * scale {
        return Err(Error::Quadrature {
            estimate: fine,
            achieved,
            requested: opts.tolerance * scale,
        });
    }
    Ok(fine)
}

struct ModeEval {
    mode: ModeIndex,
    k: f64,
}

impl ModeEval {
    // Re φ with its Gaussian factor split off: (amplitude·cos θ, −ρ²/w²).
    fn split(&self, x: f64, y: f64, z: f64, geom: &CavityGeometry) -> (f64, f64) {
        let f = BeamFrame::exact(x, self.k, geom.rayleigh_range());
        let w = f.width;
        let norm2 = PI
            * geom.length()
            * 2f64.powi(self.mode.order() as i32 - 2)
            * factorial(self.mode.m as usize)
            * factorial(self.mode.n as usize);
        let amp = hermite(self.mode.m as usize, 2f64.sqrt() * y / w)
            * hermite(self.mode.n as usize, 2f64.sqrt() * z / w)
            / (w * norm2.sqrt());
        let rho2 = y * y + z * z;
        let theta = (self.mode.order() as f64 + 1.0) * f.gouy
            - self.k * rho2 * f.inv_roc / 2.0
            - self.k * x
            - self.mode.l as f64 * PI / 2.0;
        (amp * theta.cos(), -rho2 / (w * w))
    }
}

fn numeric_pass(
    a: ModeIndex,
    b: ModeIndex,
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
    transverse_nodes: usize,
    slab_nodes: usize,
) -> f64 {
    let gh = GaussHermite::new(transverse_nodes);
    let gl = GaussLegendre::new(slab_nodes);
    let ea = ModeEval {
        mode: a,
        k: resonant_wavenumber(a, geom),
    };
    let eb = ModeEval {
        mode: b,
        k: resonant_wavenumber(b, geom),
    };
    let xr = geom.rayleigh_range();
    let x0 = membrane.center_position;
    let wa = BeamFrame::exact(x0, ea.k, xr).width;
    let wb = BeamFrame::exact(x0, eb.k, xr).width;
    let scale = 1.0 / (1.0 / (wa * wa) + 1.0 / (wb * wb)).sqrt();
    let half = membrane.axial_thickness() / 2.0;
    let product = |x: f64, y: f64, z: f64, uv2: f64| -> f64 {
        let (fa, ga) = ea.split(x, y, z, geom);
        let (fb, gb) = eb.split(x, y, z, geom);
        fa * fb * (ga + gb + uv2).exp()
    };
    let mut total = 0.0;
    for (&u, &wu) in gh.nodes.iter().zip(&gh.weights) {
        let y = u * scale;
        for (&v, &wv) in gh.nodes.iter().zip(&gh.weights) {
            let z = v * scale;
            let xc = membrane.local_center(y, z);
            let uv2 = u * u + v * v;
            let slab = if membrane.thin_limit {
                product(xc, y, z, uv2) * membrane.axial_thickness()
            } else {
                gl.integrate(xc - half, xc + half, |x| product(x, y, z, uv2))
            };
            total += wu * wv * slab;
        }
    }
    total * scale * scale * membrane.contrast()
}

/// Symmetric coupling matrix over an ordered mode set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingMatrix {
    pub mode_set: Vec<ModeIndex>,
    /// `Vᵢⱼ`, row-major, symmetric.
    pub elements: Vec<Vec<f64>>,
    /// `gᵢ` relative to the first mode of the set.
    pub guoy_offsets: Vec<f64>,
}

impl CouplingMatrix {
    pub fn len(&self) -> usize {
        self.mode_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mode_set.is_empty()
    }

    /// `diag(g) − V`, whose eigenvalues are the fractional detunings `δ`.
    pub fn operator(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { self.guoy_offsets[i] } else { 0.0 };
            d - self.elements[i][j]
        })
    }
}

fn check_mode_set(mode_set: &[ModeIndex], geom: &CavityGeometry) -> Result<()> {
    if mode_set.len() < 2 {
        return Err(Error::ModeSet("need at least two modes".into()));
    }
    let k0 = resonant_wavenumber(mode_set[0], geom);
    for &m in mode_set {
        let spread = (resonant_wavenumber(m, geom) - k0).abs() * geom.length() / PI;
        if spread >= 1.0 {
            return Err(Error::ModeSet(format!(
                "mode {m} sits {spread:.3} free spectral ranges from {}",
                mode_set[0]
            )));
        }
    }
    for (i, a) in mode_set.iter().enumerate() {
        if mode_set[..i].contains(a) {
            return Err(Error::ModeSet(format!("duplicate mode {a}")));
        }
    }
    Ok(())
}

/// Builds `V` and the Gouy offsets. Elements are computed independently per
/// `(i, j ≥ i)` pair and mirrored; the quadrature-based methods run the pairs
/// in parallel.
pub fn assemble_matrix(
    mode_set: &[ModeIndex],
    membrane: &MembraneConfig,
    geom: &CavityGeometry,
    method: Method,
) -> Result<CouplingMatrix> {
    check_mode_set(mode_set, geom)?;
    membrane.validate()?;
    let n = mode_set.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = match method {
        Method::Analytic => pairs
            .iter()
            .map(|&(i, j)| vij_analytic(mode_set[i], mode_set[j], membrane, geom))
            .collect(),
        _ => pairs
            .par_iter()
            .map(|&(i, j)| method.element(mode_set[i], mode_set[j], membrane, geom))
            .collect::<Result<Vec<_>>>()?,
    };
    let mut elements = vec![vec![0.0; n]; n];
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        elements[i][j] = v;
        elements[j][i] = v;
    }
    let guoy_offsets = mode_set
        .iter()
        .map(|&m| crate::beam::fractional_splitting(mode_set[0], m, geom))
        .collect();
    Ok(CouplingMatrix {
        mode_set: mode_set.to_vec(),
        elements,
        guoy_offsets,
    })
}

/// Eigen-solution of the first-order problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningSolution {
    /// Fractional detunings `δ` of `κ`, ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` holds the coefficients of band `k` over the mode set,
    /// unit norm, largest-magnitude coefficient positive.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl DetuningSolution {
    /// Frequency shifts `Δω/ω0 = δ/2`.
    pub fn frequency_shifts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|d| d / 2.0).collect()
    }
}

pub fn solve_detunings(matrix: &CouplingMatrix) -> DetuningSolution {
    solve_symmetric(&matrix.operator())
}

pub(crate) fn solve_symmetric(op: &DMatrix<f64>) -> DetuningSolution {
    let eig = nalgebra::SymmetricEigen::new(op.clone());
    let mut order: Vec<usize> = (0..op.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = v
                .iter()
                .enumerate()
                .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    DetuningSolution {
        eigenvalues,
        eigenvectors,
    }
}
