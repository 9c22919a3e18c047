//! Quadrature rules used by the numerical oracles.
//!
//! Gauss-Hermite and Gauss-Legendre nodes come from Newton iteration on the
//! orthonormal recurrences, seeded with the usual asymptotic guesses. The
//! adaptive Gauss-Kronrod integrator bisects the worst interval until the
//! summed error estimate meets the tolerance. `oscillatory_integral` is a
//! Filon-type rule for `∫ f(x) e^{-iωx} dx` with slowly varying `f`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ wᵢ f(xᵢ)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (p1, dp) = orthonormal_hermite(n, z, pim4);
                pp = dp;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    let (_, dp) = orthonormal_hermite(n, z, pim4);
                    pp = dp;
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        // Ascending order.
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    /// `∫ f(x) e^{-x²} dx`.
    pub fn integrate<T, F>(&self, f: F) -> T
    where
        F: Fn(f64) -> T,
        T: std::ops::Mul<f64, Output = T> + std::iter::Sum,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }
}

// Returns (p_n(z), p_n'(z)) for the orthonormal Hermite polynomials.
fn orthonormal_hermite(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = (j + 1) as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - (j as f64 / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 1.0;
            for _ in 0..100 {
                let (p1, dp) = legendre(n, z);
                pp = dp;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-16 {
                    pp = legendre(n, z).1;
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `∫_a^b f(x) dx`.
    pub fn integrate<T, F>(&self, a: f64, b: f64, f: F) -> T
    where
        F: Fn(f64) -> T,
        T: std::ops::Mul<f64, Output = T> + std::iter::Sum,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(mid + half * x) * (w * half))
            .sum()
    }
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p2) / (z * z - 1.0))
}

const GK_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = h * GK_XK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * GK_WK[j];
        if j % 2 == 1 {
            gauss += s * GK_WG[j / 2];
        }
    }
    ((kron * h), ((kron - gauss) * h).norm())
}

/// Adaptive 15-point Gauss-Kronrod for complex-valued integrands.
pub fn adaptive_complex(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(Complex64, f64)> {
    let (v, e) = gk15(f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: Complex64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok((total, err));
        }
        if intervals.len() >= max_intervals {
            return Err(Error::Quadrature {
                estimate: total.norm(),
                achieved: err,
                requested: abs_tol.max(rel_tol * total.norm()),
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Adaptive 15-point Gauss-Kronrod for real integrands.
pub fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64)> {
    let g = |x: f64| Complex64::new(f(x), 0.0);
    adaptive_complex(&g, a, b, abs_tol, rel_tol, max_intervals).map(|(v, e)| (v.re, e))
}

/// Filon-type rule for `∫_a^b f(x) e^{-iωx} dx` where `f` is smooth on the
/// scale of a panel. `f` is interpolated on `nodes_per_panel` Gauss-Legendre
/// nodes per panel and the oscillatory moments are integrated exactly.
pub fn oscillatory_integral(
    f: &dyn Fn(f64) -> Complex64,
    omega: f64,
    a: f64,
    b: f64,
    panels: usize,
    nodes_per_panel: usize,
) -> Complex64 {
    let gl = GaussLegendre::new(nodes_per_panel);
    let p = nodes_per_panel;
    // Monomial coefficients of the Lagrange basis on the reference nodes.
    let vander = nalgebra::DMatrix::from_fn(p, p, |i, j| gl.nodes[i].powi(j as i32));
    let inv = vander
        .try_inverse()
        .expect("Vandermonde matrix on Gauss nodes is invertible");
    let h = (b - a) / panels as f64;
    let big_omega = 0.5 * omega * h;
    let moments = oscillatory_moments(big_omega, p);
    // Lagrange weights: w_j = Σ_k inv[k, j] μ_k.
    let weights: Vec<Complex64> = (0..p)
        .map(|j| (0..p).map(|k| moments[k] * inv[(k, j)]).sum())
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for panel in 0..panels {
        let lo = a + panel as f64 * h;
        let mid = lo + 0.5 * h;
        let carrier = Complex64::from_polar(1.0, -omega * mid);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &s) in gl.nodes.iter().enumerate() {
            acc += f(mid + 0.5 * h * s) * weights[j];
        }
        total += acc * carrier * (0.5 * h);
    }
    total
}

// μ_k = ∫_{-1}^{1} s^k e^{-iΩs} ds for k < count.
fn oscillatory_moments(big_omega: f64, count: usize) -> Vec<Complex64> {
    if big_omega.abs() <= 2.0 * count as f64 {
        let gl = GaussLegendre::new(count + 40);
        return (0..count)
            .map(|k| {
                gl.integrate(-1.0, 1.0, |s| {
                    Complex64::from_polar(s.powi(k as i32), -big_omega * s)
                })
            })
            .collect();
    }
    // Upward recurrence by parts, stable for |Ω| > k.
    let e_plus = Complex64::from_polar(1.0, -big_omega);
    let e_minus = Complex64::from_polar(1.0, big_omega);
    let i_omega = Complex64::new(0.0, big_omega);
    let mut out = Vec::with_capacity(count);
    out.push((e_minus - e_plus) / i_omega);
    for k in 1..count {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let boundary = (e_plus - e_minus * sign) / (-i_omega);
        let next = boundary + out[k - 1] * (k as f64) / i_omega;
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let gh = GaussHermite::new(20);
        let m0: f64 = gh.integrate(|_| 1.0);
        let m2: f64 = gh.integrate(|x| x * x);
        let m8: f64 = gh.integrate(|x| x.powi(8));
        assert!((m0 - PI.sqrt()).abs() < 1e-13);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((m8 - 105.0 / 16.0 * PI.sqrt()).abs() < 1e-11);
        assert!(gh.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let v: f64 = gl.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let (v, _) = adaptive(&f, -1.0, 1.0, 1e-12, 1e-12, 2000).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let f = |x: f64| (1.0 / x).sin();
        let r = adaptive(&f, 1e-9, 1.0, 1e-15, 1e-15, 8);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn filon_matches_closed_form() {
        // ∫_0^1 x e^{-iωx} dx for a large ω.
        let omega = 4.0e4;
        let f = |x: f64| Complex64::new(x, 0.0);
        let v = oscillatory_integral(&f, omega, 0.0, 1.0, 7, 6);
        let i = Complex64::i();
        let e = Complex64::from_polar(1.0, -omega);
        let exact = e * i / omega + (e - 1.0) / (omega * omega);
        assert!((v - exact).norm() < 1e-14, "{v} vs {exact}");
        // And a small ω where the moments come from direct quadrature.
        let g = |x: f64| Complex64::new((2.0 * x).cos(), 0.0);
        let v = oscillatory_integral(&g, 1.5, -1.0, 2.0, 4, 12);
        let ref_ = GaussLegendre::new(60)
            .integrate(-1.0, 2.0, |x| Complex64::from_polar((2.0 * x).cos(), -1.5 * x));
        assert!((v - ref_).norm() < 1e-13);
    }
}
