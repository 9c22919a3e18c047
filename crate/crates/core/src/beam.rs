//! Empty-cavity optics: Hermite-Gaussian standing-wave modes of a symmetric
//! two-mirror cavity with its waist at the origin and axis along `x`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hermite::{factorial, hermite};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Symmetric cavity geometry. All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    length: f64,
    mirror_roc: f64,
    rayleigh_range: f64,
    waist: f64,
    wavelength: f64,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        Self::new(6.7e-2, 5e-2, 2.351e-2, 89.2e-6, None).expect("default geometry is valid")
    }
}

impl CavityGeometry {
    /// Relative tolerance on `w0² = λ x_R / π`.
    pub const PARAXIAL_TOLERANCE: f64 = 1e-6;

    /// Builds a geometry. When `wavelength` is omitted it is derived from the
    /// waist and Rayleigh range.
    pub fn new(
        length: f64,
        mirror_roc: f64,
        rayleigh_range: f64,
        waist: f64,
        wavelength: Option<f64>,
    ) -> Result<Self> {
        for (name, v) in [
            ("length", length),
            ("mirror_roc", mirror_roc),
            ("rayleigh_range", rayleigh_range),
            ("waist", waist),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        if length / 2.0 >= mirror_roc {
            return Err(Error::Geometry(format!(
                "unstable cavity: L/2 = {} must be below the mirror radius {}",
                length / 2.0,
                mirror_roc
            )));
        }
        let derived = PI * waist * waist / rayleigh_range;
        let wavelength = wavelength.unwrap_or(derived);
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::Geometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        let mismatch = (wavelength * rayleigh_range / PI - waist * waist).abs() / (waist * waist);
        if mismatch > Self::PARAXIAL_TOLERANCE {
            return Err(Error::Geometry(format!(
                "paraxial inconsistency: w0² = {:e} but λ·x_R/π = {:e}",
                waist * waist,
                wavelength * rayleigh_range / PI
            )));
        }
        Ok(Self {
            length,
            mirror_roc,
            rayleigh_range,
            waist,
            wavelength,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn mirror_roc(&self) -> f64 {
        self.mirror_roc
    }
    pub fn rayleigh_range(&self) -> f64 {
        self.rayleigh_range
    }
    pub fn waist(&self) -> f64 {
        self.waist
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn reference_wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
    /// Angular optical frequency `ω0 = c k`.
    pub fn reference_frequency(&self) -> f64 {
        SPEED_OF_LIGHT * self.reference_wavenumber()
    }
    /// Optical frequency in Hz.
    pub fn optical_frequency_hz(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength
    }
    /// Free spectral range as a fraction of the optical frequency, `λ/2L`.
    pub fn fsr_fraction(&self) -> f64 {
        self.wavelength / (2.0 * self.length)
    }
    pub fn fsr_hz(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.length)
    }
    /// Gouy phase at one mirror, `atan(L / 2x_R)`.
    pub fn mirror_gouy(&self) -> f64 {
        (self.length / (2.0 * self.rayleigh_range)).atan()
    }

    /// Longitudinal index of the TEM00 mode closest to the reference
    /// wavelength, restricted to odd `l` so the singlet has a node at the waist.
    pub fn reference_longitudinal_index(&self) -> u32 {
        let q = (self.reference_wavenumber() * self.length - 2.0 * self.mirror_gouy()) / PI - 1.0;
        let mut l = q.round() as i64;
        if l % 2 == 0 {
            l += if q > l as f64 { 1 } else { -1 };
        }
        l.max(1) as u32
    }
}

/// Mode label: longitudinal `l`, transverse `m` (along `y`) and `n` (along `z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub l: u32,
    pub m: u32,
    pub n: u32,
}

impl ModeIndex {
    pub fn new(l: u32, m: u32, n: u32) -> Self {
        Self { l, m, n }
    }

    /// Transverse order `m + n`; a manifold holds `m + n + 1` modes.
    pub fn order(&self) -> u32 {
        self.m + self.n
    }

    /// The TEM00 mode at `l` and the three order-2 modes at `l - 1`, in the
    /// order singlet, (2,0), (1,1), (0,2).
    pub fn singlet_triplet(l: u32) -> Vec<ModeIndex> {
        assert!(l >= 1, "triplet needs l >= 1");
        vec![
            ModeIndex::new(l, 0, 0),
            ModeIndex::new(l - 1, 2, 0),
            ModeIndex::new(l - 1, 1, 1),
            ModeIndex::new(l - 1, 0, 2),
        ]
    }

    /// All modes of a transverse manifold at one longitudinal index.
    pub fn manifold(l: u32, order: u32) -> Vec<ModeIndex> {
        (0..=order).rev().map(|m| ModeIndex::new(l, m, order - m)).collect()
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.l, self.m, self.n)
    }
}

/// Local beam parameters at axial position `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamFrame {
    pub width: f64,
    /// Wavefront curvature `1/R`; zero at the waist.
    pub inv_roc: f64,
    pub gouy: f64,
    pub scaled_position: f64,
}

impl BeamFrame {
    /// Exact frame for wavenumber `k`.
    pub fn exact(x: f64, k: f64, rayleigh_range: f64) -> Self {
        let xr = rayleigh_range;
        Self {
            width: (2.0 * (x * x + xr * xr) / (k * xr)).sqrt(),
            inv_roc: x / (x * x + xr * xr),
            gouy: (x / xr).atan(),
            scaled_position: x / xr,
        }
    }

    /// Second-order expansion about the waist in `Δ = x/x_R`.
    pub fn near_waist(x: f64, k: f64, rayleigh_range: f64) -> Self {
        let d = x / rayleigh_range;
        let w0 = (2.0 * rayleigh_range / k).sqrt();
        Self {
            width: w0 * (1.0 + 0.5 * d * d),
            inv_roc: d / rayleigh_range,
            gouy: d,
            scaled_position: d,
        }
    }

    /// Radius of curvature, infinite at the waist.
    pub fn roc(&self) -> f64 {
        if self.inv_roc == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.inv_roc
        }
    }
}

/// Frame at `x` for the reference wavenumber of `geom`.
pub fn beam_frame(x: f64, geom: &CavityGeometry) -> BeamFrame {
    BeamFrame::exact(x, geom.reference_wavenumber(), geom.rayleigh_range())
}

/// Near-waist frame at `x` for the reference wavenumber of `geom`.
pub fn beam_frame_near_waist(x: f64, geom: &CavityGeometry) -> BeamFrame {
    BeamFrame::near_waist(x, geom.reference_wavenumber(), geom.rayleigh_range())
}

/// Resonant wavenumber from `kL = (l+1)π + 2(m+n+1)·atan(L/2x_R)`: the
/// round-trip phase including the Gouy phase accumulated mirror to mirror.
/// With the `e^{-ilπ/2}` convention of the mode functions this puts a field
/// node on both mirrors.
pub fn resonant_wavenumber(mode: ModeIndex, geom: &CavityGeometry) -> f64 {
    let phase = (mode.l as f64 + 1.0) * PI + 2.0 * (mode.order() as f64 + 1.0) * geom.mirror_gouy();
    phase / geom.length()
}

/// Fractional splitting `g` with `κ_b = κ_a (1 + g)`, `κ = k²`.
pub fn fractional_splitting(a: ModeIndex, b: ModeIndex, geom: &CavityGeometry) -> f64 {
    let ka = resonant_wavenumber(a, geom);
    let kb = resonant_wavenumber(b, geom);
    let r = kb / ka;
    (r - 1.0) * (r + 1.0)
}

fn normalization(mode: ModeIndex, width: f64, length: f64) -> f64 {
    let norm2 = PI
        * length
        * 2f64.powi(mode.order() as i32 - 2)
        * factorial(mode.m as usize)
        * factorial(mode.n as usize);
    1.0 / (width * norm2.sqrt())
}

/// Transverse profile and phase pieces shared by both field forms.
fn field_from_frame(mode: ModeIndex, y: f64, z: f64, k: f64, x: f64, frame: &BeamFrame, length: f64) -> Complex64 {
    let w = frame.width;
    let amp = normalization(mode, w, length)
        * hermite(mode.m as usize, 2f64.sqrt() * y / w)
        * hermite(mode.n as usize, 2f64.sqrt() * z / w)
        * (-(y * y + z * z) / (w * w)).exp();
    let phase = (mode.order() as f64 + 1.0) * frame.gouy
        - k * (y * y + z * z) * frame.inv_roc / 2.0
        - k * x
        - mode.l as f64 * PI / 2.0;
    Complex64::from_polar(amp, phase)
}

/// Complex mode function. `Re φ` is the standing-wave field, normalized so
/// that `∫∫∫ Re φᵢ Re φⱼ = δᵢⱼ` over the cavity.
pub fn mode_field_exact(mode: ModeIndex, point: [f64; 3], geom: &CavityGeometry) -> Complex64 {
    let k = resonant_wavenumber(mode, geom);
    let [x, y, z] = point;
    let frame = BeamFrame::exact(x, k, geom.rayleigh_range());
    field_from_frame(mode, y, z, k, x, &frame, geom.length())
}

/// Near-waist form with phase `(m+n+1 − ρ²/w² − k x_R)Δ − lπ/2`.
pub fn mode_field_waist_approx(mode: ModeIndex, point: [f64; 3], geom: &CavityGeometry) -> Complex64 {
    let k = resonant_wavenumber(mode, geom);
    let [x, y, z] = point;
    let xr = geom.rayleigh_range();
    let frame = BeamFrame::near_waist(x, k, xr);
    let w = frame.width;
    let d = frame.scaled_position;
    let amp = normalization(mode, w, geom.length())
        * hermite(mode.m as usize, 2f64.sqrt() * y / w)
        * hermite(mode.n as usize, 2f64.sqrt() * z / w)
        * (-(y * y + z * z) / (w * w)).exp();
    let phase = (mode.order() as f64 + 1.0 - (y * y + z * z) / (w * w) - k * xr) * d
        - mode.l as f64 * PI / 2.0;
    Complex64::from_polar(amp, phase)
}

/// Peak transverse amplitude of `mode` at the waist, used to express field
/// differences relative to the mode's own scale.
pub fn peak_amplitude(mode: ModeIndex, geom: &CavityGeometry) -> f64 {
    let k = resonant_wavenumber(mode, geom);
    let w0 = (2.0 * geom.rayleigh_range() / k).sqrt();
    let peak = |order: u32| {
        // max |H_n(u) e^{-u²/2}| over a fine grid.
        (0..4000)
            .map(|i| {
                let u = i as f64 * 2.5e-3;
                (hermite(order as usize, u) * (-u * u / 2.0).exp()).abs()
            })
            .fold(0.0, f64::max)
    };
    normalization(mode, w0, geom.length()) * peak(mode.m) * peak(mode.n)
}

/// Options for [`real_inner_product`].
#[derive(Debug, Clone, Copy)]
pub struct InnerProductOptions {
    /// Gauss-Hermite order per transverse axis.
    pub transverse_nodes: usize,
    /// Number of longitudinal panels over `[-L/2, L/2]`.
    pub panels: usize,
    /// Gauss-Legendre nodes per panel.
    pub nodes_per_panel: usize,
}

impl Default for InnerProductOptions {
    fn default() -> Self {
        Self {
            transverse_nodes: 48,
            panels: 256,
            nodes_per_panel: 12,
        }
    }
}

/// `∫∫∫ Re φᵢ Re φⱼ` over the cavity volume between the mirror planes.
///
/// Uses `Re φᵢ Re φⱼ = ½Re(φᵢφⱼ) + ½Re(φᵢφⱼ*)`. Each product is a slowly
/// varying envelope times a carrier `e^{-i(kᵢ±kⱼ)x}`; the transverse integral
/// of the envelope is done with Gauss-Hermite nodes scaled to the local
/// width (it factorizes in `y` and `z`), the axial integral with a Filon rule
/// that integrates the carrier exactly.
pub fn real_inner_product(
    a: ModeIndex,
    b: ModeIndex,
    geom: &CavityGeometry,
    opts: InnerProductOptions,
) -> f64 {
    let gh = crate::quadrature::GaussHermite::new(opts.transverse_nodes);
    let ka = resonant_wavenumber(a, geom);
    let kb = resonant_wavenumber(b, geom);
    let xr = geom.rayleigh_range();
    let half = geom.length() / 2.0;

    // Envelope of φa·φb (conj=false) or φa·φb* (conj=true) at x, transverse-integrated.
    let envelope = |x: f64, conj: bool| -> Complex64 {
        let fa = BeamFrame::exact(x, ka, xr);
        let fb = BeamFrame::exact(x, kb, xr);
        let sign = if conj { -1.0 } else { 1.0 };
        // Scale nodes to the mean Gaussian width of the product.
        let s = 1.0 / (fa.width * fa.width) + 1.0 / (fb.width * fb.width);
        let scale = 1.0 / s.sqrt();
        let curv = (ka * fa.inv_roc + sign * kb * fb.inv_roc) / 2.0;
        let axis = |ia: u32, ib: u32| -> Complex64 {
            gh.integrate(|u| {
                let y = u * scale;
                let val = hermite(ia as usize, 2f64.sqrt() * y / fa.width)
                    * hermite(ib as usize, 2f64.sqrt() * y / fb.width);
                Complex64::from_polar(val, -curv * y * y)
            }) * scale
        };
        let transverse = axis(a.m, b.m) * axis(a.n, b.n);
        let norm = normalization(a, fa.width, geom.length()) * normalization(b, fb.width, geom.length());
        let phase = (a.order() as f64 + 1.0) * fa.gouy + sign * (b.order() as f64 + 1.0) * fb.gouy
            - (a.l as f64 + sign * b.l as f64) * PI / 2.0;
        transverse * Complex64::from_polar(norm, phase)
    };
    let plus = crate::quadrature::oscillatory_integral(
        &|x| envelope(x, false),
        ka + kb,
        -half,
        half,
        opts.panels,
        opts.nodes_per_panel,
    );
    let minus = crate::quadrature::oscillatory_integral(
        &|x| envelope(x, true),
        ka - kb,
        -half,
        half,
        opts.panels,
        opts.nodes_per_panel,
    );
    0.5 * (plus.re + minus.re)
}
