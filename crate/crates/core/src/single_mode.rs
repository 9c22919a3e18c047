//! One-dimensional membrane-in-the-middle cavity.
//!
//! Two ideal mirrors at `±L/2` with a lossless scatterer at `x` (measured
//! from the cavity center). For a symmetric scatterer with center-referenced
//! field reflectivity `r = |r| e^{iφ}` the resonances satisfy
//!
//! ```text
//! cos(kL + φ) = −|r| cos(2kx)
//! ```
//!
//! so the detuning repeats every `λ/2` of membrane travel. A dielectric slab
//! is handled independently by propagating `(E, E′/k)` through the three
//! regions and requiring `E = 0` at the far mirror.
//!
//! Wavenumbers are carried as `k = k_m + q`, where `k_m = mπ/L` is the empty
//! cavity resonance with even `m` nearest `2π/λ`; `k_m L/2` is then a whole
//! number of quarter turns and the small `q` keeps full precision.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::beam::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Reflector {
    /// Lossless scatterer of fixed center-referenced field reflectivity.
    Mirror { magnitude: f64, phase: f64 },
    Slab { refractive_index: f64, thickness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleModeCavity {
    pub length: f64,
    pub wavelength: f64,
    pub reflector: Reflector,
}

impl SingleModeCavity {
    pub fn slab(length: f64, wavelength: f64, refractive_index: f64, thickness: f64) -> Self {
        Self {
            length,
            wavelength,
            reflector: Reflector::Slab {
                refractive_index,
                thickness,
            },
        }
    }

    /// Mirror model with the thin-slab phase `φ = π/2`.
    pub fn mirror(length: f64, wavelength: f64, power_reflectivity: f64) -> Self {
        Self {
            length,
            wavelength,
            reflector: Reflector::Mirror {
                magnitude: power_reflectivity.max(0.0).sqrt(),
                phase: FRAC_PI_2,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.wavelength > 0.0 && self.wavelength < self.length) {
            return Err(Error::Geometry("single-mode cavity needs 0 < λ < L".into()));
        }
        match self.reflector {
            Reflector::Mirror { magnitude, phase } => {
                if !(0.0..1.0).contains(&magnitude) || !phase.is_finite() {
                    return Err(Error::Membrane(format!("mirror |r| = {magnitude} outside [0, 1)")));
                }
            }
            Reflector::Slab {
                refractive_index,
                thickness,
            } => {
                if !(refractive_index >= 1.0) || !(thickness >= 0.0) {
                    return Err(Error::Membrane("slab needs n ≥ 1 and t ≥ 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Even mode number `m` of the reference empty-cavity resonance.
    pub fn reference_order(&self) -> u64 {
        let m = (2.0 * self.length / self.wavelength).round() as u64;
        m + (m % 2)
    }

    pub fn reference_wavenumber(&self) -> f64 {
        self.reference_order() as f64 * PI / self.length
    }

    /// Center-referenced field reflectivity at wavenumber `k`.
    pub fn field_reflectivity(&self, k: f64) -> Complex64 {
        match self.reflector {
            Reflector::Mirror { magnitude, phase } => Complex64::from_polar(magnitude, phase),
            Reflector::Slab {
                refractive_index,
                thickness,
            } => slab_reflection(refractive_index, thickness, k),
        }
    }

    pub fn power_reflectivity(&self) -> f64 {
        self.field_reflectivity(self.reference_wavenumber()).norm_sqr()
    }

    /// Resonant `q = k − k_m` of the tracked band with the membrane at `x`.
    pub fn resonance_offset(&self, x: f64) -> Result<f64> {
        self.validate()?;
        match self.reflector {
            Reflector::Mirror { .. } => self.closed_form_offset(x),
            Reflector::Slab { .. } => self.transfer_offset(x),
        }
    }

    fn bracket(&self, phase: f64) -> (f64, f64) {
        // Branch qL + φ ∈ (2πj, 2πj + π) holding the weak-reflector root.
        let j = ((phase - FRAC_PI_2) / (2.0 * PI)).round();
        let pad = 1e-12;
        let lo = (2.0 * PI * j - phase + pad) / self.length;
        let hi = (2.0 * PI * j + PI - phase - pad) / self.length;
        (lo, hi)
    }

    /// Resonance from the lossless-mirror relation, using the reflector's
    /// (possibly k-dependent) `r`.
    pub fn closed_form_offset(&self, x: f64) -> Result<f64> {
        let km = self.reference_wavenumber();
        let r0 = self.field_reflectivity(km);
        if r0.norm() == 0.0 {
            return Ok(0.0);
        }
        let f = |q: f64| {
            let r = self.field_reflectivity(km + q);
            (q * self.length + r.arg()).cos() + r.norm() * (2.0 * (km + q) * x).cos()
        };
        let (lo, hi) = self.bracket(r0.arg());
        brent(f, lo, hi, 1e-16, 200)
    }

    fn transfer_offset(&self, x: f64) -> Result<f64> {
        let Reflector::Slab {
            refractive_index: n,
            thickness: t,
        } = self.reflector
        else {
            unreachable!()
        };
        let km = self.reference_wavenumber();
        let quarter = self.reference_order() % 4;
        let r0 = self.field_reflectivity(km);
        if r0.norm() == 0.0 {
            return Ok(0.0);
        }
        // E at the far mirror, launched with E = 0, E′/k = 1 at the near one.
        let f = |q: f64| {
            let k = km + q;
            let (ca, sa) = rotated(quarter, q * self.length / 2.0 + k * (x - t / 2.0));
            let (e, d) = (sa, ca);
            let (cs, ss) = ((n * k * t).cos(), (n * k * t).sin());
            let (e, d) = (e * cs + d * ss / n, -n * e * ss + d * cs);
            let (cb, sb) = rotated(quarter, q * self.length / 2.0 - k * (x + t / 2.0));
            e * cb + d * sb
        };
        let (lo, hi) = self.bracket(r0.arg());
        brent(f, lo, hi, 1e-16, 200)
    }
}

// cos and sin of (mπ/2 + r) for even m with m/2 quarter-turn count given mod 4.
fn rotated(m_mod4: u64, r: f64) -> (f64, f64) {
    let (c, s) = (r.cos(), r.sin());
    match m_mod4 {
        0 => (c, s),
        2 => (-c, -s),
        _ => unreachable!("reference order is even"),
    }
}

/// Field reflectivity of a lossless slab referenced to its center plane.
pub fn slab_reflection(n: f64, t: f64, k: f64) -> Complex64 {
    let r12 = (1.0 - n) / (1.0 + n);
    let e = Complex64::from_polar(1.0, 2.0 * n * k * t);
    let face = r12 * (1.0 - e) / (1.0 - r12 * r12 * e);
    face * Complex64::from_polar(1.0, -k * t)
}

/// `|r|²` of a slab at vacuum wavelength `λ`.
pub fn slab_power_reflectivity(n: f64, t: f64, wavelength: f64) -> f64 {
    slab_reflection(n, t, 2.0 * PI / wavelength).norm_sqr()
}

/// Frequency detuning (Hz) of the tracked resonance with the membrane at `x`
/// from the cavity center.
pub fn transfer_matrix_detuning(x: f64, cavity: &SingleModeCavity) -> Result<f64> {
    Ok(cavity.resonance_offset(x)? * SPEED_OF_LIGHT / (2.0 * PI))
}

/// `|d²f/dx²|` (Hz/m²) at the band maximum, where the membrane sits on a
/// field node. `x = 0` is an exact extremum by mirror symmetry; the second
/// difference is Richardson-extrapolated, with a step scaled to the width
/// `√(1−|r|²)` of the turning point.
pub fn node_curvature(cavity: &SingleModeCavity) -> Result<f64> {
    let width = (1.0 - cavity.power_reflectivity()).max(0.0).sqrt();
    let h = cavity.wavelength / (4.0 * PI) * (0.05 * width).min(0.06);
    let f0 = cavity.resonance_offset(0.0)?;
    let d = |step: f64| -> Result<f64> { Ok(2.0 * (cavity.resonance_offset(step)? - f0) / (step * step)) };
    let curv = (4.0 * d(h / 2.0)? - d(h)?) / 3.0;
    Ok(curv.abs() * SPEED_OF_LIGHT / (2.0 * PI))
}

/// Monotone `|r|² → node curvature` table for the mirror model, inverted by
/// bracketing in the table and refining with Brent.
#[derive(Debug, Clone)]
pub struct ReflectivityMap {
    length: f64,
    wavelength: f64,
    reflectivities: Vec<f64>,
    curvatures: Vec<f64>,
}

impl ReflectivityMap {
    pub const MAX_REFLECTIVITY: f64 = 1.0 - 1e-8;

    pub fn new(length: f64, wavelength: f64) -> Result<Self> {
        // Dense toward |r|² → 1, where the curvature diverges.
        let reflectivities: Vec<f64> = (0..=240)
            .map(|i| {
                let u = i as f64 / 240.0;
                (1.0 - (1.0 - Self::MAX_REFLECTIVITY).powf(u)).min(Self::MAX_REFLECTIVITY)
            })
            .collect();
        let curvatures = reflectivities
            .iter()
            .map(|&r2| node_curvature(&SingleModeCavity::mirror(length, wavelength, r2)))
            .collect::<Result<Vec<_>>>()?;
        if curvatures.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Root("curvature table is not monotone".into()));
        }
        Ok(Self {
            length,
            wavelength,
            reflectivities,
            curvatures,
        })
    }

    pub fn curvature(&self, power_reflectivity: f64) -> Result<f64> {
        node_curvature(&SingleModeCavity::mirror(self.length, self.wavelength, power_reflectivity))
    }

    pub fn invert(&self, curvature: f64) -> Result<f64> {
        if !(curvature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "curvature {curvature:e} Hz/m² is at or below the |r| = 0 floor"
            )));
        }
        let top = *self.curvatures.last().unwrap();
        if curvature > top {
            return Err(Error::InvalidArgument(format!(
                "curvature {curvature:e} Hz/m² exceeds the table limit {top:e}"
            )));
        }
        let i = self.curvatures.partition_point(|&c| c < curvature).max(1);
        let (lo, hi) = (self.reflectivities[i - 1], self.reflectivities[i]);
        let f = |r2: f64| self.curvature(r2).map(|c| c - curvature).unwrap_or(f64::NAN);
        brent(f, lo, hi, 1e-15, 200)
    }
}

/// Effective `|r|²` whose single-mode node curvature equals `curvature`.
pub fn curvature_to_reflectivity(curvature: f64, length: f64, wavelength: f64) -> Result<f64> {
    ReflectivityMap::new(length, wavelength)?.invert(curvature)
}
