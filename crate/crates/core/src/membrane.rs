//! The membrane as a perturbing dielectric slab.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tilt magnitudes above this leave the small-angle regime.
pub const MAX_TILT: f64 = 10e-3;

/// Dielectric slab centered on the tilted plane `x_c = x0 + α_y y + α_z z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneConfig {
    pub center_position: f64,
    pub thickness: f64,
    pub refractive_index: f64,
    pub tilt_y: f64,
    pub tilt_z: f64,
    /// Treat the slab as a delta sheet of weight `(n²−1)·t`.
    pub thin_limit: bool,
}

impl Default for MembraneConfig {
    fn default() -> Self {
        Self {
            center_position: 0.0,
            thickness: 50e-9,
            refractive_index: 2.0,
            tilt_y: 0.0,
            tilt_z: 0.0,
            thin_limit: false,
        }
    }
}

impl MembraneConfig {
    pub fn at(center_position: f64) -> Self {
        Self {
            center_position,
            ..Self::default()
        }
    }

    pub fn with_tilt(mut self, tilt_y: f64, tilt_z: f64) -> Self {
        self.tilt_y = tilt_y;
        self.tilt_z = tilt_z;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center_position.is_finite() {
            return Err(Error::Membrane("position must be finite".into()));
        }
        if !(self.thickness >= 0.0 && self.thickness.is_finite()) || (self.thickness == 0.0 && !self.thin_limit) {
            return Err(Error::Membrane(format!(
                "thickness must be positive, got {}",
                self.thickness
            )));
        }
        // n = 1 is allowed: it is the unperturbed reference case.
        if !(self.refractive_index >= 1.0 && self.refractive_index.is_finite()) {
            return Err(Error::Membrane(format!(
                "refractive index must be at least 1, got {}",
                self.refractive_index
            )));
        }
        for (name, a) in [("tilt_y", self.tilt_y), ("tilt_z", self.tilt_z)] {
            if !(a.abs() < MAX_TILT) {
                return Err(Error::Membrane(format!(
                    "{name} = {a} rad is outside the small-angle regime (|α| < {MAX_TILT})"
                )));
            }
        }
        Ok(())
    }

    /// Combined tilt `√(α_y² + α_z²)`.
    pub fn tilt(&self) -> f64 {
        self.tilt_y.hypot(self.tilt_z)
    }

    /// Local center plane position at transverse point `(y, z)`.
    pub fn local_center(&self, y: f64, z: f64) -> f64 {
        self.center_position + self.tilt_y * y + self.tilt_z * z
    }

    /// Axial extent of the slab, `t / cos α`.
    pub fn axial_thickness(&self) -> f64 {
        self.thickness / self.tilt().cos()
    }

    /// `n² − 1`.
    pub fn contrast(&self) -> f64 {
        self.refractive_index * self.refractive_index - 1.0
    }

    /// Sheet weight `(n² − 1)·t`.
    pub fn sheet_weight(&self) -> f64 {
        self.contrast() * self.thickness
    }
}

/// Dielectric perturbation `V` at a point: `n² − 1` inside the slab, zero
/// outside. In the thin limit this returns the sheet weight `(n²−1)·t` on the
/// center plane and zero elsewhere.
pub fn membrane_potential(point: [f64; 3], membrane: &MembraneConfig) -> f64 {
    let [x, y, z] = point;
    let offset = x - membrane.local_center(y, z);
    if membrane.thin_limit {
        if offset == 0.0 {
            membrane.sheet_weight()
        } else {
            0.0
        }
    } else if offset.abs() <= membrane.axial_thickness() / 2.0 {
        membrane.contrast()
    } else {
        0.0
    }
}
