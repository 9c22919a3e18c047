//! Membrane-in-the-middle cavity model: Hermite-Gaussian modes of a
//! Fabry-Perot cavity perturbed by a thin dielectric membrane, solved with
//! first-order degenerate perturbation theory over a near-degenerate set of
//! transverse modes.
//!
//! The guide in `book/` walks through the model; its code listings are
//! compiled as doc-tests of this crate.

pub mod beam;
pub mod coupling;
pub mod error;
pub mod fitting;
pub mod hermite;
pub mod membrane;
pub mod quadrature;
pub mod roots;
pub mod single_mode;
pub mod spectra;

pub use beam::{
    beam_frame, beam_frame_near_waist, fractional_splitting, mode_field_exact, mode_field_waist_approx,
    resonant_wavenumber, BeamFrame, CavityGeometry, ModeIndex, SPEED_OF_LIGHT,
};
pub use coupling::{
    assemble_matrix, interaction_shorthand, solve_detunings, vij_analytic, vij_numeric, xi_integral, CouplingMatrix,
    DetuningSolution, Method, PerturbationContext,
};
pub use error::{Error, Result};
pub use fitting::{
    fit_band_phase, fit_hyperbola, fit_tilt_calibration, least_squares, monte_carlo_coverage, splitting_to_tilt,
    BandPhaseFit, FitResult, HyperbolaFit, Observation, ParameterSpec, SplittingCurve, TiltCalibration,
};
pub use hermite::hermite_poly;
pub use membrane::{membrane_potential, MembraneConfig};
pub use single_mode::{curvature_to_reflectivity, node_curvature, transfer_matrix_detuning, ReflectivityMap, SingleModeCavity};
pub use spectra::{
    band_sweep, diagonal_band, find_crossings, full_spectrum, gap_map, gaps_near, triplet_splitting, AvoidedCrossing,
    BandStructure, CrossingLabel, GapMap,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/modes.md")]
    mod modes {}
    #[doc = include_str!("../../../book/src/perturbation.md")]
    mod perturbation {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
}
