//! Cross-checks between independent routes to the same quantity.

use mimcavity::beam::{real_inner_product, InnerProductOptions};
use mimcavity::single_mode::slab_power_reflectivity;
use mimcavity::*;

fn setup() -> (CavityGeometry, Vec<ModeIndex>) {
    let g = CavityGeometry::default();
    let set = ModeIndex::singlet_triplet(g.reference_longitudinal_index());
    (g, set)
}

#[test]
fn modes_are_nearly_orthonormal() {
    let (g, set) = setup();
    let l = g.reference_longitudinal_index();
    let opts = InnerProductOptions::default();
    // Paraxial standing waves miss exact orthonormality at the 1e-5 level.
    for a in &set {
        let norm = real_inner_product(*a, *a, &g, opts);
        assert!((norm - 1.0).abs() < 2e-5, "{a}: {norm}");
        for b in &set {
            if a != b {
                assert!(real_inner_product(*a, *b, &g, opts).abs() < 2e-5, "{a} {b}");
            }
        }
    }
    let far = real_inner_product(ModeIndex::new(l, 0, 0), ModeIndex::new(l + 1, 0, 0), &g, opts);
    assert!(far.abs() < 1e-8, "{far}");
}

#[test]
fn closed_form_matches_quadrature() {
    let (g, set) = setup();
    let m = MembraneConfig::at(500e-6).with_tilt(0.0, 0.4e-3);
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for a in &set {
        for b in &set {
            let n = vij_numeric(*a, *b, &m, &g).unwrap();
            scale = scale.max(n.abs());
            worst = worst.max((vij_analytic(*a, *b, &m, &g) - n).abs());
        }
    }
    assert!(worst < 0.01 * scale, "{worst:e} vs {scale:e}");
}

#[test]
fn antisymmetric_mode_decouples_from_singlet() {
    let (g, set) = setup();
    for tilt in [0.0, 0.4e-3] {
        let m = MembraneConfig::at(300e-6).with_tilt(0.0, tilt);
        let v11 = vij_numeric(set[0], set[2], &m, &g).unwrap();
        let v20 = vij_numeric(set[0], set[1], &m, &g).unwrap();
        assert!(v11.abs() < 1e-3 * v20.abs(), "{v11:e} {v20:e}");
        assert_eq!(vij_analytic(set[0], set[2], &m, &g), 0.0);
    }
}

#[test]
fn singlet_band_spans_a_quarter_fsr() {
    let (g, set) = setup();
    let positions: Vec<f64> = (0..=400).map(|i| g.wavelength() / 2.0 * i as f64 / 400.0).collect();
    let band = diagonal_band(set[0], &positions, &MembraneConfig::default(), &g).unwrap();
    let p2p = band.iter().cloned().fold(f64::MIN, f64::max) - band.iter().cloned().fold(f64::MAX, f64::min);
    let fraction = p2p / g.fsr_fraction();
    assert!((fraction - 0.27).abs() < 0.02, "{fraction}");
}

#[test]
fn tilted_top_right_gap_closes_at_finite_offset() {
    let (g, set) = setup();
    let tr = |x: f64| {
        gaps_near(x, &MembraneConfig::at(x).with_tilt(0.0, 0.25e-3), &g, &set, Method::Analytic)
            .unwrap()
            .into_iter()
            .find(|c| c.label == CrossingLabel::TR)
            .unwrap()
            .gap
    };
    let (far_left, near, far_right) = (tr(250e-6), tr(292e-6), tr(330e-6));
    assert!(near < 0.02 * far_left.min(far_right), "{far_left:e} {near:e} {far_right:e}");
}

#[test]
fn curvature_reflectivity_round_trip() {
    let g = CavityGeometry::default();
    let map = ReflectivityMap::new(g.length(), g.wavelength()).unwrap();
    for r2 in [0.1487, 0.5, 0.99, 0.9975] {
        let back = map.invert(map.curvature(r2).unwrap()).unwrap();
        assert!((back - r2).abs() < 1e-6, "{r2} -> {back}");
    }
    let slab = slab_power_reflectivity(2.0, 50e-9, g.wavelength());
    assert!((slab - 0.1487).abs() < 5e-4, "{slab}");
}

#[test]
fn hyperbola_recovers_two_level_crossing() {
    let (slope, gap, center): (f64, f64, f64) = (3.0e14, 2.0e6, 1.0e-9);
    let branch = |sign: f64| -> Vec<Observation<f64>> {
        (0..41)
            .map(|i| {
                let x = center + (i as f64 - 20.0) * 5e-11;
                let u = x - center;
                Observation::new(x, sign * ((slope * u).powi(2) + (gap / 2.0).powi(2)).sqrt())
            })
            .collect()
    };
    let fit = fit_hyperbola(&branch(1.0), &branch(-1.0), false).unwrap();
    assert!((fit.gap / gap - 1.0).abs() < 1e-6, "{}", fit.gap);
    assert!((fit.slope.abs() / slope - 1.0).abs() < 1e-6);
    assert!((fit.curvature / (2.0 * slope * slope / gap) - 1.0).abs() < 1e-6);
}
