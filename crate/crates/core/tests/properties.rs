use mimcavity::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_is_symmetric_and_respects_parity(x0 in -1e-3..1e-3f64, tilt in 0.0..1e-3f64, about_y in any::<bool>()) {
        let g = CavityGeometry::default();
        let set = ModeIndex::singlet_triplet(g.reference_longitudinal_index());
        let m = if about_y { MembraneConfig::at(x0).with_tilt(tilt, 0.0) } else { MembraneConfig::at(x0).with_tilt(0.0, tilt) };
        let scale = vij_analytic(set[0], set[0], &m, &g).abs().max(vij_analytic(set[1], set[1], &m, &g).abs());
        for a in &set {
            for b in &set {
                let (ab, ba) = (vij_analytic(*a, *b, &m, &g), vij_analytic(*b, *a, &m, &g));
                prop_assert!((ab - ba).abs() <= 1e-12 * scale, "{} {}: {:e} {:e}", a, b, ab, ba);
            }
        }
        prop_assert_eq!(vij_analytic(set[0], set[2], &m, &g), 0.0);
    }

    #[test]
    fn detunings_are_real_and_ordered(x0 in -5e-4..5e-4f64, tilt in 0.0..0.5e-3f64) {
        let g = CavityGeometry::default();
        let set = ModeIndex::singlet_triplet(g.reference_longitudinal_index());
        let matrix = assemble_matrix(&set, &MembraneConfig::at(x0).with_tilt(0.0, tilt), &g, Method::Analytic).unwrap();
        let sol = solve_detunings(&matrix);
        prop_assert!(sol.eigenvalues.iter().all(|e| e.is_finite()));
        prop_assert!(sol.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        // Trace is preserved.
        let trace: f64 = (0..4).map(|i| matrix.guoy_offsets[i] - matrix.elements[i][i]).sum();
        let sum: f64 = sol.eigenvalues.iter().sum();
        prop_assert!((trace - sum).abs() < 1e-12 * trace.abs().max(1e-6));
    }

    #[test]
    fn reflectivity_map_inverts(r2 in 0.01..0.9999f64) {
        let g = CavityGeometry::default();
        let map = ReflectivityMap::new(g.length(), g.wavelength()).unwrap();
        let back = map.invert(map.curvature(r2).unwrap()).unwrap();
        prop_assert!((back - r2).abs() < 1e-6);
    }
}
