use tunemag::actuator::{
    coenergy_htma, coenergy_tma, fit_piecewise_linear, force_htma, force_map, force_tma, line_fit,
    quadratic_fit_residual, solve_circuit_htma, solve_circuit_tma, write_force_map_csv, ActuatorKind, FluxSolution,
    ForceSample, HtmaGeometry, TmaGeometry, FORCE_MAP_HEADER,
};
use tunemag::{Error, MU0};

fn positions(geom: &HtmaGeometry, n: usize) -> Vec<f64> {
    (0..n).map(|i| -geom.x_range + 2.0 * geom.x_range * i as f64 / (n - 1) as f64).collect()
}

fn remanences(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn tma_closed_form() {
    let g = TmaGeometry::default();
    let sol = solve_circuit_tma(&g, 1.0, 0.0).unwrap();
    // series circuit by hand: φ = b_r a_m / (1 + μ_rec a_m n g0 / (a_gap l_m))
    let expected = 1.0 * g.a_m / (1.0 + g.mu_rec * g.a_m * g.n_gaps as f64 * g.g0 / (g.a_gap * g.l_m));
    assert!(rel(sol.phi_tm, expected) < 1e-12, "{} vs {expected}", sol.phi_tm);
    assert!(rel(sol.phi_tm, 1e-4 / 1.105) < 1e-12);
    assert!(sol.h_m <= 0.0);
    assert!(rel(sol.b_m, 1.0 + MU0 * g.mu_rec * sol.h_m) < 1e-12);
    assert!(sol.conservation_residual(true) <= 1e-12);
}

#[test]
fn tma_zero_source_and_monotone_area() {
    let g = TmaGeometry::default();
    assert_eq!(solve_circuit_tma(&g, 0.0, 1e-4).unwrap().phi_tm, 0.0);
    let wide = TmaGeometry { a_gap: 2.0 * g.a_gap, ..g };
    assert!(solve_circuit_tma(&wide, 0.8, 0.0).unwrap().phi_tm > solve_circuit_tma(&g, 0.8, 0.0).unwrap().phi_tm);
}

#[test]
fn gap_closure_is_a_geometry_error() {
    let g = TmaGeometry::default();
    assert!(matches!(solve_circuit_tma(&g, 1.0, g.g0), Err(Error::Geometry(_))));
    let h = HtmaGeometry::default();
    assert!(matches!(solve_circuit_htma(&h, 1.0, -h.core.g0), Err(Error::Geometry(_))));
    let bad = TmaGeometry { mu_rec: 25.0, ..g };
    assert!(matches!(solve_circuit_tma(&bad, 1.0, 0.0), Err(Error::Geometry(_))));
    let far = HtmaGeometry { x_range: h.core.g0, ..h };
    assert!(matches!(far.validate(), Err(Error::Geometry(_))));
}

#[test]
fn tma_force_is_quadratic() {
    let g = TmaGeometry::default();
    let zero = FluxSolution { phi_tm: 0.0, phi_g1: 0.0, phi_g2: 0.0, phi_bias1: 0.0, phi_bias2: 0.0, h_m: 0.0, b_m: 0.0 };
    assert_eq!(force_tma(&zero, &g), 0.0);
    let s1 = solve_circuit_tma(&g, 0.4, 1e-4).unwrap();
    let s2 = solve_circuit_tma(&g, 0.8, 1e-4).unwrap();
    assert!(rel(s2.phi_tm, 2.0 * s1.phi_tm) < 1e-12);
    assert!(rel(force_tma(&s2, &g), 4.0 * force_tma(&s1, &g)) < 1e-12);

    let (phis, forces): (Vec<f64>, Vec<f64>) = remanences(41)
        .into_iter()
        .map(|b| {
            let s = solve_circuit_tma(&g, b, 0.0).unwrap();
            (s.phi_tm, force_tma(&s, &g))
        })
        .unzip();
    assert!(quadratic_fit_residual(&phis, &forces).unwrap() <= 1e-9);
    // convex: second differences positive on the uniform b_r grid
    assert!(forces.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] > 0.0));
}

#[test]
fn htma_centred_mover_without_control_is_balanced() {
    let g = HtmaGeometry::default();
    let s = solve_circuit_htma(&g, 0.0, 0.0).unwrap();
    assert!(rel(s.phi_g1, s.phi_g2) < 1e-12);
    let scale = s.phi_g1 * s.phi_g1 / (2.0 * MU0 * g.core.a_gap);
    assert!(force_htma(&s, &g).abs() <= 1e-12 * scale);
    assert!(s.conservation_residual(false) <= 1e-12);
}

#[test]
fn bias_stiffness_matches_coenergy_oracle() {
    let g = HtmaGeometry::default();
    let dx = 1e-9;
    let mut prev = None;
    for x in [5e-6, 10e-6, 20e-6] {
        let f = force_htma(&solve_circuit_htma(&g, 0.0, x).unwrap(), &g);
        assert!(f > 0.0, "bias pulls toward the nearer gap");
        let fd = (coenergy_htma(&g, 0.0, x + dx).unwrap() - coenergy_htma(&g, 0.0, x - dx).unwrap()) / (2.0 * dx);
        assert!(rel(f, fd) < 1e-3, "{f} vs {fd}");
        if let Some((x0, f0)) = prev {
            // linear in x near the centre
            assert!(rel(f / x, f0 / x0) < 1e-2);
        }
        prev = Some((x, f));
    }
}

#[test]
fn htma_superposition() {
    let g = HtmaGeometry::default();
    let nulled = HtmaGeometry { b_r_bias: 0.0, ..g };
    for (b, x) in [(0.7, 0.0), (-0.4, 1.2e-4), (1.0, -2.4e-4)] {
        let full = solve_circuit_htma(&g, b, x).unwrap();
        let bias = solve_circuit_htma(&g, 0.0, x).unwrap();
        let ctrl = solve_circuit_htma(&nulled, b, x).unwrap();
        for (f, bb, c) in [
            (full.phi_tm, bias.phi_tm, ctrl.phi_tm),
            (full.phi_g1, bias.phi_g1, ctrl.phi_g1),
            (full.phi_g2, bias.phi_g2, ctrl.phi_g2),
        ] {
            let scale = full.phi_g1.abs().max(full.phi_g2.abs());
            assert!((f - bb - c).abs() <= 1e-12 * scale);
        }
        assert!(full.conservation_residual(false) <= 1e-12);
    }
}

#[test]
fn difference_of_squares() {
    let g = HtmaGeometry::default();
    let (pb, pc) = (3e-5, 7e-6);
    let sol = FluxSolution { phi_tm: pc, phi_g1: pb + pc, phi_g2: pb - pc, phi_bias1: pb, phi_bias2: pb, h_m: 0.0, b_m: 0.0 };
    let expected = 2.0 * pb * pc / (MU0 * g.core.a_gap);
    assert!(rel(force_htma(&sol, &g), expected) < 1e-12);
    let balanced = FluxSolution { phi_g2: pb + pc, ..sol };
    assert_eq!(force_htma(&balanced, &g), 0.0);
}

#[test]
fn htma_is_linear_at_every_position() {
    let g = HtmaGeometry::default();
    assert!(2.0 * g.x_range >= 500e-6);
    for x in positions(&g, 21) {
        let map = force_map(ActuatorKind::Htma, &g, &[x], &remanences(41)).unwrap();
        let phis: Vec<f64> = map.iter().map(|s| s.phi_tm).collect();
        let fs: Vec<f64> = map.iter().map(|s| s.force).collect();
        let r2 = line_fit(&phis, &fs).unwrap().r2;
        assert!(r2 >= 0.999, "r² {r2} at x = {x}");
    }
}

fn htma_samples(g: &HtmaGeometry) -> Vec<ForceSample> {
    force_map(ActuatorKind::Htma, g, &positions(g, 21), &remanences(41)).unwrap()
}

#[test]
fn fitted_motor_constant_matches_analytic_and_finite_differences() {
    let g = HtmaGeometry::default();
    let fit = fit_piecewise_linear(&htma_samples(&g), 1).unwrap();
    let seg = &fit.segments[0];
    assert!(seg.r2 >= 0.999);

    let mid = 0.5 * (seg.x_lo + seg.x_hi);
    let bias = solve_circuit_htma(&g, 0.0, mid).unwrap();
    let phi_b = 0.5 * (bias.phi_g1 + bias.phi_g2);
    let analytic = 2.0 * phi_b / (MU0 * g.core.a_gap);
    assert!(rel(seg.k_m, analytic) < 0.01, "{} vs {analytic}", seg.k_m);

    let h = 1e-6; // of the 1 T remanence full scale
    for x in positions(&g, 11) {
        for b in [-0.9, -0.3, 0.0, 0.5, 0.9] {
            let lo = solve_circuit_htma(&g, b - h, x).unwrap();
            let hi = solve_circuit_htma(&g, b + h, x).unwrap();
            let slope = (force_htma(&hi, &g) - force_htma(&lo, &g)) / (hi.phi_tm - lo.phi_tm);
            assert!(rel(seg.k_m, slope) < 5e-3, "k_m {} vs ∂F/∂φ {slope} at x = {x}, b_r = {b}", seg.k_m);
        }
    }
    assert!(seg.k_a > 0.0);
    assert!(fit.k_a > 0.0);
}

#[test]
fn tma_fits_worse_than_htma() {
    let g = HtmaGeometry::default();
    let htma = fit_piecewise_linear(&htma_samples(&g), 1).unwrap();
    let tma_samples = force_map(ActuatorKind::Tma, &g, &positions(&g, 21), &remanences(41)).unwrap();
    let tma = fit_piecewise_linear(&tma_samples, 1).unwrap();
    assert!(tma.r2 < 0.5, "TMA r² {}", tma.r2);
    assert!(tma.r2 < htma.r2);
}

#[test]
fn segments_partition_the_travel() {
    let g = HtmaGeometry::default();
    let fit = fit_piecewise_linear(&htma_samples(&g), 4).unwrap();
    assert_eq!(fit.segments.len(), 4);
    assert_eq!(fit.segments[0].x_lo, -g.x_range);
    assert_eq!(fit.segments[3].x_hi, g.x_range);
    for w in fit.segments.windows(2) {
        assert_eq!(w[0].x_hi, w[1].x_lo);
    }
    assert_eq!(fit.segments.iter().map(|s| s.n_samples).sum::<usize>(), 21 * 41);
    assert!(fit.segments.iter().all(|s| (0.0..=1.0).contains(&s.r2) && s.r2 >= 0.999));
    let s = &fit.segments[2];
    let x = 0.5 * (s.x_lo + s.x_hi);
    assert_eq!(fit.predict(x, 1e-5), s.k_m * 1e-5 + s.k_a * x);
    assert!(fit.to_json().unwrap().contains("\"segments\""));
}

#[test]
fn zero_control_flux_cannot_be_fitted() {
    let g = HtmaGeometry::default();
    let samples: Vec<ForceSample> =
        positions(&g, 5).into_iter().map(|x| ForceSample { x, phi_tm: 0.0, force: 3.0 * x }).collect();
    match fit_piecewise_linear(&samples, 1) {
        Err(Error::Fit(msg)) => assert!(msg.contains("indeterminate"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert!(fit_piecewise_linear(&htma_samples(&g), 0).is_err());
}

#[test]
fn maxwell_force_is_coenergy_derivative() {
    let h = HtmaGeometry::default();
    let t = h.core;
    let dx = 1e-9;
    for x in [-2e-4, -5e-5, 0.0, 1e-4, 2.4e-4] {
        for b in [-1.0, -0.2, 0.6, 1.0] {
            let f = force_htma(&solve_circuit_htma(&h, b, x).unwrap(), &h);
            let fd = (coenergy_htma(&h, b, x + dx).unwrap() - coenergy_htma(&h, b, x - dx).unwrap()) / (2.0 * dx);
            let scale = f.abs().max(1e-3 * (coenergy_htma(&h, b, x).unwrap() / h.core.g0).abs());
            assert!((f - fd).abs() <= 1e-3 * scale, "HTMA {f} vs {fd} at x = {x}, b_r = {b}");

            let f = force_tma(&solve_circuit_tma(&t, b, x).unwrap(), &t);
            let fd = (coenergy_tma(&t, b, x + dx).unwrap() - coenergy_tma(&t, b, x - dx).unwrap()) / (2.0 * dx);
            assert!(rel(f, fd) <= 1e-3, "TMA {f} vs {fd}");
        }
    }
}

#[test]
fn force_map_csv_and_travel_check() {
    let g = HtmaGeometry::default();
    let map = force_map(ActuatorKind::Htma, &g, &[0.0, 1e-4], &[0.5, 1.0]).unwrap();
    let mut buf = Vec::new();
    write_force_map_csv(&mut buf, &map).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], FORCE_MAP_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,"));
    assert!(matches!(force_map(ActuatorKind::Htma, &g, &[3e-4], &[1.0]), Err(Error::Invalid(_))));
}
