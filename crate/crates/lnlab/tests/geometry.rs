use lnlab::geometry::*;

fn brute_force_paraboloid(x: [f64; 3]) -> f64 {
    // minimize |x − (y, |y|²)| over a 1e-4 grid of y, then sign by side
    let step = 1e-4;
    let mut best = f64::INFINITY;
    for i in 0..=2000 {
        let y1 = i as f64 * step;
        for j in -500..=500 {
            let y2 = j as f64 * step;
            let f = y1 * y1 + y2 * y2;
            let d2 = (x[0] - y1).powi(2) + (x[1] - y2).powi(2) + (x[2] - f).powi(2);
            best = best.min(d2);
        }
    }
    let side = x[2] - x[0] * x[0] - x[1] * x[1];
    best.sqrt() * side.signum()
}

#[test]
fn paraboloid_distance_matches_dense_search() {
    let s = GraphSurface::paraboloid(3, 1.0).unwrap();
    let x = [0.1, 0.0, 0.05];
    let d = signed_distance(&s, &x).unwrap();
    let oracle = brute_force_paraboloid(x);
    assert!((d - oracle).abs() < 1e-7, "{d} vs {oracle}");
    // frozen value of the projection
    assert!((d - 0.039_160_793_499).abs() < 1e-10, "{d}");
}

#[test]
fn tangent_cones_of_fixtures() {
    let plane = GraphSurface::plane(&[0.0, 0.0, 1.0], "p").unwrap();
    match tangent_cone(&[plane]).unwrap().kind {
        ConeKind::Halfspace { axis } => assert!((axis[2] - 1.0).abs() < 1e-15),
        k => panic!("{k:?}"),
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = GraphSurface::plane(&[s, 0.0, s], "a").unwrap();
    let b = GraphSurface::plane(&[-s, 0.0, s], "b").unwrap();
    match tangent_cone(&[a, b]).unwrap().kind {
        ConeKind::Wedge { opening, .. } => assert!((opening - std::f64::consts::FRAC_PI_2).abs() < 1e-12),
        k => panic!("{k:?}"),
    }
    let par = GraphSurface::paraboloid(3, 1.0).unwrap();
    match tangent_cone(&[par]).unwrap().kind {
        ConeKind::Halfspace { axis } => assert_eq!(axis, vec![0.0, 0.0, 1.0]),
        k => panic!("{k:?}"),
    }
}

#[test]
fn planes_give_identity_map() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = GraphSurface::plane(&[s, 0.0, s], "a").unwrap();
    let b = GraphSurface::plane(&[-s, 0.0, s], "b").unwrap();
    let t = build_t(vec![a, b]).unwrap();
    assert_eq!(t.r_t, 0.25);
    for x in [[0.01, 0.02, 0.1], [-0.1, 0.05, 0.03], [0.0, 0.0, 0.0]] {
        let xb = t.apply(&x).unwrap();
        for k in 0..3 {
            assert!((xb[k] - x[k]).abs() < 1e-15);
        }
        let j = t.jacobian(&x).unwrap();
        assert!((j - nalgebra::DMatrix::identity(3, 3)).amax() < 1e-9);
    }
}

#[test]
fn sphere_t_map() {
    let t = build_t(vec![GraphSurface::sphere(3, 1.0).unwrap()]).unwrap();
    assert!((t.r_t - 0.091).abs() < 2e-3, "{}", t.r_t);
    // axial points map to themselves
    let xb = t.apply(&[0.0, 0.0, 0.05]).unwrap();
    assert!(xb[0].abs() < 1e-15 && xb[1].abs() < 1e-15 && (xb[2] - 0.05).abs() < 1e-14);
    // off-axis: the composed map preserves distances
    let x = [0.05, 0.0, 0.05];
    let xb = t.apply(&x).unwrap();
    let ds = 1.0 - (0.05f64 * 0.05 + 0.95 * 0.95).sqrt();
    assert!((xb[2] - ds).abs() < 1e-12 && (xb[0] - 0.05).abs() < 1e-15);
    assert!(t.distance_defect(&x).unwrap() < 1e-8 * (1.0 + 0.08));
    // beyond r_T
    assert!(matches!(t.apply(&[0.0, 0.0, 0.2]), Err(GeometryError::Domain { .. })));
}

#[test]
fn jacobian_at_origin_is_identity() {
    for s in [GraphSurface::sphere(3, 1.0).unwrap(), GraphSurface::paraboloid(3, 1.0).unwrap(), GraphSurface::sphere(4, 0.5).unwrap()] {
        let n = s.n;
        let t = build_t(vec![s]).unwrap();
        let j = t.jacobian(&vec![0.0; n]).unwrap();
        assert!((j - nalgebra::DMatrix::identity(n, n)).amax() < 1e-6);
    }
}

#[test]
fn jacobian_richardson_and_curvature_bound() {
    let t = build_t(vec![GraphSurface::sphere(3, 1.0).unwrap()]).unwrap();
    let x = [0.05, 0.0, 0.05];
    let h = 1e-5 * 0.05f64.hypot(0.05);
    let j1 = t.jacobian_step(&x, h).unwrap();
    let j2 = t.jacobian_step(&x, 2.0 * h).unwrap();
    assert!((&j1 - &j2).amax() < 1e-6);
    let dev = (j1 - nalgebra::DMatrix::identity(3, 3)).amax();
    // deviation bounded by curvature times |x|
    assert!(dev <= 1.2 * 0.0708, "{dev}");
}

#[test]
fn straightening_is_quadratic() {
    let fixtures = [GraphSurface::sphere(3, 1.0).unwrap(), GraphSurface::paraboloid(3, 1.0).unwrap()];
    for s in fixtures {
        let t = build_t(vec![s]).unwrap();
        for dir in [[1.0, 0.0, 1.0], [0.3, -0.5, 1.0], [1.0, 1.0, 0.2]] {
            let slope = straightening_slope(&t, &dir).unwrap();
            assert!(slope >= 1.9, "{slope}");
        }
    }
}

#[test]
fn composition_error_is_stable() {
    let t = build_t(vec![GraphSurface::sphere(3, 1.0).unwrap()]).unwrap();
    let x = [0.01, 0.0, 0.04];
    let a = t.composition_ratio(&x, 1e-4).unwrap();
    let b = t.composition_ratio(&x, 5e-5).unwrap();
    assert!(a.is_finite() && b.is_finite());
    assert!((a - b).abs() <= 0.1 * a.max(b), "{a} {b}");
    assert!(t.in_domain(&x).unwrap());
    assert!(!t.in_domain(&[0.05, 0.0, 0.0]).unwrap());
}
