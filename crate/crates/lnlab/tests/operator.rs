use lnlab::operator::*;

fn max_interior(field: &CartesianField, vals: &[f64], f: impl Fn(&[f64], f64) -> f64) -> f64 {
    (0..vals.len())
        .filter(|&i| field.is_interior(i))
        .map(|i| f(&field.point(i), vals[i]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn halfspace_solution_has_small_scaled_residual() {
    // Δu − ¾u⁵ for u = x₃^(−1/2), scaled by x₃^(5/2+2)
    let h = 1e-3;
    let field = CartesianField::sample(&[-0.01, -0.01, 0.2], h, &[9, 9, 9], |x| x[2].powf(-0.5));
    let lap = apply(&OperatorSpec::laplacian(3), &field).unwrap();
    let res = max_interior(&field, &lap, |x, v| (v - 0.75 * x[2].powf(-2.5)) * x[2].powf(4.5));
    assert!(res < 1e-6, "{res}");
}

#[test]
fn ball_solution_to_second_order() {
    let ur = |x: &[f64]| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (2.0 / (1.0 - r2)).sqrt()
    };
    let mut errs = Vec::new();
    for h in [0.02, 0.01, 0.005] {
        let field = CartesianField::sample(&[0.3 - h, -0.1 - h, 0.2 - h], h, &[3, 3, 3], ur);
        let lap = apply(&OperatorSpec::laplacian(3), &field).unwrap();
        errs.push(max_interior(&field, &lap, |x, v| v - 0.75 * ur(x).powi(5)));
    }
    let slope = (errs[0] / errs[2]).log2() / 2.0;
    assert!((slope - 2.0).abs() < 0.1, "{errs:?} slope {slope}");
}

#[test]
fn variable_coefficients_converge_at_order_two() {
    let m = MetricFamily::conformal_quadratic(3, 0.3).unwrap();
    let op = conformal_operator(&m).unwrap();
    let f = |x: &[f64]| (x[0] + 2.0 * x[1]).sin() * (1.0 + x[2] * x[2]);
    // exact L f from the analytic jet
    let exact = |x: &[f64]| {
        let s = (x[0] + 2.0 * x[1]).sin();
        let c = (x[0] + 2.0 * x[1]).cos();
        let w = 1.0 + x[2] * x[2];
        let grad = nalgebra::DVector::from_vec(vec![c * w, 2.0 * c * w, 2.0 * x[2] * s]);
        let hess = nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[-s * w, -2.0 * s * w, 2.0 * x[2] * c, -2.0 * s * w, -4.0 * s * w, 4.0 * x[2] * c, 2.0 * x[2] * c, 4.0 * x[2] * c, 2.0 * s],
        );
        op.coeffs(x).apply_jet(&lnlab::geometry::Jet { value: s * w, grad, hess })
    };
    let mut errs = Vec::new();
    for h in [0.04, 0.02, 0.01] {
        let field = CartesianField::sample(&[0.2 - h, 0.1 - h, 0.3 - h], h, &[3, 3, 3], f);
        let lf = apply(&op, &field).unwrap();
        errs.push(max_interior(&field, &lf, |x, v| v - exact(x)));
    }
    let slope = (errs[0] / errs[2]).log2() / 2.0;
    assert!((slope - 2.0).abs() < 0.1, "{errs:?} slope {slope}");
}

#[test]
fn structure_inequality_holds_on_fresh_samples() {
    let m = MetricFamily::conformal_quadratic(3, 0.3).unwrap();
    let op = conformal_operator(&m).unwrap();
    for x in halton_ball(3, 1.0, 500, 40_000) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        assert!(op.coeffs(&x).structure_sum(&x) <= op.c_l * r2 * (1.0 + 1e-9));
        let lam_min = op.coeffs(&x).a.symmetric_eigenvalues().min();
        assert!(lam_min >= 1.0 - op.c_l * r2 && lam_min > 0.0);
    }
}

#[test]
fn shape_mismatch_is_reported() {
    let mut f = CartesianField::sample(&[0.0, 0.0, 0.0], 0.1, &[3, 3, 3], |_| 1.0);
    f.values.pop();
    assert!(matches!(apply(&OperatorSpec::laplacian(3), &f), Err(OperatorError::Shape { .. })));
}
