mod common;

use lnlab::analysis::*;
use lnlab::blowup_solver::{monotone_check, solve_ball, BallConfig};
use lnlab::cap_profile::SphericalDomain1D;
use lnlab::geometry::{build_t, GraphFn, GraphSurface};
use lnlab::linalg::{solve_tridiagonal, BandMatrix};
use lnlab::operator::OperatorSpec;
use lnlab::spectral::{first_eigenpair, regime_for, regime_form, Regime, RateForm};
use nalgebra::Rotation3;
use proptest::prelude::*;

use common::profile;

/// Eight samples per octave on [2^-10, 1], hitting every dyadic edge.
fn dyadic_nodes() -> Vec<f64> {
    (0..=80).map(|k| 2f64.powf(-(k as f64) / 8.0)).collect()
}

/// Samples along rays at dyadic radii below r_hi, with ratio |Tx − x|/|x|.
fn straightening_field(surface: GraphSurface, dirs: &[[f64; 3]], r_hi: f64) -> RatioField {
    let t = build_t(vec![surface]).unwrap();
    let mut f = RatioField { label: "T".into(), r: vec![], ratio: vec![] };
    for d in dirs {
        let nrm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        for k in 0..=48 {
            let r = r_hi * 2f64.powf(-(k as f64) / 8.0);
            let x: Vec<f64> = d.iter().map(|v| v / nrm * r).collect();
            let y = t.apply(&x).unwrap();
            let e = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            f.r.push(r);
            f.ratio.push(e / r);
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_power_laws(alpha in 0.3f64..3.5, c in 1e-3f64..10.0, count in 4usize..8) {
        let r = dyadic_nodes();
        let field = RatioField { label: "p".into(), ratio: r.iter().map(|r| c * r.powf(alpha)).collect(), r };
        let fit = fit_rate(&field, &AnnuliSpec { r_hi: 0.5, count }).unwrap();
        prop_assert!((fit.power_alpha - alpha).abs() < 1e-9);
        prop_assert!((fit.alpha - alpha).abs() < 1e-9 || fit.model == RateModel::PowerLog);
        prop_assert!(fit.r_squared > 0.999);
    }

    #[test]
    fn fit_is_stable_under_dropping_the_outer_annulus(alpha in 0.5f64..3.0, wobble in 0.0f64..0.01, phase in 0.0f64..6.3) {
        let r = dyadic_nodes();
        let ratio = r.iter().map(|r| r.powf(alpha) * (1.0 + wobble * (r.ln() + phase).sin())).collect();
        let field = RatioField { label: "w".into(), r, ratio };
        let spec = AnnuliSpec::between(2f64.powi(-7), 0.25);
        prop_assert!(window_stability(&field, &spec).unwrap() <= 0.05);
    }

    #[test]
    fn dispatcher_follows_the_trichotomy(mu1 in 0.5f64..12.0) {
        let form = regime_form(regime_for(mu1), mu1);
        if mu1 > 2.0 + 1e-6 {
            prop_assert_eq!(form, RateForm::Power { exponent: 2.0 });
        } else if mu1 < 2.0 - 1e-6 {
            prop_assert_eq!(form, RateForm::Power { exponent: mu1 });
        }
        prop_assert_eq!(Prediction::Cone { mu1 }.form(), form);
    }

    #[test]
    fn band_solver_inverts_products(n in 5usize..60, kl in 0usize..4, ku in 0usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // pivoting is exercised by off-diagonal entries of either size
                a.add(i, j, rng.gen_range(-1.0..1.0) * if i == j { 0.5 } else { 1.0 });
            }
            a.add(i, i, if rng.gen_bool(0.5) { 3.0 } else { -3.0 });
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.mul_vec(&x);
        let y = a.clone().solve(&b).unwrap();
        let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{}", err);
    }

    #[test]
    fn tridiagonal_solver_inverts_products(n in 2usize..80, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sub: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sup: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|_| 2.5 + rng.gen_range(0.0..1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| diag[i] * x[i] + if i > 0 { sub[i] * x[i - 1] } else { 0.0 } + if i + 1 < n { sup[i] * x[i + 1] } else { 0.0 })
            .collect();
        let y = solve_tridiagonal(&sub, &diag, &sup, &b).unwrap();
        prop_assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rate_fits_are_rotation_invariant(roll in -3.1f64..3.1, pitch in -1.5f64..1.5, yaw in -3.1f64..3.1) {
        let rot = Rotation3::from_euler_angles(roll, pitch, yaw);
        let dirs = [[1.0, 0.0, 1.0], [0.3, -0.5, 1.0], [-0.7, 0.2, 0.6]];
        let base = straightening_field(GraphSurface::sphere(3, 1.0).unwrap(), &dirs, 0.05);
        // the rotated fixture: frame Q Rᵀ and rotated sample rays
        let m = rot.matrix();
        let frame: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| m[(j, i)]).collect()).collect();
        let turned = GraphSurface::new(3, GraphFn::Sphere { radius: 1.0 }, frame, "rotated").unwrap();
        let rdirs: Vec<[f64; 3]> = dirs.iter().map(|d| { let v = m * nalgebra::Vector3::from(*d); [v[0], v[1], v[2]] }).collect();
        let rotated = straightening_field(turned, &rdirs, 0.05);
        let spec = AnnuliSpec { r_hi: 0.05, count: 5 };
        let (a, b) = (fit_rate(&base, &spec).unwrap(), fit_rate(&rotated, &spec).unwrap());
        prop_assert!((a.alpha - b.alpha).abs() < 1e-6, "{} {}", a.alpha, b.alpha);
        prop_assert!((a.alpha - 1.0).abs() < 0.1);
    }

    #[test]
    fn nested_caps_have_decreasing_lambda1(t1 in 0.3f64..2.6, dt in 0.05f64..0.4) {
        let l = |t: f64| first_eigenpair(&profile(&SphericalDomain1D::cap(t), 3, 400)).unwrap();
        let (a, b) = (l(t1), l(t1 + dt));
        prop_assert!(a.lambda1 > b.lambda1);
        prop_assert!(b.lambda1 > 0.75);
        prop_assert!(b.mu1 > 1.0);
        if t1 + dt <= std::f64::consts::FRAC_PI_2 {
            prop_assert!(b.mu1 > 2.0 && b.regime == Regime::Alpha2);
        }
    }

    #[test]
    fn ball_truncation_is_monotone(m0 in 1e2f64..1e3, factor in 2.0f64..10.0) {
        let cfg = BallConfig { floor: Some((factor * factor * m0).powi(-2)), ..BallConfig::new(3, 1.0, m0, 600) };
        let f: Vec<_> = [m0, factor * m0, factor * factor * m0].iter().map(|m| solve_ball(&BallConfig { m: *m, ..cfg.clone() }).unwrap()).collect();
        let r = monotone_check(&f.iter().collect::<Vec<_>>()).unwrap();
        prop_assert!(r.geometric, "{:?}", r);
    }

    #[test]
    fn certificates_revalidate_at_double_density(c in 0.0f64..2.0) {
        let op = OperatorSpec::extremal(3, c).unwrap();
        let search = CertifySearch { samples: 1000, ..CertifySearch::default() };
        let cert = certify_supersolution(&op, BarrierForm::TwiceBall, 3, &search).unwrap();
        prop_assert!(cert.pass);
        let again = revalidate(&op, BarrierForm::TwiceBall, &cert, 2000).unwrap();
        prop_assert!(again > 0.5 * cert.margin, "{} {}", again, cert.margin);
    }
}
