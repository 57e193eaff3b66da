#![allow(dead_code)]

use lnlab::blowup_solver::{cone_profile, solve, BlowupError, DomainSpec2D, MeridianMesh, MeshSpec, SolutionField, SolveConfig};
use lnlab::cap_profile::{solve_profile, BlowupProfile, Grading, ProfileGrid, SphericalDomain1D, TruncationSchedule};
use lnlab::operator::{conformal_operator, MetricFamily, OperatorSpec};

pub const R_MIN: f64 = 1.0 / 512.0;

/// Profile on a cap with the usual test grid; larger M for n > 3 where the
/// truncation error decays like M^(−2/(n−2)).
pub fn profile(domain: &SphericalDomain1D, n: usize, nodes: usize) -> BlowupProfile {
    let m_max = if n == 3 { 1e6 } else { 1e12 };
    solve_profile(domain, n, &TruncationSchedule::doubling(1e2, m_max, 1e-8), &ProfileGrid::power(nodes, 3.0)).unwrap()
}

/// Meridian solve settings for the π/3 cone fixtures. The angular floor is
/// the distance where the cone solution reaches the last truncation level.
pub fn theorem_config(n: usize) -> SolveConfig {
    let (schedule, floor) = if n == 3 { (vec![1e2, 1e3, 1e4, 1e5, 1e6], 1e-12) } else { (vec![1e4, 1e6, 1e8, 1e10, 1e12], 1e-6) };
    SolveConfig {
        schedule,
        schedule_tol: 1e-4,
        newton_tol: 1e-10,
        max_newton: 60,
        bracket: (0.5, 2.0),
        agreement_tol: 1e-3,
        mesh: MeshSpec { dt: std::f64::consts::LN_2 / 16.0, angular_nodes: 64, grading: Grading::LogLayer { floor, blend: 0.05 } },
    }
}

pub fn conformal(n: usize) -> OperatorSpec {
    conformal_operator(&MetricFamily::conformal_quadratic(n, 0.3).unwrap()).unwrap()
}

pub fn theorem_domain(r_max: f64) -> DomainSpec2D {
    DomainSpec2D::cap_cone(std::f64::consts::FRAC_PI_3, R_MIN, r_max)
}

/// Field of the low-data solve and whether the bracket met its tolerance.
pub fn theorem_solve(n: usize, r_max: f64) -> (SolutionField, bool) {
    match solve(&theorem_domain(r_max), &conformal(n), n, &theorem_config(n)) {
        Ok(f) => (f, true),
        Err(BlowupError::Localization { field, .. }) => (*field, false),
        Err(e) => panic!("solve n={n}: {e}"),
    }
}

/// Cone reference on the solve's own angular nodes at the final truncation level.
pub fn theorem_reference(n: usize, field: &SolutionField) -> BlowupProfile {
    let dom = theorem_domain(field.r_max);
    let mesh = MeridianMesh::build(&dom, &theorem_config(n)).unwrap();
    cone_profile(&dom, &mesh, n, 0.0, field.m).unwrap()
}

/// max |u_high − u_low|/u_low over interior rows with r ≤ r_cut and gap ≥ 0.05.
pub fn bracket_width(field: &SolutionField, r_cut: f64) -> f64 {
    let b = field.bracket.as_ref().expect("meridian solves carry a bracket");
    (field.n_ang..field.u.len())
        .filter(|&i| field.r[i] <= r_cut * (1.0 + 1e-12) && field.gap[i] >= 0.05)
        .map(|i| (b.high_values[i] - field.u[i]).abs() / field.u[i])
        .fold(0.0, f64::max)
}

/// Laplacian half-space fixture: power-graded angular nodes resolve the bulk
/// well, and M ≤ 1e3 already puts the truncation error below 1e-6 there.
pub fn halfspace_config(angular_nodes: usize) -> SolveConfig {
    SolveConfig {
        schedule: vec![1e2, 1e3],
        mesh: MeshSpec { angular_nodes, grading: Grading::Power { exponent: 3.0 }, ..theorem_config(3).mesh },
        ..theorem_config(3)
    }
}

pub fn low_field(r: Result<SolutionField, BlowupError>) -> SolutionField {
    match r {
        Ok(f) => f,
        Err(BlowupError::Localization { field, .. }) => *field,
        Err(e) => panic!("{e}"),
    }
}
