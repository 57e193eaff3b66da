//! Truncated blow-up solves of Lu = ¼n(n−2)u^((n+2)/(n−2)) on 2-D reductions
//! (meridian plane, planar cross-section) and on balls.

mod meridian;
mod radial;

pub use meridian::{cone_profile, solve, solve_single, MeridianMesh};
pub use radial::{radial_defect, solve_ball, BallConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cap_profile::{Grading, ProfileError};
use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum BlowupError {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid solve configuration: {0}")]
    Config(String),
    #[error("operator not supported here: {0}")]
    Operator(String),
    #[error("Newton diverged at M = {m:e} after {iterations} iterations; residual trace {trace:?}")]
    Newton { m: f64, iterations: usize, trace: Vec<f64> },
    #[error("outer-data bracket width {width:e} exceeds {tol:e} on r <= r_max/4")]
    Localization { width: f64, tol: f64, field: Box<SolutionField> },
    #[error("truncation fields are not monotone: node {node} drops by {drop:e}")]
    Monotone { node: usize, drop: f64 },
    #[error("growth ratio degenerate: {0}")]
    Growth(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// d^(−(n−2)/2), the blow-up solution on the half-space at distance d.
pub fn exact_halfspace(n: usize, d: f64) -> Result<f64, BlowupError> {
    if !(d > 0.0) {
        return Err(BlowupError::Domain(format!("distance {d} must be positive")));
    }
    Ok(d.powf(-(n as f64 - 2.0) / 2.0))
}

/// u_R(x) = (2R/(R² − |x|²))^((n−2)/2) on the ball B_R(0).
pub fn exact_ball(n: usize, radius: f64, x: &[f64]) -> Result<f64, BlowupError> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    exact_ball_radial(n, radius, r2.sqrt())
}

pub fn exact_ball_radial(n: usize, radius: f64, rho: f64) -> Result<f64, BlowupError> {
    if !(rho < radius) {
        return Err(BlowupError::Domain(format!("|x| = {rho} is not inside the ball of radius {radius}")));
    }
    Ok((2.0 * radius / (radius * radius - rho * rho)).powf((n as f64 - 2.0) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    Meridian,
    CrossSection,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DomainShape {
    /// Axisymmetric domain {θ < θ_b(r)}, θ_b(r) = Σ c_k r^k, in the meridian plane.
    CapCone { theta_b: Vec<f64> },
    /// Planar wedge lo < θ < hi: cross-section of wedge × R (n = 3).
    Wedge { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec2D {
    pub shape: DomainShape,
    pub r_min: f64,
    pub r_max: f64,
    pub label: String,
}

impl DomainSpec2D {
    pub fn cap_cone(theta0: f64, r_min: f64, r_max: f64) -> Self {
        Self {
            shape: DomainShape::CapCone { theta_b: vec![theta0] },
            r_min,
            r_max,
            label: format!("cap-cone({theta0:.6})"),
        }
    }

    pub fn wedge(lo: f64, hi: f64, r_min: f64, r_max: f64) -> Self {
        Self { shape: DomainShape::Wedge { lo, hi }, r_min, r_max, label: format!("wedge({lo:.6},{hi:.6})") }
    }

    pub fn reduction(&self) -> Reduction {
        match self.shape {
            DomainShape::CapCone { .. } => Reduction::Meridian,
            DomainShape::Wedge { .. } => Reduction::CrossSection,
        }
    }

    /// θ_b and its first two r-derivatives.
    pub fn theta_b(&self, r: f64) -> (f64, f64, f64) {
        match &self.shape {
            DomainShape::CapCone { theta_b } => {
                let mut v = 0.0;
                let mut d1 = 0.0;
                let mut d2 = 0.0;
                for (k, c) in theta_b.iter().enumerate() {
                    let kf = k as f64;
                    v += c * r.powi(k as i32);
                    if k >= 1 {
                        d1 += c * kf * r.powi(k as i32 - 1);
                    }
                    if k >= 2 {
                        d2 += c * kf * (kf - 1.0) * r.powi(k as i32 - 2);
                    }
                }
                (v, d1, d2)
            }
            DomainShape::Wedge { hi, lo } => (hi - lo, 0.0, 0.0),
        }
    }

    /// Whether the lateral boundary is an exact cone (θ_b constant).
    pub fn is_exact_cone(&self) -> bool {
        match &self.shape {
            DomainShape::CapCone { theta_b } => theta_b.iter().skip(1).all(|c| *c == 0.0),
            DomainShape::Wedge { .. } => true,
        }
    }

    pub fn validate(&self) -> Result<(), BlowupError> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max <= 1.0) {
            return Err(BlowupError::Domain(format!("need 0 < r_min < r_max <= 1, got {} and {}", self.r_min, self.r_max)));
        }
        match &self.shape {
            DomainShape::CapCone { theta_b } => {
                if theta_b.is_empty() {
                    return Err(BlowupError::Domain("empty boundary curve".into()));
                }
                for k in 0..=200 {
                    let r = self.r_max * k as f64 / 200.0;
                    let t = self.theta_b(r).0;
                    if !(t > 0.0 && t < std::f64::consts::PI) {
                        return Err(BlowupError::Domain(format!("theta_b({r}) = {t} outside (0, pi)")));
                    }
                }
            }
            DomainShape::Wedge { lo, hi } => {
                if !(lo < hi && hi - lo < std::f64::consts::PI && *lo >= -std::f64::consts::PI && *hi <= std::f64::consts::PI) {
                    return Err(BlowupError::Domain("wedge needs lo < hi with opening below pi".into()));
                }
            }
        }
        Ok(())
    }
}

/// Mesh parameters: uniform step in t = ln r and graded nodes in the angular direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub dt: f64,
    pub angular_nodes: usize,
    pub grading: Grading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// strictly increasing truncation levels
    pub schedule: Vec<f64>,
    /// stop the schedule once the interior relative change is below this
    pub schedule_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// outer data multiples of the cone reference (low, high)
    pub bracket: (f64, f64),
    pub agreement_tol: f64,
    pub mesh: MeshSpec,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), BlowupError> {
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[1] <= w[0]) || self.schedule[0] <= 0.0 {
            return Err(BlowupError::Config("schedule must be positive and strictly increasing".into()));
        }
        if !(self.bracket.0 > 0.0 && self.bracket.0 < self.bracket.1) {
            return Err(BlowupError::Config("bracket needs 0 < low < high".into()));
        }
        for (name, v) in [("schedule_tol", self.schedule_tol), ("newton_tol", self.newton_tol), ("agreement_tol", self.agreement_tol), ("dt", self.mesh.dt)] {
            if !(v > 0.0) {
                return Err(BlowupError::Config(format!("{name} must be positive")));
            }
        }
        if self.mesh.angular_nodes < 8 {
            return Err(BlowupError::Config("need at least 8 angular nodes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bracket {
    pub low: f64,
    pub high: f64,
    /// node values of the high-data solve
    pub high_values: Vec<f64>,
    /// max |u_high − u_low|/u_low over the reporting region
    pub width: f64,
}

/// Discrete solution with node coordinates and distance metadata. Nodes are
/// stored radial index major: node = k·n_ang + j.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionField {
    pub n: usize,
    pub reduction: Reduction,
    pub label: String,
    pub operator: String,
    pub n_rad: usize,
    pub n_ang: usize,
    /// |x| for 2-D reductions, distance to the centre for balls
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    /// Euclidean distance to the blow-up boundary
    pub d: Vec<f64>,
    /// angular distance to the blow-up boundary (or d for balls)
    pub gap: Vec<f64>,
    pub m: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub history: Vec<(f64, Option<f64>)>,
    pub bracket: Option<Bracket>,
    pub outside_theorem: bool,
}

impl SolutionField {
    /// Nodes of the reporting region r ≤ r_max/4 (2-D reductions).
    pub fn in_report_region(&self, i: usize) -> bool {
        self.r[i] <= self.r_max / 4.0 * (1.0 + 1e-12)
    }
}

/// Cauchy increments of a truncation sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub increments: Vec<f64>,
    /// consecutive increment ratios
    pub ratios: Vec<f64>,
    pub geometric: bool,
}

/// Checks u_i ≤ u_(i+1) + slack nodewise along the sweep and reports the
/// interior increments max|u_(i+1) − u_i| over nodes with gap ≥ 0.05.
pub fn monotone_check(fields: &[&SolutionField]) -> Result<MonotoneReport, BlowupError> {
    if fields.len() < 2 {
        return Err(BlowupError::Config("need at least two fields".into()));
    }
    let nn = fields[0].u.len();
    if fields.iter().any(|f| f.u.len() != nn) {
        return Err(BlowupError::Config("fields live on different meshes".into()));
    }
    let mut increments = Vec::new();
    for w in fields.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut inc: f64 = 0.0;
        for i in 0..nn {
            // the slack is relative so that rounding at large values is not flagged
            let drop = a.u[i] - b.u[i];
            if drop > 1e-10 * (1.0 + a.u[i].abs()) {
                return Err(BlowupError::Monotone { node: i, drop });
            }
            if a.gap[i] >= 0.05 {
                inc = inc.max(-drop);
            }
        }
        increments.push(inc);
    }
    let ratios: Vec<f64> = increments.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let geometric = !ratios.is_empty() && ratios.iter().all(|r| *r < 1.0);
    Ok(MonotoneReport { increments, ratios, geometric })
}

/// min and max of d^((n−2)/2)u over nodes with d ≤ 0.1 (and r ≤ r_max/4 on
/// 2-D reductions). Nodes inside the truncation layer, where u is pinned near
/// M, are skipped: d ≥ 100·M^(−2/(n−2)).
pub fn growth_check(field: &SolutionField) -> Result<(f64, f64), BlowupError> {
    let a = (field.n as f64 - 2.0) / 2.0;
    let layer = 100.0 * field.m.powf(-1.0 / a);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..field.u.len() {
        let d = field.d[i];
        if d < layer || d > 0.1 {
            continue;
        }
        if field.reduction != Reduction::Radial && !field.in_report_region(i) {
            continue;
        }
        let v = d.powf(a) * field.u[i];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo.is_finite() && lo > 0.0 && hi.is_finite()) {
        return Err(BlowupError::Growth(format!("ratio range [{lo}, {hi}]")));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solutions() {
        assert!((exact_halfspace(3, 0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!((exact_halfspace(4, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((exact_halfspace(6, 0.5).unwrap() - 4.0).abs() < 1e-14);
        assert!(exact_halfspace(3, 0.0).is_err());
        assert!((exact_ball(3, 1.0, &[0.0, 0.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((exact_ball(6, 1.0, &[0.0; 6]).unwrap() - 4.0).abs() < 1e-14);
        assert!(exact_ball(3, 1.0, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn domain_validation() {
        assert!(DomainSpec2D::cap_cone(1.0, 0.5, 0.25).validate().is_err());
        assert!(DomainSpec2D::cap_cone(1.0, 0.01, 1.5).validate().is_err());
        let mut d = DomainSpec2D::cap_cone(3.0, 0.01, 1.0);
        d.shape = DomainShape::CapCone { theta_b: vec![3.0, 0.5] };
        assert!(d.validate().is_err());
        assert!(!d.is_exact_cone());
        assert!(DomainSpec2D::wedge(0.0, 1.5, 0.01, 1.0).validate().is_ok());
    }
}
