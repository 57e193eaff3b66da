//! Separated cone profiles g(θ) on one-dimensional spherical domains.
//!
//! The cone solution is u_V = r^(−a) g(θ) with a = (n−2)/2. On the polar
//! sphere g solves g'' + (n−2)cot θ g' − a²g = ¼n(n−2)g^p; on a circle arc
//! (cross-section of a wedge × R) it solves g'' + a²g = ¼n(n−2)g^p.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::grid::{graded, log_layer, one_sided_d1, stencils, Refine};
use crate::linalg::{solve_tridiagonal, LinalgError};
use crate::spline::{CubicSpline, EndSlope};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid domain {label}: {reason}")]
    Domain { label: String, reason: String },
    #[error("invalid truncation schedule: {0}")]
    Schedule(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("Newton diverged at M = {m:e} after {iterations} iterations; residual trace {trace:?}")]
    Divergence { m: f64, iterations: usize, trace: Vec<f64> },
    #[error("angle {theta} is outside the reliable interpolation range of {label}")]
    Interpolation { label: String, theta: f64 },
    #[error("rho/d ratio {value:e} outside [1e-6, 1e6]")]
    Bound { value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    PolarSphere,
    CircleArc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndCondition {
    Blowup,
    RegularPole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalDomain1D {
    pub geometry: Geometry,
    pub lo: f64,
    pub hi: f64,
    pub lo_end: EndCondition,
    pub hi_end: EndCondition,
    pub label: String,
}

impl SphericalDomain1D {
    /// Geodesic cap {θ < θ₀} around the north pole.
    pub fn cap(theta0: f64) -> Self {
        Self {
            geometry: Geometry::PolarSphere,
            lo: 0.0,
            hi: theta0,
            lo_end: EndCondition::RegularPole,
            hi_end: EndCondition::Blowup,
            label: format!("cap({theta0:.6})"),
        }
    }

    /// Band θ₁ < θ < θ₂.
    pub fn band(t1: f64, t2: f64) -> Self {
        Self {
            geometry: Geometry::PolarSphere,
            lo: t1,
            hi: t2,
            lo_end: EndCondition::Blowup,
            hi_end: EndCondition::Blowup,
            label: format!("band({t1:.6},{t2:.6})"),
        }
    }

    /// Sphere minus the closed cap of radius r around the north pole.
    pub fn cap_complement(r: f64) -> Self {
        Self {
            geometry: Geometry::PolarSphere,
            lo: r,
            hi: PI,
            lo_end: EndCondition::Blowup,
            hi_end: EndCondition::RegularPole,
            label: format!("cap-complement({r:.6})"),
        }
    }

    /// Circle arc (lo, hi) with blow-up at both ends.
    pub fn arc(lo: f64, hi: f64) -> Self {
        Self {
            geometry: Geometry::CircleArc,
            lo,
            hi,
            lo_end: EndCondition::Blowup,
            hi_end: EndCondition::Blowup,
            label: format!("arc({lo:.6},{hi:.6})"),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |reason: &str| {
            Err(ProfileError::Domain { label: self.label.clone(), reason: reason.to_string() })
        };
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo >= self.hi {
            return bad("need lo < hi");
        }
        match self.geometry {
            Geometry::PolarSphere => {
                if self.lo < 0.0 || self.hi > PI {
                    return bad("polar-sphere interval must lie in [0, pi]");
                }
                if self.lo_end == EndCondition::RegularPole && self.lo != 0.0 {
                    return bad("regular pole only at theta = 0");
                }
                if self.hi_end == EndCondition::RegularPole && self.hi != PI {
                    return bad("regular pole only at theta = pi");
                }
            }
            Geometry::CircleArc => {
                if self.hi - self.lo >= 2.0 * PI {
                    return bad("circle-arc length must be below 2 pi");
                }
                if self.lo_end == EndCondition::RegularPole || self.hi_end == EndCondition::RegularPole {
                    return bad("circle-arc has no poles");
                }
            }
        }
        if self.lo_end == EndCondition::RegularPole && self.hi_end == EndCondition::RegularPole {
            return bad("at least one blow-up endpoint is required");
        }
        Ok(())
    }

    pub fn refine(&self) -> Refine {
        match (self.lo_end, self.hi_end) {
            (EndCondition::Blowup, EndCondition::Blowup) => Refine::Both,
            (EndCondition::Blowup, _) => Refine::Lo,
            (_, EndCondition::Blowup) => Refine::Hi,
            _ => Refine::None,
        }
    }

    /// Arc distance to the blow-up part of the boundary.
    pub fn dist(&self, theta: f64) -> f64 {
        let mut d = f64::INFINITY;
        if self.lo_end == EndCondition::Blowup {
            d = d.min(theta - self.lo);
        }
        if self.hi_end == EndCondition::Blowup {
            d = d.min(self.hi - theta);
        }
        d.max(0.0)
    }
}

/// Node placement toward blow-up endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Grading {
    /// distance ∝ s^exponent
    Power { exponent: f64 },
    /// spacing ∝ d/(1 + d/blend) down to a first interior distance `floor`
    LogLayer { floor: f64, blend: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub nodes: usize,
    pub grading: Grading,
}

impl ProfileGrid {
    pub fn power(nodes: usize, exponent: f64) -> Self {
        Self { nodes, grading: Grading::Power { exponent } }
    }

    pub fn log_layer(nodes: usize, floor: f64, blend: f64) -> Self {
        Self { nodes, grading: Grading::LogLayer { floor, blend } }
    }

    pub fn nodes_for(&self, domain: &SphericalDomain1D) -> Result<Vec<f64>, ProfileError> {
        if self.nodes < 200 {
            return Err(ProfileError::Grid(format!("need at least 200 nodes, got {}", self.nodes)));
        }
        self.place(domain)
    }

    /// Node placement without the minimum-count rule (used for 2-D meshes).
    pub fn place(&self, domain: &SphericalDomain1D) -> Result<Vec<f64>, ProfileError> {
        if self.nodes < 5 {
            return Err(ProfileError::Grid(format!("need at least 5 nodes, got {}", self.nodes)));
        }
        match self.grading {
            Grading::Power { exponent } => {
                if !(exponent >= 1.0) {
                    return Err(ProfileError::Grid(format!("grading exponent {exponent} < 1")));
                }
                Ok(graded(domain.lo, domain.hi, self.nodes, exponent, domain.refine()))
            }
            Grading::LogLayer { floor, blend } => {
                if !(floor > 0.0 && blend > 0.0) {
                    return Err(ProfileError::Grid("log-layer floor and blend must be positive".into()));
                }
                let (lo, hi) = (domain.lo, domain.hi);
                let len = hi - lo;
                let layer = |dmax: f64, count: usize| -> Result<Vec<f64>, ProfileError> {
                    if floor >= dmax {
                        return Err(ProfileError::Grid(format!("floor {floor} exceeds {dmax}")));
                    }
                    let mut d = vec![0.0];
                    d.extend(log_layer(dmax, floor, blend, count - 1));
                    Ok(d)
                };
                Ok(match domain.refine() {
                    Refine::Hi => layer(len, self.nodes)?.iter().rev().map(|d| hi - d).collect(),
                    Refine::Lo => layer(len, self.nodes)?.iter().map(|d| lo + d).collect(),
                    Refine::Both => {
                        let m = self.nodes / 2;
                        let half = layer(len / 2.0, m + 1)?;
                        let mut x: Vec<f64> = half.iter().map(|d| lo + d).collect();
                        x.extend(half.iter().rev().skip(1).map(|d| hi - d));
                        let mid = m;
                        x[mid] = lo + len / 2.0;
                        x
                    }
                    Refine::None => graded(lo, hi, self.nodes, 1.0, Refine::None),
                })
            }
        }
    }
}

/// Increasing truncation levels; the sweep stops once the interior relative
/// change between consecutive levels drops below `tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    pub levels: Vec<f64>,
    pub tol: f64,
}

impl TruncationSchedule {
    pub fn doubling(m0: f64, m_max: f64, tol: f64) -> Self {
        let mut levels = vec![m0];
        while *levels.last().unwrap() * 2.0 <= m_max * (1.0 + 1e-12) {
            let next = levels.last().unwrap() * 2.0;
            levels.push(next);
        }
        Self { levels, tol }
    }

    pub fn single(m: f64) -> Self {
        Self { levels: vec![m], tol: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.levels.is_empty() {
            return Err(ProfileError::Schedule("empty".into()));
        }
        if self.levels.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(ProfileError::Schedule("levels must be positive".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ProfileError::Schedule("levels must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupProfile {
    pub domain: SphericalDomain1D,
    pub n: usize,
    pub theta: Vec<f64>,
    pub g: Vec<f64>,
    pub rho: Vec<f64>,
    pub dg: Vec<f64>,
    pub d2g: Vec<f64>,
    /// Truncation level of the returned profile.
    pub m: f64,
    /// max_j |residual_j|·d_j^((n+2)/2+2) over interior nodes.
    pub residual: f64,
    /// Interior relative change at the last schedule step (None for a single level).
    pub m_change: Option<f64>,
    pub history: Vec<(f64, Option<f64>)>,
}

/// Parameters shared by the profile and the meridian solver.
pub fn exponents(n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let a = (nf - 2.0) / 2.0;
    let cn = nf * (nf - 2.0) / 4.0;
    let p = (nf + 2.0) / (nf - 2.0);
    (a, cn, p)
}

/// Interior mask used for convergence checks: arc distance ≥ 0.05.
fn interior_change(domain: &SphericalDomain1D, theta: &[f64], old: &[f64], new: &[f64]) -> f64 {
    theta
        .iter()
        .zip(old.iter().zip(new))
        .filter(|(t, _)| domain.dist(**t) >= 0.05)
        .map(|(_, (o, v))| (v / o - 1.0).abs())
        .fold(0.0, f64::max)
}

struct Problem<'a> {
    domain: &'a SphericalDomain1D,
    theta: &'a [f64],
    n: usize,
    m: f64,
    k0: f64,
    k1: Vec<f64>,
    st: Vec<crate::grid::Stencil3>,
}

impl<'a> Problem<'a> {
    fn new(domain: &'a SphericalDomain1D, theta: &'a [f64], n: usize, m: f64) -> Self {
        let (a, _, _) = exponents(n);
        let (k0, k1) = match domain.geometry {
            Geometry::PolarSphere => (
                -a * a,
                theta.iter().map(|t| (n as f64 - 2.0) * t.cos() / t.sin()).collect(),
            ),
            Geometry::CircleArc => (a * a, vec![0.0; theta.len()]),
        };
        Self { domain, theta, n, m, k0, k1, st: stencils(theta) }
    }

    /// Residual vector and tridiagonal Jacobian (pole rows already reduced).
    fn assemble(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (_, cn, p) = exponents(self.n);
        let n = g.len();
        let mut f = vec![0.0; n];
        let mut sub = vec![0.0; n];
        let mut dia = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 1..n - 1 {
            let s = self.st[i];
            let k1 = self.k1[i];
            let w = [s.d2[0] + k1 * s.d1[0], s.d2[1] + k1 * s.d1[1], s.d2[2] + k1 * s.d1[2]];
            f[i] = w[0] * g[i - 1] + w[1] * g[i] + w[2] * g[i + 1] + self.k0 * g[i] - cn * g[i].powf(p);
            sub[i] = w[0];
            dia[i] = w[1] + self.k0 - cn * p * g[i].powf(p - 1.0);
            sup[i] = w[2];
        }
        let t = self.theta;
        match self.domain.lo_end {
            EndCondition::Blowup => {
                f[0] = g[0] - self.m;
                dia[0] = 1.0;
            }
            EndCondition::RegularPole => {
                let w = one_sided_d1(t[0], t[1], t[2]);
                let r = w[2] / sup[1];
                f[0] = w[0] * g[0] + w[1] * g[1] + w[2] * g[2] - r * f[1];
                dia[0] = w[0] - r * sub[1];
                sup[0] = w[1] - r * dia[1];
            }
        }
        match self.domain.hi_end {
            EndCondition::Blowup => {
                f[n - 1] = g[n - 1] - self.m;
                dia[n - 1] = 1.0;
            }
            EndCondition::RegularPole => {
                let w = one_sided_d1(t[n - 1], t[n - 2], t[n - 3]);
                let r = w[2] / sub[n - 2];
                f[n - 1] = w[0] * g[n - 1] + w[1] * g[n - 2] + w[2] * g[n - 3] - r * f[n - 2];
                dia[n - 1] = w[0] - r * sup[n - 2];
                sub[n - 1] = w[1] - r * dia[n - 2];
            }
        }
        (f, sub, dia, sup)
    }

    /// Scaled residual: each PDE row divided by the magnitude of its terms.
    fn scaled_norm(&self, g: &[f64], f: &[f64]) -> f64 {
        let (_, cn, p) = exponents(self.n);
        let n = g.len();
        let mut r: f64 = 0.0;
        for i in 0..n {
            let s = if i == 0 || i == n - 1 {
                1.0 + g[i].abs()
            } else {
                cn * g[i].powf(p) + self.st[i].d2[1].abs() * g[i] + 1.0
            };
            r = r.max((f[i] / s).abs());
        }
        r
    }

    fn init(&self) -> Vec<f64> {
        let (a, _, _) = exponents(self.n);
        self.theta
            .iter()
            .map(|&t| {
                let d = self.domain.dist(t).min(PI / 2.0);
                if d <= 0.0 {
                    self.m
                } else {
                    (2.0f64.powf(a) * d.sin().powf(-a)).min(self.m)
                }
            })
            .collect()
    }

    fn newton(&self, max_iter: usize) -> Result<Vec<f64>, ProfileError> {
        let mut g = self.init();
        let (mut f, mut sub, mut dia, mut sup) = self.assemble(&g);
        let mut res = self.scaled_norm(&g, &f);
        let mut trace = vec![res];
        for _ in 0..max_iter {
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let dg = solve_tridiagonal(&sub, &dia, &sup, &rhs)?;
            let mut lam = 1.0;
            let mut accepted = None;
            while lam > 1e-12 {
                let trial: Vec<f64> = g.iter().zip(&dg).map(|(a, b)| a + lam * b).collect();
                if trial.iter().all(|v| *v > 0.0 && v.is_finite()) {
                    let asm = self.assemble(&trial);
                    let r = self.scaled_norm(&trial, &asm.0);
                    if r < res || lam < 1.0 / 1024.0 {
                        accepted = Some((trial, asm, r));
                        break;
                    }
                }
                lam *= 0.5;
            }
            let Some((trial, asm, r)) = accepted else {
                return Err(ProfileError::Divergence { m: self.m, iterations: trace.len(), trace });
            };
            let step = g
                .iter()
                .zip(&trial)
                .map(|(o, v)| ((v - o) / v).abs())
                .fold(0.0, f64::max);
            g = trial;
            (f, sub, dia, sup) = asm;
            res = r;
            trace.push(res);
            if step < 1e-13 || res < 1e-15 {
                return Ok(g);
            }
        }
        Err(ProfileError::Divergence { m: self.m, iterations: trace.len(), trace })
    }

    fn scaled_residual(&self, g: &[f64]) -> f64 {
        let (f, ..) = self.assemble(g);
        let e = (self.n as f64 + 2.0) / 2.0 + 2.0;
        let n = g.len();
        (1..n - 1)
            .map(|i| f[i].abs() * self.domain.dist(self.theta[i]).min(1.0).powf(e))
            .fold(0.0, f64::max)
    }
}

/// Solves the profile at a single truncation level on the given nodes.
pub fn solve_profile_on(
    domain: &SphericalDomain1D,
    n: usize,
    theta: &[f64],
    m: f64,
) -> Result<BlowupProfile, ProfileError> {
    domain.validate()?;
    if n < 3 {
        return Err(ProfileError::Domain { label: domain.label.clone(), reason: "n must be >= 3".into() });
    }
    if domain.geometry == Geometry::CircleArc && n != 3 {
        return Err(ProfileError::Domain {
            label: domain.label.clone(),
            reason: "circle-arc geometry is defined for n = 3".into(),
        });
    }
    let prob = Problem::new(domain, theta, n, m);
    let g = prob.newton(200)?;
    Ok(finish(domain, n, theta, g, m, &prob, None, vec![(m, None)]))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    domain: &SphericalDomain1D,
    n: usize,
    theta: &[f64],
    g: Vec<f64>,
    m: f64,
    prob: &Problem,
    m_change: Option<f64>,
    history: Vec<(f64, Option<f64>)>,
) -> BlowupProfile {
    let e = -2.0 / (n as f64 - 2.0);
    let rho = g.iter().map(|v| v.powf(e)).collect();
    let (dg, d2g) = crate::grid::derivatives(theta, &g);
    let residual = prob.scaled_residual(&g);
    BlowupProfile {
        domain: domain.clone(),
        n,
        theta: theta.to_vec(),
        g,
        rho,
        dg,
        d2g,
        m,
        residual,
        m_change,
        history,
    }
}

/// Runs the truncation schedule until the interior relative change drops
/// below the schedule tolerance and returns the last profile.
pub fn solve_profile(
    domain: &SphericalDomain1D,
    n: usize,
    schedule: &TruncationSchedule,
    grid: &ProfileGrid,
) -> Result<BlowupProfile, ProfileError> {
    domain.validate()?;
    schedule.validate()?;
    let theta = grid.nodes_for(domain)?;
    let mut prev: Option<BlowupProfile> = None;
    let mut history = Vec::new();
    for &m in &schedule.levels {
        let cur = solve_profile_on(domain, n, &theta, m)?;
        let change = prev.as_ref().map(|p| interior_change(domain, &theta, &p.g, &cur.g));
        history.push((m, change));
        log::debug!("profile {} n={} M={:e} change={:?}", domain.label, n, m, change);
        let done = matches!(change, Some(c) if c < schedule.tol);
        prev = Some(BlowupProfile { m_change: change, ..cur });
        if done {
            break;
        }
    }
    let mut out = prev.expect("schedule is non-empty");
    out.history = history;
    Ok(out)
}

impl BlowupProfile {
    pub fn a(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    pub fn dist(&self, j: usize) -> f64 {
        self.domain.dist(self.theta[j])
    }

    fn spline(&self) -> CubicSpline {
        let lg: Vec<f64> = self.g.iter().map(|v| v.ln()).collect();
        let left = match self.domain.lo_end {
            EndCondition::RegularPole => EndSlope::Clamped(0.0),
            EndCondition::Blowup => EndSlope::Natural,
        };
        let right = match self.domain.hi_end {
            EndCondition::RegularPole => EndSlope::Clamped(0.0),
            EndCondition::Blowup => EndSlope::Natural,
        };
        CubicSpline::new(&self.theta, &lg, left, right)
    }

    /// Spline-interpolated g at θ; refuses the first cell next to a blow-up end.
    pub fn g_at(&self, theta: f64) -> Result<f64, ProfileError> {
        let n = self.theta.len();
        let err = || ProfileError::Interpolation { label: self.domain.label.clone(), theta };
        if !(theta >= self.domain.lo && theta <= self.domain.hi) {
            return Err(err());
        }
        if self.domain.lo_end == EndCondition::Blowup && theta <= self.theta[1] {
            return Err(err());
        }
        if self.domain.hi_end == EndCondition::Blowup && theta >= self.theta[n - 2] {
            return Err(err());
        }
        Ok(self.spline().eval(theta).exp())
    }

    /// Batch interpolation with one spline construction.
    pub fn g_at_many(&self, thetas: &[f64]) -> Result<Vec<f64>, ProfileError> {
        let sp = self.spline();
        let n = self.theta.len();
        thetas
            .iter()
            .map(|&theta| {
                let bad = !(theta >= self.domain.lo && theta <= self.domain.hi)
                    || (self.domain.lo_end == EndCondition::Blowup && theta <= self.theta[1])
                    || (self.domain.hi_end == EndCondition::Blowup && theta >= self.theta[n - 2]);
                if bad {
                    Err(ProfileError::Interpolation { label: self.domain.label.clone(), theta })
                } else {
                    Ok(sp.eval(theta).exp())
                }
            })
            .collect()
    }

    /// Largest |Δρ/Δθ| over the grid (boundedness check for the Lipschitz property).
    pub fn rho_lipschitz(&self) -> f64 {
        self.theta
            .windows(2)
            .zip(self.rho.windows(2))
            .map(|(t, r)| ((r[1] - r[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    }
}

/// u_V(r, θ) = r^(−a) g(θ).
pub fn cone_solution(profile: &BlowupProfile, r: f64, theta: f64) -> Result<f64, ProfileError> {
    if !(r > 0.0) {
        return Err(ProfileError::Interpolation { label: profile.domain.label.clone(), theta });
    }
    Ok(r.powf(-profile.a()) * profile.g_at(theta)?)
}

/// (min, max) of ρ/d_Σ over nodes with 0 < d_Σ ≤ 0.2.
pub fn check_rho_bounds(profile: &BlowupProfile) -> Result<(f64, f64), ProfileError> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (j, rho) in profile.rho.iter().enumerate() {
        let d = profile.dist(j);
        if d > 0.0 && d <= 0.2 {
            let v = rho / d;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    for v in [lo, hi] {
        if !(v >= 1e-6 && v <= 1e6) {
            return Err(ProfileError::Bound { value: v });
        }
    }
    Ok((lo, hi))
}
