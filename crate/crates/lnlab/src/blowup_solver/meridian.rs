//! Newton solve for W = r^((n−2)/2)u on (t = ln r, η) with θ = lo + ηB(t).
//!
//! The cone solution of an exact cone is t-independent in these variables,
//! and the angular stencil matches the profile solver, so W = g solves the
//! discrete Laplacian problem to rounding.

use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;

use super::{Bracket, BlowupError, DomainShape, DomainSpec2D, Reduction, SolutionField, SolveConfig};
use crate::cap_profile::{exponents, solve_profile_on, BlowupProfile, ProfileGrid, SphericalDomain1D};
use crate::grid::{one_sided_d1, stencils, Stencil3};
use crate::linalg::BandMatrix;
use crate::operator::{Coeffs, OperatorSpec};

/// Tensor mesh: uniform t = ln r, graded η ∈ [0, 1].
#[derive(Debug, Clone)]
pub struct MeridianMesh {
    pub t: Vec<f64>,
    pub eta: Vec<f64>,
    pub dt: f64,
}

impl MeridianMesh {
    pub fn build(domain: &DomainSpec2D, config: &SolveConfig) -> Result<Self, BlowupError> {
        let (t0, t1) = (domain.r_min.ln(), domain.r_max.ln());
        // whole steps per octave when the span is a whole number of octaves,
        // so that dyadic annulus edges fall on nodes
        let octaves = (t1 - t0) / std::f64::consts::LN_2;
        let steps = if (octaves - octaves.round()).abs() < 1e-9 && octaves.round() >= 1.0 {
            (std::f64::consts::LN_2 / config.mesh.dt).round().max(1.0) as usize * octaves.round() as usize
        } else {
            ((t1 - t0) / config.mesh.dt).ceil() as usize
        };
        let nt = steps.max(4) + 1;
        let dt = (t1 - t0) / (nt - 1) as f64;
        let mut t: Vec<f64> = (0..nt).map(|k| t0 + k as f64 * dt).collect();
        t[nt - 1] = t1;
        let grid = ProfileGrid { nodes: config.mesh.angular_nodes, grading: config.mesh.grading };
        let eta = match &domain.shape {
            DomainShape::CapCone { .. } => {
                let th0 = domain.theta_b(0.0).0;
                grid.place(&SphericalDomain1D::cap(th0))?.iter().map(|v| v / th0).collect()
            }
            DomainShape::Wedge { lo, hi } => {
                grid.place(&SphericalDomain1D::arc(*lo, *hi))?.iter().map(|v| (v - lo) / (hi - lo)).collect::<Vec<f64>>()
            }
        };
        let mut eta: Vec<f64> = eta;
        eta[0] = 0.0;
        *eta.last_mut().unwrap() = 1.0;
        Ok(Self { t, eta, dt })
    }

    /// (lo, B) of the angular map θ = lo + ηB at radius r.
    pub fn angular_map(domain: &DomainSpec2D, r: f64) -> (f64, f64) {
        match &domain.shape {
            DomainShape::CapCone { .. } => (0.0, domain.theta_b(r).0),
            DomainShape::Wedge { lo, hi } => (*lo, hi - lo),
        }
    }

    /// Angular nodes at radius r.
    pub fn thetas_at(&self, domain: &DomainSpec2D, r: f64) -> Vec<f64> {
        let (lo, b) = Self::angular_map(domain, r);
        self.eta.iter().map(|e| lo + e * b).collect()
    }
}

/// 1-D domain of the cross-section at radius r.
fn section(domain: &DomainSpec2D, r: f64) -> SphericalDomain1D {
    match &domain.shape {
        DomainShape::CapCone { .. } => SphericalDomain1D::cap(domain.theta_b(r).0),
        DomainShape::Wedge { lo, hi } => SphericalDomain1D::arc(*lo, *hi),
    }
}

/// Cone profile on the mesh's angular nodes at radius r.
pub fn cone_profile(domain: &DomainSpec2D, mesh: &MeridianMesh, n: usize, r: f64, m: f64) -> Result<BlowupProfile, BlowupError> {
    let th = mesh.thetas_at(domain, r);
    Ok(solve_profile_on(&section(domain, r), n, &th, m)?)
}

/// Euclidean distance from the meridian point (r, θ) to the lateral boundary.
fn lateral_distance(domain: &DomainSpec2D, r: f64, theta: f64) -> f64 {
    match &domain.shape {
        DomainShape::Wedge { lo, hi } => r * (theta - lo).min(hi - theta).min(FRAC_PI_2).max(0.0).sin(),
        DomainShape::CapCone { .. } if domain.is_exact_cone() => {
            r * (domain.theta_b(0.0).0 - theta).min(FRAC_PI_2).max(0.0).sin()
        }
        DomainShape::CapCone { .. } => {
            // closest point on the curve (ρ sin θ_b(ρ), ρ cos θ_b(ρ)); sample then golden section
            let (ps, pz) = (r * theta.sin(), r * theta.cos());
            let rho_max = domain.r_max * 1.5;
            let dist = |rho: f64| {
                let tb = domain.theta_b(rho.min(domain.r_max)).0;
                ((rho * tb.sin() - ps).powi(2) + (rho * tb.cos() - pz).powi(2)).sqrt()
            };
            let samples = 2000;
            let (mut best, mut arg) = (f64::INFINITY, 0usize);
            for i in 0..=samples {
                let v = dist(rho_max * i as f64 / samples as f64);
                if v < best {
                    best = v;
                    arg = i;
                }
            }
            let h = rho_max / samples as f64;
            let (mut a, mut b) = ((arg as f64 - 1.0).max(0.0) * h, ((arg + 1) as f64 * h).min(rho_max));
            let gr = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let c = b - gr * (b - a);
                let d = a + gr * (b - a);
                if dist(c) < dist(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best.min(dist(0.5 * (a + b)))
        }
    }
}

/// Coefficients of the equation in (t, η): [C_tt, C_tη, C_ηη, C_t, C_η, C_0].
#[allow(clippy::too_many_arguments)]
fn pushforward(co: &Coeffs, m: usize, a: f64, r: f64, theta: f64, eta: f64, b: f64, bt: f64, btt: f64) -> [f64; 6] {
    let (s, z) = (r * theta.sin(), r * theta.cos());
    let r2 = r * r;
    let r4 = r2 * r2;
    let mut x = vec![0.0; m];
    x[0] = s;
    x[m - 1] = z;
    let gr: Vec<f64> = x.iter().map(|v| v / r).collect();
    let mut gt = vec![0.0; m];
    gt[0] = z / r2;
    gt[m - 1] = -s / r2;
    let quad = |u: &[f64], v: &[f64]| {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                acc += u[i] * co.a[(i, j)] * v[j];
            }
        }
        acc
    };
    let arr = quad(&gr, &gr);
    let art = quad(&gr, &gt);
    let att = quad(&gt, &gt);
    // a : ∇²r with ∇²r = (I − x̂x̂ᵀ)/r
    let mut a_hr = 0.0;
    for i in 0..m {
        for j in 0..m {
            let h = (if i == j { 1.0 } else { 0.0 } - gr[i] * gr[j]) / r;
            a_hr += co.a[(i, j)] * h;
        }
    }
    // a : ∇²θ
    let mut a_ht = co.a[(0, 0)] * (-2.0 * s * z / r4) + co.a[(m - 1, m - 1)] * (2.0 * s * z / r4);
    a_ht += (co.a[(0, m - 1)] + co.a[(m - 1, 0)]) * (s * s - z * z) / r4;
    for k in 1..m - 1 {
        a_ht += co.a[(k, k)] * z / (r2 * s);
    }
    let b_r: f64 = (0..m).map(|i| co.b[i] * gr[i]).sum();
    let b_t: f64 = (0..m).map(|i| co.b[i] * gt[i]).sum();
    let beta_r = a_hr + b_r;
    let beta_t = a_ht + b_t;
    let p_tt = arr;
    let p_tth = 2.0 * r * art;
    let p_thth = r2 * att;
    let p_t = -(2.0 * a + 1.0) * arr + r * beta_r;
    let p_th = -2.0 * a * r * art + r2 * beta_t;
    let p_0 = a * (a + 1.0) * arr - a * r * beta_r + r2 * co.c;
    let eta_t = -eta * bt / b;
    let eta_tt = eta * (2.0 * bt * bt / (b * b) - btt / b);
    let eta_tth = -bt / (b * b);
    [
        p_tt,
        2.0 * eta_t * p_tt + p_tth / b,
        eta_t * eta_t * p_tt + p_tth * eta_t / b + p_thth / (b * b),
        p_t,
        eta_tt * p_tt + p_tth * eta_tth + p_t * eta_t + p_th / b,
        p_0,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Interior,
    Dirichlet,
    Axis,
}

struct Discretization {
    nt: usize,
    ne: usize,
    rows: Vec<Row>,
    lin: BandMatrix,
    cn: f64,
    p: f64,
    a: f64,
    r: Vec<f64>,
    theta: Vec<f64>,
    d: Vec<f64>,
    gap: Vec<f64>,
    diag_scale: Vec<f64>,
}

fn discretize(domain: &DomainSpec2D, op: &OperatorSpec, n: usize, mesh: &MeridianMesh) -> Discretization {
    let (a, cn, p) = exponents(n);
    let (nt, ne) = (mesh.t.len(), mesh.eta.len());
    let m = match domain.reduction() {
        Reduction::CrossSection => 2,
        _ => n,
    };
    let st: Vec<Stencil3> = stencils(&mesh.eta);
    let axis_w = one_sided_d1(mesh.eta[0], mesh.eta[1], mesh.eta[2]);
    let meridian = domain.reduction() == Reduction::Meridian;
    let total = nt * ne;
    let mut rows = vec![Row::Interior; total];
    for k in 0..nt {
        for j in 0..ne {
            let i = k * ne + j;
            rows[i] = if k == 0 || k == nt - 1 || j == ne - 1 {
                Row::Dirichlet
            } else if j == 0 {
                if meridian {
                    Row::Axis
                } else {
                    Row::Dirichlet
                }
            } else {
                Row::Interior
            };
        }
    }
    // node geometry and pushed-forward coefficients
    let node_data: Vec<(f64, f64, f64, f64, [f64; 6])> = (0..total)
        .into_par_iter()
        .map(|i| {
            let (k, j) = (i / ne, i % ne);
            let r = mesh.t[k].exp();
            let (lo, b) = MeridianMesh::angular_map(domain, r);
            let eta = mesh.eta[j];
            let theta = lo + eta * b;
            let gap = match &domain.shape {
                DomainShape::CapCone { .. } => b - theta,
                DomainShape::Wedge { lo, hi } => (theta - lo).min(hi - theta),
            };
            let d = lateral_distance(domain, r, theta);
            let coef = if rows[i] == Row::Interior {
                let (_, d1, d2) = domain.theta_b(r);
                let (bt, btt) = match &domain.shape {
                    DomainShape::CapCone { .. } => (r * d1, r * d1 + r * r * d2),
                    DomainShape::Wedge { .. } => (0.0, 0.0),
                };
                let co = if meridian {
                    let mut x = vec![0.0; n];
                    x[0] = r * theta.sin();
                    x[n - 1] = r * theta.cos();
                    op.coeffs(&x)
                } else {
                    Coeffs { a: nalgebra::DMatrix::identity(2, 2), b: nalgebra::DVector::zeros(2), c: 0.0 }
                };
                pushforward(&co, m, a, r, theta, eta, b, bt, btt)
            } else {
                [0.0; 6]
            };
            (r, theta, d, gap, coef)
        })
        .collect();
    let dt = mesh.dt;
    let band = ne + 1;
    let mut lin = BandMatrix::zeros(total, band, band);
    let mut diag_scale = vec![1.0; total];
    for k in 0..nt {
        for j in 0..ne {
            let i = k * ne + j;
            match rows[i] {
                Row::Dirichlet => lin.add(i, i, 1.0),
                Row::Axis => {
                    for q in 0..3 {
                        lin.add(i, i + q, axis_w[q]);
                    }
                }
                Row::Interior => {
                    let c = node_data[i].4;
                    let s = st[j];
                    let (up, dn) = (i + ne, i - ne);
                    lin.add(i, up, c[0] / (dt * dt) + c[3] / (2.0 * dt));
                    lin.add(i, dn, c[0] / (dt * dt) - c[3] / (2.0 * dt));
                    lin.add(i, i, -2.0 * c[0] / (dt * dt) + c[5]);
                    for q in 0..3 {
                        let col = i + q - 1;
                        lin.add(i, col, c[2] * s.d2[q] + c[4] * s.d1[q]);
                        lin.add(i, up + q - 1, c[1] * s.d1[q] / (2.0 * dt));
                        lin.add(i, dn + q - 1, -c[1] * s.d1[q] / (2.0 * dt));
                    }
                    diag_scale[i] = (2.0 * c[0] / (dt * dt)).abs() + (c[2] * s.d2[1]).abs() + c[5].abs();
                }
            }
        }
    }
    let mut out = Discretization {
        nt,
        ne,
        rows,
        lin,
        cn,
        p,
        a,
        r: vec![],
        theta: vec![],
        d: vec![],
        gap: vec![],
        diag_scale,
    };
    for (r, th, d, gap, _) in node_data {
        out.r.push(r);
        out.theta.push(th);
        out.d.push(d);
        out.gap.push(gap);
    }
    out
}

impl Discretization {
    fn residual(&self, w: &[f64], data: &[f64]) -> Vec<f64> {
        let mut f = self.lin.mul_vec(w);
        for (i, fi) in f.iter_mut().enumerate() {
            match self.rows[i] {
                Row::Interior => *fi -= self.cn * w[i].powf(self.p),
                Row::Dirichlet => *fi -= data[i],
                Row::Axis => {}
            }
        }
        f
    }

    fn scaled_norm(&self, w: &[f64], f: &[f64]) -> f64 {
        (0..w.len())
            .map(|i| {
                let s = match self.rows[i] {
                    Row::Interior => self.cn * w[i].powf(self.p) + self.diag_scale[i] * w[i] + 1.0,
                    _ => 1.0 + w[i].abs(),
                };
                (f[i] / s).abs()
            })
            .fold(0.0, f64::max)
    }

    fn newton(&self, mut w: Vec<f64>, data: &[f64], m: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>, BlowupError> {
        let mut f = self.residual(&w, data);
        let mut res = self.scaled_norm(&w, &f);
        let mut trace = vec![res];
        for _ in 0..max_iter {
            let mut jac = self.lin.clone();
            for i in 0..w.len() {
                if self.rows[i] == Row::Interior {
                    jac.add(i, i, -self.cn * self.p * w[i].powf(self.p - 1.0));
                }
            }
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let dw = jac.solve(&rhs)?;
            let mut lam = 1.0;
            let mut accepted = None;
            while lam > 1e-12 {
                let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + lam * b).collect();
                if trial.iter().all(|v| *v > 0.0 && v.is_finite()) {
                    let ft = self.residual(&trial, data);
                    let rt = self.scaled_norm(&trial, &ft);
                    if rt < res || lam < 1.0 / 1024.0 {
                        accepted = Some((trial, ft, rt));
                        break;
                    }
                }
                lam *= 0.5;
            }
            let Some((trial, ft, rt)) = accepted else {
                return Err(BlowupError::Newton { m, iterations: trace.len(), trace });
            };
            let step = w.iter().zip(&trial).map(|(o, v)| ((v - o) / v).abs()).fold(0.0, f64::max);
            w = trial;
            f = ft;
            res = rt;
            trace.push(res);
            if step < tol {
                return Ok(w);
            }
        }
        Err(BlowupError::Newton { m, iterations: trace.len(), trace })
    }

    /// Nodes used for schedule convergence and bracketing: r ≤ r_max/4,
    /// angular gap ≥ 0.05, away from the inner cut.
    fn region(&self, r_max: f64) -> Vec<usize> {
        (0..self.r.len())
            .filter(|&i| {
                let k = i / self.ne;
                k > 0 && self.r[i] <= r_max / 4.0 * (1.0 + 1e-12) && self.gap[i] >= 0.05
            })
            .collect()
    }
}

fn check_inputs(domain: &DomainSpec2D, op: &OperatorSpec, n: usize, config: &SolveConfig) -> Result<(), BlowupError> {
    domain.validate()?;
    config.validate()?;
    match domain.reduction() {
        Reduction::Meridian => {
            if op.n != n {
                return Err(BlowupError::Operator(format!("operator dimension {} differs from n = {n}", op.n)));
            }
            if op.radius < domain.r_max {
                return Err(BlowupError::Operator(format!("validity ball {} does not cover r_max {}", op.radius, domain.r_max)));
            }
            if !op.is_axisymmetric() {
                return Err(BlowupError::Operator(format!("{} is not axisymmetric", op.label)));
            }
        }
        Reduction::CrossSection => {
            if n != 3 || !op.is_laplacian() {
                return Err(BlowupError::Operator("cross-section solves support the Laplacian with n = 3".into()));
            }
        }
        Reduction::Radial => unreachable!(),
    }
    Ok(())
}

/// One truncation sweep with outer data `fac`·(cone reference).
pub fn solve_single(domain: &DomainSpec2D, op: &OperatorSpec, n: usize, config: &SolveConfig, fac: f64) -> Result<SolutionField, BlowupError> {
    check_inputs(domain, op, n, config)?;
    let mesh = MeridianMesh::build(domain, config)?;
    let disc = discretize(domain, op, n, &mesh);
    let (nt, ne) = (disc.nt, disc.ne);
    let region = disc.region(domain.r_max);
    let mut history = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut w_last = Vec::new();
    let mut m_last = 0.0;
    for &m in &config.schedule {
        let g_in = cone_profile(domain, &mesh, n, domain.r_min, m)?.g;
        let g_out = if domain.is_exact_cone() { g_in.clone() } else { cone_profile(domain, &mesh, n, domain.r_max, m)?.g };
        let mut data = vec![0.0; nt * ne];
        let mut w0 = vec![0.0; nt * ne];
        for k in 0..nt {
            for j in 0..ne {
                let i = k * ne + j;
                data[i] = if k == 0 {
                    g_in[j]
                } else if k == nt - 1 {
                    (fac * g_out[j]).min(m)
                } else {
                    m
                };
                if j == ne - 1 || (j == 0 && domain.reduction() == Reduction::CrossSection) {
                    data[i] = m;
                }
                // supersolution start (2r/d)^a, capped at M
                let sd = (disc.d[i] / disc.r[i]).clamp(0.0, 1.0);
                w0[i] = match disc.rows[i] {
                    Row::Dirichlet => data[i],
                    _ => {
                        if sd > 0.0 {
                            (2.0 / sd).powf(disc.a).min(m)
                        } else {
                            m
                        }
                    }
                };
            }
        }
        let w = disc.newton(w0, &data, m, config.newton_tol, config.max_newton)?;
        let change = prev.as_ref().map(|old| region.iter().map(|&i| (w[i] / old[i] - 1.0).abs()).fold(0.0, f64::max));
        log::debug!("{}: M = {m:e}, interior change {change:?}", domain.label);
        history.push((m, change));
        prev = Some(w.clone());
        w_last = w;
        m_last = m;
        if matches!(change, Some(c) if c < config.schedule_tol) {
            break;
        }
    }
    let u: Vec<f64> = w_last.iter().zip(&disc.r).map(|(w, r)| w * r.powf(-disc.a)).collect();
    Ok(SolutionField {
        n,
        reduction: domain.reduction(),
        label: domain.label.clone(),
        operator: op.label.clone(),
        n_rad: nt,
        n_ang: ne,
        r: disc.r,
        theta: disc.theta,
        u,
        d: disc.d,
        gap: disc.gap,
        m: m_last,
        r_min: domain.r_min,
        r_max: domain.r_max,
        history,
        bracket: None,
        outside_theorem: !domain.is_exact_cone(),
    })
}

/// Low- and high-data solves; the low-data field carries the bracket. A
/// bracket wider than the agreement tolerance is a localization error that
/// still carries the field.
pub fn solve(domain: &DomainSpec2D, op: &OperatorSpec, n: usize, config: &SolveConfig) -> Result<SolutionField, BlowupError> {
    let (lo, hi) = config.bracket;
    let (low, high) = rayon::join(
        || solve_single(domain, op, n, config, lo),
        || solve_single(domain, op, n, config, hi),
    );
    let (mut low, high) = (low?, high?);
    let mut width: f64 = 0.0;
    for i in 0..low.u.len() {
        let k = i / low.n_ang;
        if k > 0 && low.in_report_region(i) && low.gap[i] >= 0.05 {
            width = width.max((high.u[i] - low.u[i]).abs() / low.u[i]);
        }
    }
    low.bracket = Some(Bracket { low: lo, high: hi, high_values: high.u, width });
    if width > config.agreement_tol {
        return Err(BlowupError::Localization { width, tol: config.agreement_tol, field: Box::new(low) });
    }
    Ok(low)
}
