//! Pointwise certificates Lw ≤ ¼n(n−2)w^((n+2)/(n−2)) for explicit barriers,
//! with constants searched over logarithmic grids.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::cap_profile::exponents;
use crate::geometry::Jet;
use crate::operator::{halton_ball, OperatorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierForm {
    /// 2u_R on B_R(0); the search is over R
    TwiceBall,
    /// w = u* + A·u*^β + B·u*|x|² on B_1(e_n) ∩ B_R0, u* = u_1 centred at e_n
    BallCorrection,
    /// w = u_V + A₀u_V r² + k₁A₀r^((6−n)/2) + k₂A₀r^((6−n)/2)φ₁ on the
    /// half-space cone ∩ B_r0, φ₁ = cos^((n+2)/2)θ
    ConeCase1,
}

impl BarrierForm {
    pub fn label(&self) -> &'static str {
        match self {
            BarrierForm::TwiceBall => "2u_R",
            BarrierForm::BallCorrection => "u*+A u*^b+B u* r^2",
            BarrierForm::ConeCase1 => "cone case 1",
        }
    }
}

/// Search grids. Constants run over 2^k for k in `exponents`, radii over
/// 2^(−k) for k in 0..radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySearch {
    pub samples: usize,
    pub constant_exponents: (i32, i32),
    pub radii: usize,
}

impl Default for CertifySearch {
    fn default() -> Self {
        Self { samples: 4000, constant_exponents: (-4, 8), radii: 12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierCertificate {
    pub label: String,
    pub operator: String,
    pub n: usize,
    pub region: String,
    /// min over samples of (F(w) − Lw)/F(w)
    pub margin: f64,
    pub nodes: usize,
    pub constants: Vec<(String, f64)>,
    pub pass: bool,
}

fn jet_const(n: usize, c: f64) -> Jet {
    Jet { value: c, grad: DVector::zeros(n), hess: DMatrix::zeros(n, n) }
}

/// |x − c|²
fn jet_sq_dist(x: &[f64], c: &[f64]) -> Jet {
    let n = x.len();
    let d = DVector::from_iterator(n, x.iter().zip(c).map(|(a, b)| a - b));
    Jet { value: d.norm_squared(), grad: 2.0 * d, hess: 2.0 * DMatrix::identity(n, n) }
}

fn jet_coord(n: usize, x: &[f64], k: usize) -> Jet {
    let mut g = DVector::zeros(n);
    g[k] = 1.0;
    Jet { value: x[k], grad: g, hess: DMatrix::zeros(n, n) }
}

/// φ ∘ j for φ with derivatives (φ, φ', φ'') at j.value.
fn compose(j: &Jet, f: (f64, f64, f64)) -> Jet {
    Jet { value: f.0, grad: &j.grad * f.1, hess: &j.grad * j.grad.transpose() * f.2 + &j.hess * f.1 }
}

/// t ↦ c·t^e
fn power(j: &Jet, c: f64, e: f64) -> Jet {
    let t = j.value;
    compose(j, (c * t.powf(e), c * e * t.powf(e - 1.0), c * e * (e - 1.0) * t.powf(e - 2.0)))
}

fn mul(a: &Jet, b: &Jet) -> Jet {
    Jet {
        value: a.value * b.value,
        grad: &a.grad * b.value + &b.grad * a.value,
        hess: &a.hess * b.value + &a.grad * b.grad.transpose() + &b.grad * a.grad.transpose() + &b.hess * a.value,
    }
}

fn add(a: &Jet, b: &Jet, s: f64) -> Jet {
    Jet { value: a.value + s * b.value, grad: &a.grad + &b.grad * s, hess: &a.hess + &b.hess * s }
}

/// u_R centred at c: (2R/(R² − |x − c|²))^((n−2)/2)
fn jet_ball(x: &[f64], c: &[f64], radius: f64) -> Jet {
    let n = x.len();
    let a = (n as f64 - 2.0) / 2.0;
    let q = jet_sq_dist(x, c);
    let s = add(&jet_const(n, radius * radius), &q, -1.0);
    power(&s, (2.0 * radius).powf(a), -a)
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Relative defect (F(w) − Lw)/F(w) at one point.
fn defect(op: &OperatorSpec, x: &[f64], w: &Jet) -> f64 {
    let (_, cn, p) = exponents(x.len());
    let f = cn * w.value.powf(p);
    (f - op.coeffs(x).apply_jet(w)) / f
}

/// Interior samples of B_R(0) plus log-spaced wall layers along fixed directions.
fn ball_samples(n: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    let mut pts = halton_ball(n, radius, count / 2, 11);
    let dirs = halton_ball(n, 1.0, 32, 101);
    let layers = (count - count / 2) / dirs.len().max(1);
    for d in &dirs {
        let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..layers {
            let dist = radius * 10f64.powf(-6.0 + 6.0 * k as f64 / layers as f64);
            pts.push(d.iter().map(|v| v / nrm * (radius - dist)).collect());
        }
    }
    pts
}

/// Samples of B_1(e_n) ∩ B_R0(0): interior points plus layers near both the
/// sphere and the origin.
fn lens_samples(n: usize, r0: f64, count: usize) -> Vec<Vec<f64>> {
    let e = unit(n, n - 1);
    let inside = |x: &[f64]| x.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < 1.0 - 1e-12;
    let mut pts: Vec<Vec<f64>> = halton_ball(n, r0, 4 * count, 23).into_iter().filter(|x| inside(x)).take(count / 2).collect();
    let dirs = halton_ball(n, 1.0, 64, 211);
    let per = (count - pts.len()) / dirs.len().max(1);
    for d in &dirs {
        let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut u: Vec<f64> = d.iter().map(|v| v / nrm).collect();
        // point on the sphere |y − e_n| = 1 at angle set by u, inside B_R0
        u[n - 1] = u[n - 1].abs();
        for k in 0..per {
            let s = 10f64.powf(-5.0 + 5.0 * k as f64 / per as f64);
            let rad = r0 * s;
            // y on the sphere with |y| = rad: y_n = rad²/2
            let yn = rad * rad / 2.0;
            let tang = (rad * rad - yn * yn).max(0.0).sqrt();
            let tn = u[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let mut y: Vec<f64> = u[..n - 1].iter().map(|v| v / tn * tang).collect();
            y.push(yn);
            // move inward along the normal by a fraction of rad
            for frac in [1e-4, 1e-2, 0.3] {
                let nrm_in: Vec<f64> = y.iter().zip(&e).map(|(a, b)| b - a).collect();
                let z: Vec<f64> = y.iter().zip(&nrm_in).map(|(a, b)| a + frac * rad * b).collect();
                if inside(&z) && z.iter().map(|v| v * v).sum::<f64>() < r0 * r0 {
                    pts.push(z);
                }
            }
        }
    }
    pts
}

/// Samples of {x_n > 0} ∩ B_r0 with r ∈ [r0·2^(−8), r0] and θ up to the wall.
fn cone_samples(n: usize, r0: f64, count: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(count);
    let dirs = halton_ball(n, 1.0, 48, 307);
    let per = count / dirs.len();
    for d in &dirs {
        let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut u: Vec<f64> = d.iter().map(|v| v / nrm).collect();
        u[n - 1] = u[n - 1].abs().max(1e-6);
        let s = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= s);
        for k in 0..per {
            let r = r0 * 2f64.powf(-8.0 * k as f64 / per.max(1) as f64);
            pts.push(u.iter().map(|v| v * r).collect());
        }
    }
    // axis and near-wall rays
    for th in [0.0, 0.5, 1.0, 1.4, 1.55, 1.5707] {
        for k in 0..64 {
            let r = r0 * 2f64.powf(-8.0 * k as f64 / 63.0);
            let mut x = vec![0.0; n];
            x[0] = r * f64::sin(th);
            x[n - 1] = r * f64::cos(th);
            pts.push(x);
        }
    }
    pts
}

fn margin_over(op: &OperatorSpec, pts: &[Vec<f64>], w: &(dyn Fn(&[f64]) -> Jet + Sync)) -> f64 {
    pts.par_iter().map(|x| defect(op, x, &w(x))).reduce(|| f64::INFINITY, f64::min)
}

fn constants_grid(search: &CertifySearch) -> Vec<f64> {
    (search.constant_exponents.0..=search.constant_exponents.1).map(|k| 2f64.powi(k)).collect()
}

fn constant(consts: &[(String, f64)], name: &str) -> Result<f64, AnalysisError> {
    consts.iter().find(|(k, _)| k == name).map(|(_, v)| *v).ok_or_else(|| AnalysisError::Barrier(format!("missing constant {name}")))
}

/// Margin of one barrier with fixed constants on `samples` points of its
/// region; returns (margin, nodes, region).
fn evaluate(op: &OperatorSpec, form: BarrierForm, n: usize, consts: &[(String, f64)], samples: usize) -> Result<(f64, usize, String), AnalysisError> {
    let a = (n as f64 - 2.0) / 2.0;
    let origin = vec![0.0; n];
    Ok(match form {
        BarrierForm::TwiceBall => {
            let r = constant(consts, "R*")?;
            let pts = ball_samples(n, r, samples);
            let m = margin_over(op, &pts, &|x| add(&jet_const(n, 0.0), &jet_ball(x, &origin, r), 2.0));
            (m, pts.len(), format!("B_{r}(0)"))
        }
        BarrierForm::BallCorrection => {
            let (aa, bb, beta, r0) = (constant(consts, "A")?, constant(consts, "B")?, constant(consts, "beta")?, constant(consts, "R0")?);
            let e = unit(n, n - 1);
            let pts = lens_samples(n, r0, samples);
            let m = margin_over(op, &pts, &|x| {
                let us = jet_ball(x, &e, 1.0);
                let ub = power(&us, aa, beta);
                let r2 = jet_sq_dist(x, &origin);
                let w = add(&us, &ub, 1.0);
                add(&w, &mul(&us, &r2), bb)
            });
            (m, pts.len(), format!("B_1(e_n) ∩ B_{r0}(0)"))
        }
        BarrierForm::ConeCase1 => {
            let (a0, k1, k2, r0) = (constant(consts, "A0")?, constant(consts, "k1")?, constant(consts, "k2")?, constant(consts, "r0")?);
            let s = (6.0 - n as f64) / 2.0;
            let q = (n as f64 + 2.0) / 2.0;
            let pts = cone_samples(n, r0, samples);
            let m = margin_over(op, &pts, &|x| {
                let xn = jet_coord(n, x, n - 1);
                let r2 = jet_sq_dist(x, &origin);
                let uv = power(&xn, 1.0, -a);
                let rs = power(&r2, 1.0, s / 2.0);
                // r^s φ₁ = x_n^q r^(s−q)
                let rphi = mul(&power(&xn, 1.0, q), &power(&r2, 1.0, (s - q) / 2.0));
                let mut w = add(&uv, &mul(&uv, &r2), a0);
                w = add(&w, &rs, k1 * a0);
                add(&w, &rphi, k2 * a0)
            });
            (m, pts.len(), format!("{{x_n > 0}} ∩ B_{r0}(0)"))
        }
    })
}

/// Searches the barrier constants until the margin is positive. Exhausting
/// the grid returns a failing certificate with the best margin found.
pub fn certify_supersolution(op: &OperatorSpec, form: BarrierForm, n: usize, search: &CertifySearch) -> Result<BarrierCertificate, AnalysisError> {
    if op.n != n || n < 3 {
        return Err(AnalysisError::Barrier(format!("operator dimension {} for n = {n}", op.n)));
    }
    let radii: Vec<f64> = (0..search.radii).map(|k| op.radius.min(1.0) * 0.5f64.powi(k as i32)).collect();
    let grid = constants_grid(search);
    let beta = if n >= 6 { (n as f64 - 6.0) / (n as f64 - 2.0) } else { 0.0 };
    let mut candidates: Vec<Vec<(String, f64)>> = Vec::new();
    for &r in &radii {
        match form {
            BarrierForm::TwiceBall => candidates.push(vec![("R*".into(), r)]),
            BarrierForm::BallCorrection => {
                for &bb in &grid {
                    for &aa in &grid {
                        candidates.push(vec![("A".into(), aa), ("B".into(), bb), ("beta".into(), beta), ("R0".into(), r)]);
                    }
                }
            }
            BarrierForm::ConeCase1 => {
                for &a0 in &grid {
                    for &k2 in &grid {
                        for &k1 in &grid {
                            candidates.push(vec![("A0".into(), a0), ("k1".into(), k1), ("k2".into(), k2), ("r0".into(), r)]);
                        }
                    }
                }
            }
        }
    }
    let mut best: Option<BarrierCertificate> = None;
    for constants in candidates {
        let (margin, nodes, region) = evaluate(op, form, n, &constants, search.samples)?;
        let cert = BarrierCertificate {
            label: form.label().into(),
            operator: op.label.clone(),
            n,
            region,
            margin,
            nodes,
            constants,
            pass: margin > 0.0,
        };
        if cert.pass {
            return Ok(cert);
        }
        if best.as_ref().map_or(true, |b| cert.margin > b.margin) {
            best = Some(cert);
        }
    }
    best.ok_or_else(|| AnalysisError::Barrier("empty search".into()))
}

/// Margin of a found certificate re-evaluated on `samples` points.
pub fn revalidate(op: &OperatorSpec, form: BarrierForm, cert: &BarrierCertificate, samples: usize) -> Result<f64, AnalysisError> {
    Ok(evaluate(op, form, cert.n, &cert.constants, samples)?.0)
}
