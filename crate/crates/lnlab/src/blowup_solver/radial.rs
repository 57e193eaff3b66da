//! Radial truncated problem u'' + (n−1)u'/ρ = c_n u^p on a ball, u(R) = M.

use serde::{Deserialize, Serialize};

use super::{exact_ball_radial, BlowupError, Reduction, SolutionField};
use crate::cap_profile::exponents;
use crate::grid::{log_layer, stencil};
use crate::linalg::solve_tridiagonal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallConfig {
    pub n: usize,
    pub radius: f64,
    pub m: f64,
    pub nodes: usize,
    /// smallest positive wall distance; None matches it to M^(−2/(n−2))
    pub floor: Option<f64>,
    pub blend: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl BallConfig {
    pub fn new(n: usize, radius: f64, m: f64, nodes: usize) -> Self {
        Self { n, radius, m, nodes, floor: None, blend: 0.05, newton_tol: 1e-12, max_newton: 100 }
    }

    fn floor(&self) -> f64 {
        let a = (self.n as f64 - 2.0) / 2.0;
        self.floor.unwrap_or_else(|| self.m.powf(-1.0 / a))
    }

    /// ρ nodes: 0 at the centre, R at the wall.
    pub fn nodes(&self) -> Result<Vec<f64>, BlowupError> {
        if self.n < 3 || !(self.radius > 0.0) || !(self.m > 0.0) || self.nodes < 8 || !(self.blend > 0.0) {
            return Err(BlowupError::Config(format!("invalid ball configuration {self:?}")));
        }
        let floor = self.floor();
        if !(floor > 0.0 && floor < self.radius / 4.0) {
            return Err(BlowupError::Config(format!("wall floor {floor} must lie in (0, R/4)")));
        }
        let d = log_layer(self.radius, floor, self.blend, self.nodes - 1);
        let mut rho: Vec<f64> = d.iter().rev().map(|d| self.radius - d).collect();
        rho[0] = 0.0;
        rho.push(self.radius);
        Ok(rho)
    }
}

/// Discrete Δv − c_n v^p at interior and centre nodes of a radial mesh
/// (wall entry zero).
pub fn radial_defect(n: usize, rho: &[f64], v: &[f64]) -> Vec<f64> {
    let (_, cn, p) = exponents(n);
    let nf = n as f64;
    let k = rho.len();
    let mut out = vec![0.0; k];
    out[0] = 2.0 * nf * (v[1] - v[0]) / (rho[1] * rho[1]) - cn * v[0].powf(p);
    for i in 1..k - 1 {
        let s = stencil(rho[i] - rho[i - 1], rho[i + 1] - rho[i]);
        let mut lap = 0.0;
        for q in 0..3 {
            lap += (s.d2[q] + (nf - 1.0) / rho[i] * s.d1[q]) * v[i + q - 1];
        }
        out[i] = lap - cn * v[i].powf(p);
    }
    out
}

/// Newton solve of the truncated radial problem, started from min(M, u_R),
/// which is a supersolution.
pub fn solve_ball(cfg: &BallConfig) -> Result<SolutionField, BlowupError> {
    let rho = cfg.nodes()?;
    let k = rho.len();
    let (_, cn, p) = exponents(cfg.n);
    let nf = cfg.n as f64;
    let mut u: Vec<f64> = rho[..k - 1].iter().map(|r| exact_ball_radial(cfg.n, cfg.radius, *r).map(|v| v.min(cfg.m))).collect::<Result<_, _>>()?;
    u.push(cfg.m);
    // linear part in tridiagonal form
    let (mut sub, mut dia, mut sup) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    dia[0] = -2.0 * nf / (rho[1] * rho[1]);
    sup[0] = 2.0 * nf / (rho[1] * rho[1]);
    for i in 1..k - 1 {
        let s = stencil(rho[i] - rho[i - 1], rho[i + 1] - rho[i]);
        let w: Vec<f64> = (0..3).map(|q| s.d2[q] + (nf - 1.0) / rho[i] * s.d1[q]).collect();
        sub[i] = w[0];
        dia[i] = w[1];
        sup[i] = w[2];
    }
    dia[k - 1] = 1.0;
    let residual = |u: &[f64]| -> Vec<f64> {
        let mut f = radial_defect(cfg.n, &rho, u);
        f[k - 1] = u[k - 1] - cfg.m;
        f
    };
    let scaled = |u: &[f64], f: &[f64]| -> f64 {
        (0..k).map(|i| (f[i] / (cn * u[i].powf(p) + dia[i].abs() * u[i] + 1.0)).abs()).fold(0.0, f64::max)
    };
    let mut f = residual(&u);
    let mut res = scaled(&u, &f);
    let mut trace = vec![res];
    for _ in 0..cfg.max_newton {
        let jd: Vec<f64> = (0..k).map(|i| if i < k - 1 { dia[i] - cn * p * u[i].powf(p - 1.0) } else { 1.0 }).collect();
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let du = solve_tridiagonal(&sub, &jd, &sup, &rhs)?;
        let mut lam = 1.0;
        let next = loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + lam * b).collect();
            if trial.iter().all(|v| *v > 0.0 && v.is_finite()) {
                let ft = residual(&trial);
                let rt = scaled(&trial, &ft);
                if rt < res || lam < 1.0 / 1024.0 {
                    break Some((trial, ft, rt));
                }
            }
            lam *= 0.5;
            if lam < 1e-12 {
                break None;
            }
        };
        let Some((trial, ft, rt)) = next else {
            return Err(BlowupError::Newton { m: cfg.m, iterations: trace.len(), trace });
        };
        let step = u.iter().zip(&trial).map(|(o, v)| ((v - o) / v).abs()).fold(0.0, f64::max);
        u = trial;
        f = ft;
        res = rt;
        trace.push(res);
        if step < cfg.newton_tol {
            let d: Vec<f64> = rho.iter().map(|r| cfg.radius - r).collect();
            return Ok(SolutionField {
                n: cfg.n,
                reduction: Reduction::Radial,
                label: format!("ball(R={})", cfg.radius),
                operator: "laplacian".into(),
                n_rad: k,
                n_ang: 1,
                theta: vec![0.0; k],
                gap: d.clone(),
                r: rho,
                u,
                d,
                m: cfg.m,
                r_min: 0.0,
                r_max: cfg.radius,
                history: vec![(cfg.m, None)],
                bracket: None,
                outside_theorem: false,
            });
        }
    }
    Err(BlowupError::Newton { m: cfg.m, iterations: trace.len(), trace })
}
