//! First eigenpair of L_Σ = −Δ_θ + n(n+2)/(4ρ²) on axisymmetric domains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cap_profile::{BlowupProfile, EndCondition, Geometry};
use crate::linalg::{LinalgError, SymTridiagLdl};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("inverse iteration stagnated after {iterations} steps; Rayleigh trace tail {trace:?}")]
    Stagnation { iterations: usize, trace: Vec<f64> },
    #[error("computed eigenvalue {0} is not positive; check the potential sign")]
    Assembly(f64),
    #[error("test function has zero norm")]
    ZeroNorm,
    #[error("test function length {got} does not match grid length {expected}")]
    Length { expected: usize, got: usize },
    #[error("test function must vanish at blow-up endpoints")]
    Boundary,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// μ₁ > 2: ratio error ~ |x|²
    Alpha2,
    /// μ₁ = 2: ratio error ~ |x|²|ln|x||
    Log,
    /// μ₁ < 2: ratio error ~ |x|^μ₁
    AlphaMu,
}

pub const LOG_REGIME_TOL: f64 = 1e-6;

pub fn regime_for(mu1: f64) -> Regime {
    if (mu1 - 2.0).abs() <= LOG_REGIME_TOL {
        Regime::Log
    } else if mu1 > 2.0 {
        Regime::Alpha2
    } else {
        Regime::AlphaMu
    }
}

/// Predicted bound form for |u/u_V − 1|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "form")]
pub enum RateForm {
    Power { exponent: f64 },
    SquareLog,
}

impl RateForm {
    /// Exponent used for one-sided acceptance (the log form counts as 2).
    pub fn exponent(&self) -> f64 {
        match self {
            RateForm::Power { exponent } => *exponent,
            RateForm::SquareLog => 2.0,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RateForm::Power { exponent } if exponent.fract() == 0.0 => format!("C|x|^{exponent}"),
            RateForm::Power { exponent } => format!("C|x|^{exponent:.4}"),
            RateForm::SquareLog => "C|x|^2|ln|x||".to_string(),
        }
    }
}

pub fn regime_form(regime: Regime, mu1: f64) -> RateForm {
    match regime {
        Regime::Alpha2 => RateForm::Power { exponent: 2.0 },
        Regime::Log => RateForm::SquareLog,
        Regime::AlphaMu => RateForm::Power { exponent: mu1 },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    pub n: usize,
    pub lambda1: f64,
    pub theta: Vec<f64>,
    /// L²(Σ)-normalized, positive in the interior.
    pub phi: Vec<f64>,
    pub mu1: f64,
    pub regime: Regime,
    /// Fitted exponent in φ₁ ≈ Cρ^ν̂ over ρ ∈ [1e-3, 1e-1].
    pub nu_hat: f64,
    pub rayleigh_trace: Vec<f64>,
}

/// |S^k|, the area of the unit k-sphere.
pub fn sphere_area(k: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut area = if k % 2 == 0 { 2.0 } else { two_pi };
    let mut j = if k % 2 == 0 { 0 } else { 1 };
    while j < k {
        j += 2;
        area *= two_pi / (j as f64 - 1.0);
    }
    area
}

/// Quadratic forms of the lumped piecewise-linear discretization.
struct Forms {
    free: Vec<usize>,
    /// stiffness diag/off on the full grid
    kd: Vec<f64>,
    ko: Vec<f64>,
    mass: Vec<f64>,
    pot: Vec<f64>,
    measure: f64,
}

fn weight(geometry: Geometry, n: usize, theta: f64) -> f64 {
    match geometry {
        Geometry::PolarSphere => theta.sin().powi(n as i32 - 2),
        Geometry::CircleArc => 1.0,
    }
}

fn forms(profile: &BlowupProfile) -> Forms {
    let th = &profile.theta;
    let nn = th.len();
    let dom = &profile.domain;
    let n = profile.n;
    let w: Vec<f64> = th.iter().map(|&t| weight(dom.geometry, n, t)).collect();
    let mut kd = vec![0.0; nn];
    let mut ko = vec![0.0; nn - 1];
    let mut mass = vec![0.0; nn];
    for k in 0..nn - 1 {
        let h = th[k + 1] - th[k];
        let wb = 0.5 * (w[k] + w[k + 1]);
        kd[k] += wb / h;
        kd[k + 1] += wb / h;
        ko[k] = -wb / h;
        mass[k] += 0.5 * h * wb;
        mass[k + 1] += 0.5 * h * wb;
    }
    let mut rho = profile.rho.clone();
    // near-wall node: linear extrapolation of ρ ≈ c·d from the next node
    if dom.lo_end == EndCondition::Blowup {
        let (d1, d2) = (th[1] - th[0], th[2] - th[0]);
        rho[1] = rho[2] * d1 / d2;
    }
    if dom.hi_end == EndCondition::Blowup {
        let (d1, d2) = (th[nn - 1] - th[nn - 2], th[nn - 1] - th[nn - 3]);
        rho[nn - 2] = rho[nn - 3] * d1 / d2;
    }
    let nf = n as f64;
    let pot: Vec<f64> = rho.iter().map(|r| nf * (nf + 2.0) / (4.0 * r * r)).collect();
    let free: Vec<usize> = (0..nn)
        .filter(|&j| {
            !((j == 0 && dom.lo_end == EndCondition::Blowup)
                || (j == nn - 1 && dom.hi_end == EndCondition::Blowup))
        })
        .collect();
    let measure = match dom.geometry {
        Geometry::PolarSphere => sphere_area(n - 2),
        Geometry::CircleArc => 1.0,
    };
    Forms { free, kd, ko, mass, pot, measure }
}

impl Forms {
    fn energy(&self, phi: &[f64]) -> (f64, f64) {
        let nn = phi.len();
        let mut num = 0.0;
        for j in 0..nn {
            num += (self.kd[j] + self.mass[j] * self.pot[j]) * phi[j] * phi[j];
            if j + 1 < nn {
                num += 2.0 * self.ko[j] * phi[j] * phi[j + 1];
            }
        }
        let den: f64 = (0..nn).map(|j| self.mass[j] * phi[j] * phi[j]).sum();
        (num, den)
    }
}

/// Rayleigh quotient (∫|∇φ|² + n(n+2)/(4ρ²)φ²)/∫φ² with the same quadrature
/// as the eigensolver.
pub fn rayleigh(profile: &BlowupProfile, phi: &[f64]) -> Result<f64, SpectralError> {
    let nn = profile.theta.len();
    if phi.len() != nn {
        return Err(SpectralError::Length { expected: nn, got: phi.len() });
    }
    let dom = &profile.domain;
    if (dom.lo_end == EndCondition::Blowup && phi[0] != 0.0)
        || (dom.hi_end == EndCondition::Blowup && phi[nn - 1] != 0.0)
    {
        return Err(SpectralError::Boundary);
    }
    let f = forms(profile);
    let (num, den) = f.energy(phi);
    if !(den > 0.0) {
        return Err(SpectralError::ZeroNorm);
    }
    Ok(num / den)
}

/// Shifted inverse iteration with Sturm-count guarded shifts.
pub fn first_eigenpair(profile: &BlowupProfile) -> Result<EigenResult, SpectralError> {
    let f = forms(profile);
    let nf = f.free.len();
    let sq: Vec<f64> = f.free.iter().map(|&j| f.mass[j].sqrt()).collect();
    // symmetric matrix S = D^{-1/2} A D^{-1/2} on the free nodes
    let diag: Vec<f64> = f
        .free
        .iter()
        .enumerate()
        .map(|(k, &j)| (f.kd[j] + f.mass[j] * f.pot[j]) / (sq[k] * sq[k]))
        .collect();
    let off: Vec<f64> = (0..nf - 1).map(|k| f.ko[f.free[k]] / (sq[k] * sq[k + 1])).collect();
    let rq = |y: &[f64]| -> f64 {
        let mut num = 0.0;
        for k in 0..nf {
            num += diag[k] * y[k] * y[k];
            if k + 1 < nf {
                num += 2.0 * off[k] * y[k] * y[k + 1];
            }
        }
        num / y.iter().map(|v| v * v).sum::<f64>()
    };
    let mut y: Vec<f64> = vec![1.0; nf];
    let mut sigma = 0.0;
    let mut fac = SymTridiagLdl::factor(&diag, &off, sigma)?;
    let mut trace = Vec::new();
    let mut lam_prev = f64::INFINITY;
    let max_iter = 500;
    for it in 0..max_iter {
        let mut z = fac.solve(&y);
        let nrm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z.iter_mut().for_each(|v| *v /= nrm);
        y = z;
        let lam = rq(&y);
        trace.push(lam);
        if !(lam > 0.0) {
            return Err(SpectralError::Assembly(lam));
        }
        if (lam - lam_prev).abs() < 1e-10 * lam.abs() {
            break;
        }
        if it + 1 == max_iter {
            let tail = trace[trace.len().saturating_sub(8)..].to_vec();
            return Err(SpectralError::Stagnation { iterations: max_iter, trace: tail });
        }
        // tighten the shift toward λ while it stays below λ₁
        if (lam - lam_prev).abs() < 1e-3 * lam.abs() {
            let cand = lam - 10.0 * (lam_prev - lam).abs().max(1e-12 * lam);
            if cand > sigma {
                if let Ok(c) = SymTridiagLdl::factor(&diag, &off, cand) {
                    if c.negative_count() == 0 {
                        sigma = cand;
                        fac = c;
                    }
                }
            }
        }
        lam_prev = lam;
    }
    // back to φ = D^{-1/2} y on the full grid
    let nn = profile.theta.len();
    let mut phi = vec![0.0; nn];
    for (k, &j) in f.free.iter().enumerate() {
        phi[j] = y[k] / sq[k];
    }
    let s: f64 = phi.iter().sum();
    if s < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    let (num, den) = f.energy(&phi);
    let lambda1 = num / den;
    if !(lambda1 > 0.0) {
        return Err(SpectralError::Assembly(lambda1));
    }
    let norm = (f.measure * den).sqrt();
    phi.iter_mut().for_each(|v| *v /= norm);
    let mu1 = mu_from_lambda(profile.domain.geometry, profile.n, lambda1);
    let regime = regime_for(mu1);
    let nu_hat = fit_decay(&profile.rho, &phi);
    Ok(EigenResult {
        n: profile.n,
        lambda1,
        theta: profile.theta.clone(),
        phi,
        mu1,
        regime,
        nu_hat,
        rayleigh_trace: trace,
    })
}

/// μ₁ = √(a² + λ₁) on the polar sphere. On a circle arc (planar cross-section
/// of a wedge) the indicial root of the linearized planar problem is a + √λ₁.
pub fn mu_from_lambda(geometry: Geometry, n: usize, lambda1: f64) -> f64 {
    let a = (n as f64 - 2.0) / 2.0;
    match geometry {
        Geometry::PolarSphere => (a * a + lambda1).sqrt(),
        Geometry::CircleArc => a + lambda1.sqrt(),
    }
}

/// Least-squares slope of ln φ against ln ρ over ρ ∈ [1e-3, 1e-1].
fn fit_decay(rho: &[f64], phi: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = rho
        .iter()
        .zip(phi)
        .filter(|(r, p)| **r >= 1e-3 && **r <= 1e-1 && **p > 0.0)
        .map(|(r, p)| (r.ln(), p.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

pub fn regime_exponent(result: &EigenResult) -> RateForm {
    regime_form(result.regime, result.mu1)
}

/// Smallest C with ρ|φ'| + ρ²|φ''| ≤ Cρ^ν̂ at every node with ρ ≤ 0.5.
pub fn decay_constant(profile: &BlowupProfile, eig: &EigenResult) -> f64 {
    let (d1, d2) = crate::grid::derivatives(&eig.theta, &eig.phi);
    let nn = eig.theta.len();
    (1..nn - 1)
        .filter(|&j| profile.rho[j] <= 0.5 && profile.dist(j) > 0.0)
        .map(|j| {
            let r = profile.rho[j];
            (r * d1[j].abs() + r * r * d2[j].abs()) / r.powf(eig.nu_hat)
        })
        .fold(0.0, f64::max)
}
