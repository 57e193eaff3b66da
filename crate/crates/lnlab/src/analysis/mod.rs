//! Ratio fields against cone references, dyadic rate fits, barrier
//! certificates and theorem rows.

mod barrier;
mod report;

pub use barrier::{certify_supersolution, revalidate, BarrierCertificate, BarrierForm, CertifySearch};
pub use report::{annulus_csv, loglog_svg, markdown_report};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blowup_solver::{BlowupError, Reduction, SolutionField};
use crate::cap_profile::{BlowupProfile, ProfileError};
use crate::geometry::{DiffeoT, GeometryError};
use crate::spectral::{regime_for, regime_form, RateForm};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("fit window: {0}")]
    Window(String),
    #[error("reference does not match the field: {0}")]
    Reference(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error("barrier: {0}")]
    Barrier(String),
}

/// Cone solution the field is compared against.
#[derive(Debug, Clone, Copy)]
pub enum ConeReference<'a> {
    /// u_V = r^(−(n−2)/2) g(θ)
    Profile(&'a BlowupProfile),
    /// u_V = x_n^(−(n−2)/2); on ball fields x_n is the wall distance
    HalfSpace,
}

/// |u/u_V − 1| at the retained nodes, with the radius variable used for
/// fitting (|x| for cones, wall distance for balls).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioField {
    pub label: String,
    pub r: Vec<f64>,
    pub ratio: Vec<f64>,
}

/// Angular gap below which the ratio is contaminated by the wall layer.
pub const WALL_BAND: f64 = 0.05;

/// Ratio field on nodes with r ∈ [4 r_min, r_max/4] and angular gap ≥ 0.05.
/// For balls the radius variable is the wall distance d ∈ (0, R/4].
pub fn compare_to_cone(field: &SolutionField, reference: ConeReference, t: Option<&DiffeoT>) -> Result<RatioField, AnalysisError> {
    let n = field.n;
    let a = (n as f64 - 2.0) / 2.0;
    let mut out = RatioField { label: field.label.clone(), r: vec![], ratio: vec![] };
    if field.reduction == Reduction::Radial {
        if !matches!(reference, ConeReference::HalfSpace) || t.is_some() {
            return Err(AnalysisError::Reference("ball fields compare against the half-space in distance form".into()));
        }
        for i in 0..field.u.len() {
            let d = field.d[i];
            if d > 0.0 && d <= field.r_max / 4.0 {
                out.r.push(d);
                out.ratio.push((d.powf(a) * field.u[i] - 1.0).abs());
            }
        }
        return Ok(out);
    }
    if let Some(t) = t {
        if t.n() != n || field.reduction != Reduction::Meridian {
            return Err(AnalysisError::Reference("T acts on meridian fields of its own dimension".into()));
        }
    }
    let keep = |i: usize| field.r[i] >= 4.0 * field.r_min * (1.0 - 1e-12) && field.in_report_region(i) && field.gap[i] >= WALL_BAND;
    // reference nodes coincide with the field's angular nodes on exact cones
    let same_nodes = |i: usize, p: &BlowupProfile| {
        let j = i % field.n_ang;
        p.theta.len() == field.n_ang && (p.theta[j] - field.theta[i]).abs() <= 1e-12
    };
    for i in 0..field.u.len() {
        if !keep(i) {
            continue;
        }
        let (r, th) = (field.r[i], field.theta[i]);
        let uv = match (t, reference) {
            (None, ConeReference::Profile(p)) if same_nodes(i, p) => r.powf(-a) * p.g[i % field.n_ang],
            (None, ConeReference::Profile(p)) => r.powf(-a) * p.g_at(th)?,
            (None, ConeReference::HalfSpace) => (r * th.cos()).powf(-a),
            (Some(t), reference) => {
                let mut x = vec![0.0; n];
                x[0] = r * th.sin();
                x[n - 1] = r * th.cos();
                let y = t.apply(&x)?;
                let ry = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                match reference {
                    ConeReference::Profile(p) => ry.powf(-a) * p.g_at((y[n - 1] / ry).clamp(-1.0, 1.0).acos())?,
                    ConeReference::HalfSpace => y[n - 1].powf(-a),
                }
            }
        };
        if !(uv.is_finite() && uv > 0.0) {
            return Err(AnalysisError::Reference(format!("cone solution {uv} at node {i}")));
        }
        out.r.push(r);
        out.ratio.push((field.u[i] / uv - 1.0).abs());
    }
    Ok(out)
}

/// Dyadic annuli (r_hi 2^(−k−1), r_hi 2^(−k)] for k = 0..count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnuliSpec {
    pub r_hi: f64,
    pub count: usize,
}

impl AnnuliSpec {
    /// Annuli covering [r_lo, r_hi] with both ends powers-of-two apart.
    pub fn between(r_lo: f64, r_hi: f64) -> Self {
        Self { r_hi, count: (r_hi / r_lo).log2().round() as usize }
    }

    pub fn r_lo(&self) -> f64 {
        self.r_hi * 0.5f64.powi(self.count as i32)
    }

    pub fn drop_outer(&self) -> Self {
        Self { r_hi: self.r_hi / 2.0, count: self.count - 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    /// C r^α
    Power,
    /// C r^α |ln r|
    PowerLog,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    /// exponent of the preferred model
    pub alpha: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// (annulus upper radius, max ratio)
    pub table: Vec<(f64, f64)>,
    pub model: RateModel,
    pub power_alpha: f64,
    pub power_residual: f64,
    pub log_alpha: f64,
    pub log_residual: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, icpt, r2, (ss_res / m).sqrt())
}

/// Least-squares fit of ln(max over annulus) against ln(upper radius), and of
/// the same data against r^α|ln r|; the smaller residual wins.
pub fn fit_rate(field: &RatioField, spec: &AnnuliSpec) -> Result<RateFit, AnalysisError> {
    if spec.count < 4 {
        return Err(AnalysisError::Window(format!("{} annuli, need at least 4", spec.count)));
    }
    if !(spec.r_hi > 0.0 && spec.r_hi < 1.0) {
        return Err(AnalysisError::Window(format!("upper radius {} must lie in (0, 1)", spec.r_hi)));
    }
    let mut table = Vec::with_capacity(spec.count);
    for k in 0..spec.count {
        let hi = spec.r_hi * 0.5f64.powi(k as i32);
        let lo = hi / 2.0;
        let mut best: Option<f64> = None;
        for (r, v) in field.r.iter().zip(&field.ratio) {
            if *r > lo * (1.0 + 1e-12) && *r <= hi * (1.0 + 1e-12) {
                best = Some(best.map_or(*v, |b: f64| b.max(*v)));
            }
        }
        match best {
            Some(v) if v > 0.0 && v.is_finite() => table.push((hi, v)),
            Some(v) => return Err(AnalysisError::Window(format!("annulus ({lo:e}, {hi:e}] has max ratio {v}"))),
            None => return Err(AnalysisError::Window(format!("annulus ({lo:e}, {hi:e}] is empty"))),
        }
    }
    let lx: Vec<f64> = table.iter().map(|(r, _)| r.ln()).collect();
    let ly: Vec<f64> = table.iter().map(|(_, v)| v.ln()).collect();
    let ll: Vec<f64> = table.iter().map(|(r, v)| v.ln() - r.ln().abs().ln()).collect();
    let (pa, pc, pr2, pres) = least_squares(&lx, &ly);
    let (la, lc, lr2, lres) = least_squares(&lx, &ll);
    let (model, alpha, constant, r_squared) =
        if lres < pres { (RateModel::PowerLog, la, lc.exp(), lr2) } else { (RateModel::Power, pa, pc.exp(), pr2) };
    Ok(RateFit {
        alpha,
        constant,
        r_squared,
        window: (spec.r_lo(), spec.r_hi),
        table,
        model,
        power_alpha: pa,
        power_residual: pres,
        log_alpha: la,
        log_residual: lres,
    })
}

/// |α̂(window) − α̂(window without its outermost annulus)|.
pub fn window_stability(field: &RatioField, spec: &AnnuliSpec) -> Result<f64, AnalysisError> {
    let full = fit_rate(field, spec)?;
    let inner = fit_rate(field, &spec.drop_outer())?;
    Ok((full.alpha - inner.alpha).abs())
}

/// What the theorem predicts for a case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Prediction {
    /// conical point with indicial exponent μ₁ of the tangent cone
    Cone { mu1: f64 },
    /// smooth curved boundary: rate 1, not improvable
    Curved,
}

impl Prediction {
    pub fn form(&self) -> RateForm {
        match self {
            Prediction::Cone { mu1 } => regime_form(regime_for(*mu1), *mu1),
            Prediction::Curved => RateForm::Power { exponent: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub n: usize,
    pub predicted: f64,
    pub form: String,
    pub alpha_hat: f64,
    pub model: RateModel,
    pub window: (f64, f64),
    /// upper sharpness check (curved boundaries only)
    pub sharp: Option<bool>,
    pub outside_theorem: bool,
    pub pass: bool,
}

/// Lower slack of the one-sided rate check.
pub const RATE_SLACK: f64 = 0.2;
/// Upper bound on the fitted exponent where rate 1 is sharp.
pub const SHARP_CEILING: f64 = 1.3;

/// PASS iff α̂ ≥ predicted − 0.2, and α̂ ≤ 1.3 where rate 1 is sharp.
pub fn verify_theorem(label: &str, n: usize, prediction: Prediction, fit: &RateFit, outside_theorem: bool) -> ReportRow {
    let form = prediction.form();
    let predicted = form.exponent();
    let sharp = matches!(prediction, Prediction::Curved).then(|| fit.alpha <= SHARP_CEILING);
    let pass = fit.alpha >= predicted - RATE_SLACK && sharp.unwrap_or(true);
    ReportRow {
        label: label.to_string(),
        n,
        predicted,
        form: form.describe(),
        alpha_hat: fit.alpha,
        model: fit.model,
        window: fit.window,
        sharp,
        outside_theorem,
        pass,
    }
}
