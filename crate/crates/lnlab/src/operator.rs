//! Second-order operators L = a:∇² + b·∇ + c that are quadratic perturbations
//! of the Laplacian near 0, including conformal Laplacians of metrics in
//! normal coordinates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Jet, Monomial};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("metric family {label}: {reason}")]
    Metric { label: String, reason: String },
    #[error("scalar curvature steps disagree at {x:?}: {s1} vs {s2}")]
    Curvature { x: Vec<f64>, s1: f64, s2: f64 },
    #[error("structure ratio grows toward the origin: inner shell {inner}, outer shells {outer}")]
    Structure { inner: f64, outer: f64 },
    #[error("radius {radius} exceeds the validity ball {limit}")]
    Radius { radius: f64, limit: f64 },
    #[error("field shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
}

/// Polynomial in n variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub terms: Vec<Monomial>,
}

impl Poly {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.powers.iter().zip(x).map(|(&p, v)| v.powi(p as i32)).product::<f64>())
            .sum()
    }

    fn min_degree(&self) -> u32 {
        self.terms.iter().filter(|t| t.coeff != 0.0).map(|t| t.powers.iter().sum()).min().unwrap_or(u32::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MetricKind {
    Euclidean,
    /// g = (1 + q|x|²)^(4/(n−2)) δ
    ConformalQuadratic { q: f64 },
    /// g_ij = δ_ij + h_ij(x), h given by its upper triangle row by row
    Polynomial { h: Vec<Vec<Poly>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFamily {
    pub n: usize,
    pub kind: MetricKind,
    pub label: String,
}

/// Validity ball for metric families.
pub const METRIC_BALL: f64 = 2.0;

impl MetricFamily {
    pub fn new(n: usize, kind: MetricKind, label: &str) -> Result<Self, OperatorError> {
        let m = Self { n, kind, label: label.to_string() };
        m.validate()?;
        Ok(m)
    }

    pub fn conformal_quadratic(n: usize, q: f64) -> Result<Self, OperatorError> {
        Self::new(n, MetricKind::ConformalQuadratic { q }, &format!("conformal-quadratic(q={q})"))
    }

    fn bad(&self, reason: &str) -> OperatorError {
        OperatorError::Metric { label: self.label.clone(), reason: reason.to_string() }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if self.n < 3 {
            return Err(self.bad("dimension must be at least 3"));
        }
        match &self.kind {
            MetricKind::Euclidean => {}
            MetricKind::ConformalQuadratic { q } => {
                if !(1.0 + q * METRIC_BALL * METRIC_BALL > 0.0) {
                    return Err(self.bad("conformal factor vanishes inside the ball of radius 2"));
                }
            }
            MetricKind::Polynomial { h } => {
                let n = self.n;
                if h.len() != n || h.iter().enumerate().any(|(i, r)| r.len() != n - i) {
                    return Err(self.bad("h must list the upper triangle, row i holding n - i entries"));
                }
                for p in h.iter().flatten() {
                    if p.terms.iter().any(|t| t.powers.len() != n) {
                        return Err(self.bad("monomial arity must be n"));
                    }
                    if p.min_degree() < 2 {
                        return Err(self.bad("h must be O(|x|^2): constant and linear terms are not allowed"));
                    }
                }
                // positive definiteness on a sample of B₂
                for x in halton_ball(n, METRIC_BALL, 2000, 3) {
                    let g = self.metric(&x);
                    if g.symmetric_eigenvalues().min() <= 0.0 {
                        return Err(self.bad("metric is not positive definite on the ball of radius 2"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        match &self.kind {
            MetricKind::Euclidean => DMatrix::identity(n, n),
            MetricKind::ConformalQuadratic { q } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                DMatrix::identity(n, n) * (1.0 + q * r2).powf(4.0 / (n as f64 - 2.0))
            }
            MetricKind::Polynomial { h } => {
                let mut g = DMatrix::identity(n, n);
                for i in 0..n {
                    for j in i..n {
                        let v = h[i][j - i].eval(x);
                        g[(i, j)] += v;
                        if i != j {
                            g[(j, i)] += v;
                        }
                    }
                }
                g
            }
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, MetricKind::Euclidean)
    }
}

fn shifted(x: &[f64], k: usize, s: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += s;
    y
}

/// Fourth-order central difference of a vector-valued function along e_k.
fn d4<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], k: usize, h: f64) -> Vec<f64> {
    let (a, b, c, d) = (f(&shifted(x, k, 2.0 * h)), f(&shifted(x, k, h)), f(&shifted(x, k, -h)), f(&shifted(x, k, -2.0 * h)));
    (0..a.len()).map(|i| (-a[i] + 8.0 * b[i] - 8.0 * c[i] + d[i]) / (12.0 * h)).collect()
}

/// Christoffel symbols Γ^k_ij stored at k·n² + i·n + j.
pub fn christoffel(metric: &MetricFamily, x: &[f64], h: f64) -> Vec<f64> {
    let n = metric.n;
    let gf = |y: &[f64]| metric.metric(y).as_slice().to_vec();
    let dg: Vec<Vec<f64>> = (0..n).map(|k| d4(&gf, x, k, h)).collect(); // dg[l][(i,j)] column-major
    let ginv = metric.metric(x).try_inverse().expect("metric is positive definite");
    let d = |l: usize, i: usize, j: usize| dg[l][i + j * n];
    let mut gam = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                }
                gam[k * n * n + i * n + j] = 0.5 * s;
            }
        }
    }
    gam
}

/// Scalar curvature from fourth-order differences of the Christoffel symbols.
pub fn scalar_curvature(metric: &MetricFamily, x: &[f64], h: f64) -> f64 {
    let n = metric.n;
    if metric.is_euclidean() {
        return 0.0;
    }
    let gam = christoffel(metric, x, h);
    let gf = |y: &[f64]| christoffel(metric, y, h);
    let dgam: Vec<Vec<f64>> = (0..n).map(|m| d4(&gf, x, m, h)).collect();
    let g = |k: usize, i: usize, j: usize| gam[k * n * n + i * n + j];
    let dg = |m: usize, k: usize, i: usize, j: usize| dgam[m][k * n * n + i * n + j];
    let ginv = metric.metric(x).try_inverse().expect("metric is positive definite");
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut ric = 0.0;
            for k in 0..n {
                ric += dg(k, k, i, j) - dg(j, k, i, k);
                for l in 0..n {
                    ric += g(k, k, l) * g(l, i, j) - g(k, j, l) * g(l, i, k);
                }
            }
            s += ginv[(i, j)] * ric;
        }
    }
    s
}

/// S_g at steps 10⁻³ and 5·10⁻⁴; errors when they disagree beyond 10⁻⁴ relative.
pub fn scalar_curvature_checked(metric: &MetricFamily, x: &[f64]) -> Result<f64, OperatorError> {
    let s1 = scalar_curvature(metric, x, 1e-3);
    let s2 = scalar_curvature(metric, x, 5e-4);
    if (s1 - s2).abs() > 1e-4 * s1.abs().max(1.0) {
        return Err(OperatorError::Curvature { x: x.to_vec(), s1, s2 });
    }
    Ok(s1)
}

/// S_g of (1 + q|x|²)^(4/(n−2))δ from the conformal transformation law.
pub fn conformal_quadratic_curvature(n: usize, q: f64, x: &[f64]) -> f64 {
    let nf = n as f64;
    let u = 1.0 + q * x.iter().map(|v| v * v).sum::<f64>();
    -(4.0 * (nf - 1.0) / (nf - 2.0)) * u.powf(-(nf + 2.0) / (nf - 2.0)) * 2.0 * q * nf
}

#[derive(Debug, Clone)]
pub struct Coeffs {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Coeffs {
    /// L applied to a pointwise jet.
    pub fn apply_jet(&self, jet: &Jet) -> f64 {
        self.a.component_mul(&jet.hess).sum() + self.b.dot(&jet.grad) + self.c * jet.value
    }

    /// Σ|a_ij − δ_ij| + |x|Σ|b_i| + |x|²|c|.
    pub fn structure_sum(&self, x: &[f64]) -> f64 {
        let n = self.b.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        (&self.a - DMatrix::identity(n, n)).abs().sum() + r * self.b.abs().sum() + r * r * self.c.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OperatorKind {
    Laplacian,
    /// Δ_g − (n−2)/(4(n−1)) S_g written in coordinates
    Conformal { metric: MetricFamily },
    /// a = (1 + C|x|²/(3n))δ, b = C x/(3√n), c = C/3: attains structure constant C
    Extremal { constant: f64 },
    /// a = δ, b = (|x|, 0, …, 0), c = 0
    Drift,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub n: usize,
    pub kind: OperatorKind,
    /// measured structure constant on the validity ball
    pub c_l: f64,
    pub radius: f64,
    pub label: String,
}

impl OperatorSpec {
    pub fn laplacian(n: usize) -> Self {
        Self { n, kind: OperatorKind::Laplacian, c_l: 0.0, radius: METRIC_BALL, label: "laplacian".into() }
    }

    pub fn extremal(n: usize, constant: f64) -> Result<Self, OperatorError> {
        let mut s = Self {
            n,
            kind: OperatorKind::Extremal { constant },
            c_l: 0.0,
            radius: 1.0,
            label: format!("extremal(C={constant})"),
        };
        s.c_l = structure_constant(&s, 1.0)?;
        Ok(s)
    }

    pub fn drift(n: usize) -> Result<Self, OperatorError> {
        let mut s = Self { n, kind: OperatorKind::Drift, c_l: 0.0, radius: 1.0, label: "drift".into() };
        s.c_l = structure_constant(&s, 1.0)?;
        Ok(s)
    }

    pub fn coeffs(&self, x: &[f64]) -> Coeffs {
        let n = self.n;
        match &self.kind {
            OperatorKind::Laplacian => Coeffs { a: DMatrix::identity(n, n), b: DVector::zeros(n), c: 0.0 },
            OperatorKind::Extremal { constant } => {
                let nf = n as f64;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Coeffs {
                    a: DMatrix::identity(n, n) * (1.0 + constant * r2 / (3.0 * nf)),
                    b: DVector::from_iterator(n, x.iter().map(|v| constant * v / (3.0 * nf.sqrt()))),
                    c: constant / 3.0,
                }
            }
            OperatorKind::Drift => {
                let mut b = DVector::zeros(n);
                b[0] = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                Coeffs { a: DMatrix::identity(n, n), b, c: 0.0 }
            }
            OperatorKind::Conformal { metric } => conformal_coeffs(metric, x, 1e-3),
        }
    }

    pub fn is_laplacian(&self) -> bool {
        match &self.kind {
            OperatorKind::Laplacian => true,
            OperatorKind::Conformal { metric } => metric.is_euclidean(),
            OperatorKind::Extremal { constant } => *constant == 0.0,
            OperatorKind::Drift => false,
        }
    }

    /// Invariance of the coefficients under rotations fixing e_n.
    pub fn is_axisymmetric(&self) -> bool {
        let n = self.n;
        let pts = halton_ball(n, self.radius.min(1.0), 64, 17);
        for x in pts {
            for ang in [0.7f64, 2.1] {
                let mut rot = DMatrix::identity(n, n);
                // rotate within the (e₁, e₂) plane; for n = 3 this is the full axial group
                rot[(0, 0)] = ang.cos();
                rot[(0, 1)] = -ang.sin();
                rot[(1, 0)] = ang.sin();
                rot[(1, 1)] = ang.cos();
                let xv = DVector::from_column_slice(&x);
                let rx: Vec<f64> = (&rot * &xv).iter().copied().collect();
                let c0 = self.coeffs(&x);
                let c1 = self.coeffs(&rx);
                let a_rot = &rot * &c0.a * rot.transpose();
                let b_rot = &rot * &c0.b;
                let tol = 1e-8 * (1.0 + c0.a.amax() + c0.b.amax() + c0.c.abs());
                if (a_rot - c1.a).amax() > tol || (b_rot - c1.b).amax() > tol || (c0.c - c1.c).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// a = g^(ij), b_j = (det g)^(−1/2) ∂_i((det g)^(1/2) g^(ij)), c = −(n−2)S_g/(4(n−1)).
pub fn conformal_coeffs(metric: &MetricFamily, x: &[f64], h: f64) -> Coeffs {
    let n = metric.n;
    if metric.is_euclidean() {
        return Coeffs { a: DMatrix::identity(n, n), b: DVector::zeros(n), c: 0.0 };
    }
    let g = metric.metric(x);
    let det = g.determinant();
    let a = g.try_inverse().expect("metric is positive definite");
    let mf = |y: &[f64]| {
        let gy = metric.metric(y);
        let dy = gy.determinant().sqrt();
        (gy.try_inverse().expect("metric is positive definite") * dy).as_slice().to_vec()
    };
    let mut b = DVector::zeros(n);
    for i in 0..n {
        let di = d4(&mf, x, i, h);
        for j in 0..n {
            b[j] += di[i + j * n];
        }
    }
    b /= det.sqrt();
    let nf = n as f64;
    let c = -(nf - 2.0) / (4.0 * (nf - 1.0)) * scalar_curvature(metric, x, h);
    Coeffs { a, b, c }
}

/// Operator of a metric family; curvature differences verified at sample points.
pub fn conformal_operator(metric: &MetricFamily) -> Result<OperatorSpec, OperatorError> {
    metric.validate()?;
    let n = metric.n;
    let mut probes = vec![vec![0.0; n]];
    probes.extend(halton_ball(n, 1.0, 6, 5));
    for x in &probes {
        scalar_curvature_checked(metric, x)?;
    }
    let mut spec = OperatorSpec {
        n,
        kind: OperatorKind::Conformal { metric: metric.clone() },
        c_l: 0.0,
        radius: 1.0,
        label: format!("conformal[{}]", metric.label),
    };
    spec.c_l = structure_constant_sampled(&spec, 1.0, 2000, 0)?;
    Ok(spec)
}

/// Radical inverse in base b.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let bf = b as f64;
    while i > 0 {
        f /= bf;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Halton points in the cube mapped to the ball by rejection.
pub fn halton_ball(n: usize, radius: f64, count: usize, skip: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut i = skip + 1;
    while out.len() < count {
        let p: Vec<f64> = (0..n).map(|k| 2.0 * radical_inverse(i, PRIMES[k]) - 1.0).collect();
        i += 1;
        if p.iter().map(|v| v * v).sum::<f64>() < 1.0 {
            out.push(p.iter().map(|v| v * radius).collect());
        }
    }
    out
}

/// Halton directions with log-uniform radii in [10⁻⁴, 1]·radius, plus the
/// cube diagonals where ℓ¹/ℓ² norms are extremal.
fn structure_samples(n: usize, radius: f64, count: usize, skip: u64) -> Vec<Vec<f64>> {
    let mut pts = halton_ball(n, radius, count / 2, skip);
    let lo = (1e-4f64).ln();
    for (k, d) in halton_ball(n, 1.0, count - count / 2, skip + 7919).into_iter().enumerate() {
        let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm < 1e-12 {
            continue;
        }
        let s = radical_inverse(k as u64 + 1 + skip, PRIMES[n.min(11)]);
        let r = radius * (lo * (1.0 - s)).exp();
        pts.push(d.iter().map(|v| v / nrm * r).collect());
    }
    for r in [0.25, 0.5, 0.99] {
        pts.push(vec![radius * r / (n as f64).sqrt(); n]);
    }
    pts
}

/// sup (Σ|a−δ| + |x|Σ|b| + |x|²|c|)/|x|² over `count` quasi-random points.
pub fn structure_constant_sampled(spec: &OperatorSpec, radius: f64, count: usize, skip: u64) -> Result<f64, OperatorError> {
    if radius > spec.radius {
        return Err(OperatorError::Radius { radius, limit: spec.radius });
    }
    let pts = structure_samples(spec.n, radius, count, skip);
    // sup per dyadic shell, to detect growth toward 0
    let shells = 12;
    let mut sup = vec![0.0f64; shells];
    for x in &pts {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        if r < 1e-4 {
            continue;
        }
        let ratio = spec.coeffs(x).structure_sum(x) / r2;
        let k = ((radius / r).log2().floor() as usize).min(shells - 1);
        sup[k] = sup[k].max(ratio);
    }
    let outer = sup[..shells / 2].iter().cloned().fold(0.0, f64::max);
    let inner = sup[shells - 2..].iter().cloned().fold(0.0, f64::max);
    if inner > 4.0 * outer.max(1e-12) && inner > 1e-8 {
        return Err(OperatorError::Structure { inner, outer });
    }
    Ok(sup.iter().cloned().fold(0.0, f64::max))
}

/// Structure constant with the default sample size of 10⁴.
pub fn structure_constant(spec: &OperatorSpec, radius: f64) -> Result<f64, OperatorError> {
    structure_constant_sampled(spec, radius, 10_000, 0)
}

/// Values on a uniform Cartesian grid in n dimensions, last index fastest.
#[derive(Debug, Clone)]
pub struct CartesianField {
    pub lo: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl CartesianField {
    pub fn sample<F: Fn(&[f64]) -> f64>(lo: &[f64], h: f64, shape: &[usize], f: F) -> Self {
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut field = Self { lo: lo.to_vec(), h, shape: shape.to_vec(), values: vec![] };
        for idx in 0..total {
            values.push(f(&field.point(idx)));
        }
        field.values = values;
        field
    }

    fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            out[k] = idx % self.shape[k];
            idx /= self.shape[k];
        }
        out
    }

    fn stride(&self, k: usize) -> usize {
        self.shape[k + 1..].iter().product()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx).iter().zip(&self.lo).map(|(&i, l)| l + i as f64 * self.h).collect()
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.unravel(idx).iter().zip(&self.shape).all(|(&i, &s)| i > 0 && i + 1 < s)
    }
}

/// Second-order central discretization of L at interior nodes; boundary nodes are NaN.
pub fn apply(spec: &OperatorSpec, field: &CartesianField) -> Result<Vec<f64>, OperatorError> {
    let n = field.shape.len();
    let total: usize = field.shape.iter().product();
    if field.values.len() != total || n != spec.n {
        return Err(OperatorError::Shape { expected: total, got: field.values.len() });
    }
    let h = field.h;
    let u = &field.values;
    let mut out = vec![f64::NAN; total];
    for idx in 0..total {
        if !field.is_interior(idx) {
            continue;
        }
        let x = field.point(idx);
        let co = spec.coeffs(&x);
        let mut v = co.c * u[idx];
        for i in 0..n {
            let si = field.stride(i);
            v += co.a[(i, i)] * (u[idx + si] - 2.0 * u[idx] + u[idx - si]) / (h * h);
            v += co.b[i] * (u[idx + si] - u[idx - si]) / (2.0 * h);
            for j in i + 1..n {
                let a = co.a[(i, j)] + co.a[(j, i)];
                if a == 0.0 {
                    continue;
                }
                let sj = field.stride(j);
                let mixed = (u[idx + si + sj] - u[idx + si - sj] - u[idx - si + sj] + u[idx - si - sj]) / (4.0 * h * h);
                v += a * mixed;
            }
        }
        out[idx] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_operator_is_trivial() {
        let m = MetricFamily::new(3, MetricKind::Euclidean, "flat").unwrap();
        let op = conformal_operator(&m).unwrap();
        assert_eq!(op.c_l, 0.0);
        let c = op.coeffs(&[0.1, 0.2, 0.3]);
        assert_eq!(c.c, 0.0);
        assert_eq!(c.b.amax(), 0.0);
    }

    #[test]
    fn conformal_curvature_matches_identity() {
        for n in [3usize, 4, 6] {
            let m = MetricFamily::conformal_quadratic(n, 0.3).unwrap();
            let nf = n as f64;
            let s0 = scalar_curvature_checked(&m, &vec![0.0; n]).unwrap();
            let exact = -8.0 * nf * (nf - 1.0) * 0.3 / (nf - 2.0);
            assert!((s0 / exact - 1.0).abs() < 1e-7, "n = {n}: {s0} vs {exact}");
            let x: Vec<f64> = (0..n).map(|k| 0.1 + 0.05 * k as f64).collect();
            let s = scalar_curvature_checked(&m, &x).unwrap();
            let e = conformal_quadratic_curvature(n, 0.3, &x);
            assert!((s / e - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn conformal_drift_matches_closed_form() {
        // b_j = (n/2 − 1) φ^(−2) ∂_j φ with φ = (1 + q|x|²)^(4/(n−2))
        let (n, q) = (6usize, 0.3);
        let m = MetricFamily::conformal_quadratic(n, q).unwrap();
        let x = vec![0.1, -0.2, 0.05, 0.3, 0.0, 0.15];
        let c = conformal_coeffs(&m, &x, 1e-3);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let k = 4.0 / (n as f64 - 2.0);
        let phi = (1.0 + q * r2).powf(k);
        for j in 0..n {
            let dphi = k * (1.0 + q * r2).powf(k - 1.0) * 2.0 * q * x[j];
            let b = (n as f64 / 2.0 - 1.0) * dphi / (phi * phi);
            assert!((c.b[j] - b).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_structure_constant_is_one() {
        let op = OperatorSpec::drift(3).unwrap();
        assert!((op.c_l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extremal_attains_constant() {
        let op = OperatorSpec::extremal(3, 2.0).unwrap();
        assert!(op.c_l <= 2.0 + 1e-12 && op.c_l > 1.999, "{}", op.c_l);
        assert!(op.is_axisymmetric());
    }

    #[test]
    fn polynomial_metric_rejects_linear_terms() {
        let lin = Poly { terms: vec![Monomial { coeff: 0.1, powers: vec![1, 0, 0] }] };
        let zero = Poly { terms: vec![] };
        let h = vec![vec![lin, zero.clone(), zero.clone()], vec![zero.clone(), zero.clone()], vec![zero]];
        assert!(matches!(MetricFamily::new(3, MetricKind::Polynomial { h }, "bad"), Err(OperatorError::Metric { .. })));
    }

    #[test]
    fn conformal_constant_is_refinement_stable() {
        let m = MetricFamily::conformal_quadratic(3, 0.3).unwrap();
        let spec = conformal_operator(&m).unwrap();
        assert!(spec.c_l.is_finite() && spec.c_l > 0.0);
        let pts = structure_samples(3, 1.0, 200, 0);
        assert!(pts.iter().any(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-3));
        let coarse = structure_constant_sampled(&spec, 1.0, 2500, 0).unwrap();
        let fine = structure_constant_sampled(&spec, 1.0, 10_000, 101).unwrap();
        assert!((coarse / fine - 1.0).abs() < 0.01, "{coarse} {fine}");
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let f = CartesianField::sample(&[0.0, 0.0, 0.0], 0.1, &[5, 5, 5], |_| 3.0);
        let out = apply(&OperatorSpec::laplacian(3), &f).unwrap();
        assert!(out.iter().filter(|v| v.is_finite()).all(|v| v.abs() < 1e-12));
    }
}
