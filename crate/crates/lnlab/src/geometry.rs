//! Graph hypersurfaces through the origin, signed distances, tangent cones and
//! the distance-straightening map T.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("foot-point projection of {point:?} did not converge (gradient residual {residual:e})")]
    Projection { point: Vec<f64>, residual: f64 },
    #[error("normals {i} and {j} are linearly dependent")]
    DependentNormals { i: usize, j: usize },
    #[error("normals do not span a {k}-dimensional space")]
    RankDeficient { k: usize },
    #[error("|x| = {norm} outside the admissible radius {limit}")]
    Domain { norm: f64, limit: f64 },
    #[error("invalid surface: {0}")]
    Surface(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// One term c·Π y_i^e_i of a polynomial in the graph variables y'.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GraphFn {
    Polynomial { terms: Vec<Monomial> },
    /// Lower cap x_n = R − √(R² − |x'|²) of the sphere centred at R·e_n.
    Sphere { radius: f64 },
}

/// Value, gradient and Hessian of a scalar function.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl GraphFn {
    pub fn jet(&self, y: &[f64]) -> Jet {
        let m = y.len();
        match self {
            GraphFn::Polynomial { terms } => {
                let mut value = 0.0;
                let mut grad = DVector::zeros(m);
                let mut hess = DMatrix::zeros(m, m);
                let pw = |v: f64, e: i64| if e < 0 { 0.0 } else { v.powi(e as i32) };
                for t in terms {
                    let e: Vec<i64> = t.powers.iter().map(|&p| p as i64).collect();
                    let base: Vec<f64> = (0..m).map(|i| pw(y[i], e[i])).collect();
                    value += t.coeff * base.iter().product::<f64>();
                    for i in 0..m {
                        if e[i] == 0 {
                            continue;
                        }
                        let mut g = t.coeff * e[i] as f64 * pw(y[i], e[i] - 1);
                        for (k, b) in base.iter().enumerate() {
                            if k != i {
                                g *= b;
                            }
                        }
                        grad[i] += g;
                        for j in 0..m {
                            let h = if i == j {
                                if e[i] < 2 {
                                    continue;
                                }
                                let mut h = t.coeff * (e[i] * (e[i] - 1)) as f64 * pw(y[i], e[i] - 2);
                                for (k, b) in base.iter().enumerate() {
                                    if k != i {
                                        h *= b;
                                    }
                                }
                                h
                            } else {
                                if e[j] == 0 {
                                    continue;
                                }
                                let mut h = t.coeff
                                    * (e[i] * e[j]) as f64
                                    * pw(y[i], e[i] - 1)
                                    * pw(y[j], e[j] - 1);
                                for (k, b) in base.iter().enumerate() {
                                    if k != i && k != j {
                                        h *= b;
                                    }
                                }
                                h
                            };
                            hess[(i, j)] += h;
                        }
                    }
                }
                Jet { value, grad, hess }
            }
            GraphFn::Sphere { radius } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                let s = (radius * radius - r2).max(0.0).sqrt();
                let yv = DVector::from_column_slice(y);
                let grad = &yv / s;
                let hess = DMatrix::identity(m, m) / s + &yv * yv.transpose() / (s * s * s);
                Jet { value: radius - s, grad, hess }
            }
        }
    }

    /// Radius of the disc in y' on which the chart is defined.
    pub fn chart_radius(&self) -> f64 {
        match self {
            GraphFn::Polynomial { .. } => f64::INFINITY,
            GraphFn::Sphere { radius } => 0.9 * radius,
        }
    }
}

/// C² hypersurface {ỹ_n = f(ỹ')} in the rotated frame ỹ = Q x, with f(0) = 0
/// and ∇f(0) = 0, so the unit normal at 0 is ν = Qᵀe_n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSurface {
    pub n: usize,
    pub f: GraphFn,
    /// rows of the orthogonal frame Q
    pub frame: Vec<Vec<f64>>,
    pub label: String,
}

impl GraphSurface {
    pub fn new(n: usize, f: GraphFn, frame: Vec<Vec<f64>>, label: &str) -> Result<Self, GeometryError> {
        let s = Self { n, f, frame, label: label.to_string() };
        s.validate()?;
        Ok(s)
    }

    /// Surface in the standard frame.
    pub fn axis_aligned(n: usize, f: GraphFn, label: &str) -> Result<Self, GeometryError> {
        let frame = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::new(n, f, frame, label)
    }

    /// Hyperplane through 0 with unit normal `normal`.
    pub fn plane(normal: &[f64], label: &str) -> Result<Self, GeometryError> {
        let n = normal.len();
        let nu = DVector::from_column_slice(normal).normalize();
        let comp = orthonormal_completion(&[nu.clone()]);
        let mut frame: Vec<Vec<f64>> = comp.iter().map(|v| v.iter().copied().collect()).collect();
        frame.push(nu.iter().copied().collect());
        Self::new(n, GraphFn::Polynomial { terms: vec![] }, frame, label)
    }

    pub fn paraboloid(n: usize, k: f64) -> Result<Self, GeometryError> {
        let terms = (0..n - 1)
            .map(|i| Monomial { coeff: k, powers: (0..n - 1).map(|j| if i == j { 2 } else { 0 }).collect() })
            .collect();
        Self::axis_aligned(n, GraphFn::Polynomial { terms }, &format!("paraboloid({k})"))
    }

    pub fn sphere(n: usize, radius: f64) -> Result<Self, GeometryError> {
        Self::axis_aligned(n, GraphFn::Sphere { radius }, &format!("sphere({radius})"))
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.n;
        if n < 3 {
            return Err(GeometryError::Surface("dimension must be at least 3".into()));
        }
        if self.frame.len() != n || self.frame.iter().any(|r| r.len() != n) {
            return Err(GeometryError::Surface("frame must be n x n".into()));
        }
        let q = self.q();
        if (&q * q.transpose() - DMatrix::identity(n, n)).amax() > 1e-10 {
            return Err(GeometryError::Surface("frame is not orthogonal".into()));
        }
        if let GraphFn::Polynomial { terms } = &self.f {
            for t in terms {
                if t.powers.len() != n - 1 {
                    return Err(GeometryError::Surface("monomial arity must be n - 1".into()));
                }
            }
        }
        if let GraphFn::Sphere { radius } = self.f {
            if !(radius > 0.0) {
                return Err(GeometryError::Surface("sphere radius must be positive".into()));
            }
        }
        let j = self.f.jet(&vec![0.0; n - 1]);
        if j.value.abs() > 1e-14 || j.grad.amax() > 1e-14 {
            return Err(GeometryError::Surface("need f(0) = 0 and grad f(0) = 0".into()));
        }
        Ok(())
    }

    fn q(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.frame[i][j])
    }

    /// Unit normal at 0 pointing to the positive side.
    pub fn normal(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.frame[self.n - 1])
    }

    /// sup of the spectral norm of ∇²f over |y'| ≤ radius (sampled).
    pub fn c2_seminorm(&self, radius: f64) -> f64 {
        let m = self.n - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut best: f64 = 0.0;
        let lim = radius.min(self.f.chart_radius());
        for k in 0..4000 {
            let mut y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            // alternate interior points and points on the bounding sphere
            let scale = if k % 2 == 0 { lim / nrm } else { lim * rng.gen::<f64>() / nrm.max(1.0) };
            y.iter_mut().for_each(|v| *v *= scale);
            let h = self.f.jet(&y).hess;
            let sv = h.symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            best = best.max(sv);
        }
        best
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Signed distance to the surface: positive on the side ν points to.
pub fn signed_distance(surface: &GraphSurface, x: &[f64]) -> Result<f64, GeometryError> {
    let n = surface.n;
    if x.len() != n {
        return Err(GeometryError::Dimension { expected: n, got: x.len() });
    }
    let y: Vec<f64> = surface.frame.iter().map(|row| dot(row, x)).collect();
    let m = n - 1;
    let (yp, yn) = (&y[..m], y[n - 1]);
    let chart = surface.f.chart_radius();
    let ynorm = yp.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ynorm >= chart {
        return Err(GeometryError::Domain { norm: ynorm, limit: chart });
    }
    let f0 = surface.f.jet(yp).value;
    let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let objective = |z: &[f64]| -> f64 {
        let j = surface.f.jet(z);
        0.5 * (z.iter().zip(yp).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + (j.value - yn).powi(2))
    };
    let dist = x.iter().map(|v| v * v).sum::<f64>().sqrt() + f0.abs();
    let mut best: Option<(f64, f64)> = None; // (distance², residual)
    let mut worst_res = 0.0f64;
    for start in 0..5 {
        // perturbed seeds around the vertical projection
        let mut z: Vec<f64> = yp.to_vec();
        if start > 0 {
            let ang = start as f64 * 1.3;
            let amp = 0.25 * (yn - f0).abs();
            z[0] += amp * ang.cos();
            if m > 1 {
                z[1] += amp * ang.sin();
            }
        }
        let mut converged = false;
        let mut res = f64::INFINITY;
        for _ in 0..100 {
            let j = surface.f.jet(&z);
            let e = j.value - yn;
            let zv = DVector::from_column_slice(&z);
            let ypv = DVector::from_column_slice(yp);
            let g = (&zv - &ypv) + &j.grad * e;
            res = g.amax();
            if res <= 1e-15 * scale {
                converged = true;
                break;
            }
            let mut h = DMatrix::identity(m, m) + &j.grad * j.grad.transpose() + &j.hess * e;
            let step = loop {
                if let Some(ch) = h.clone().cholesky() {
                    break ch.solve(&g);
                }
                h += DMatrix::identity(m, m);
            };
            let f_old = objective(&z);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand: Vec<f64> = z.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
                let cn = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
                if cn < chart && objective(&cand) <= f_old {
                    z = cand;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || step.amax() * t <= 1e-17 * scale {
                // stalled at machine precision
                let j = surface.f.jet(&z);
                let g = (DVector::from_column_slice(&z) - DVector::from_column_slice(yp)) + &j.grad * (j.value - yn);
                res = g.amax();
                converged = res <= 1e-11 * scale;
                break;
            }
        }
        worst_res = worst_res.max(res);
        if converged {
            let d2 = 2.0 * objective(&z);
            if best.map_or(true, |(b, _)| d2 < b) {
                best = Some((d2, res));
            }
        }
    }
    let (d2, _) = best.ok_or(GeometryError::Projection { point: x.to_vec(), residual: worst_res })?;
    let d = d2.sqrt().min(dist);
    Ok(if yn > f0 {
        d
    } else if yn < f0 {
        -d
    } else {
        0.0
    })
}

/// Orthonormal basis of the orthogonal complement of span(vs).
pub fn orthonormal_completion(vs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = vs[0].len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    // Gram-Schmidt of vs, then of the coordinate vectors
    let mut all: Vec<DVector<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for b in &all {
            w -= b * b.dot(&w);
        }
        if w.norm() > 1e-12 {
            all.push(w.normalize());
        }
    }
    for i in 0..n {
        let mut w = DVector::zeros(n);
        w[i] = 1.0;
        for _ in 0..2 {
            for b in all.iter().chain(basis.iter()) {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        if w.norm() > 1e-8 {
            basis.push(w.normalize());
        }
        if all.len() + basis.len() == n {
            break;
        }
    }
    basis
}

/// Unit normals ν₁..ν_k, completion ν_(k+1)..ν_n and a reference direction.
#[derive(Debug, Clone)]
pub struct HyperplaneFan {
    pub normals: Vec<DVector<f64>>,
    pub completion: Vec<DVector<f64>>,
    pub reference: DVector<f64>,
}

impl HyperplaneFan {
    pub fn new(normals: Vec<DVector<f64>>) -> Result<Self, GeometryError> {
        let k = normals.len();
        if k == 0 {
            return Err(GeometryError::RankDeficient { k: 0 });
        }
        for i in 0..k {
            for j in i + 1..k {
                if 1.0 - normals[i].dot(&normals[j]).abs() < 1e-10 {
                    return Err(GeometryError::DependentNormals { i, j });
                }
            }
        }
        let n = normals[0].len();
        let g = DMatrix::from_fn(k, k, |i, j| normals[i].dot(&normals[j]));
        if g.determinant().abs() < 1e-12 {
            return Err(GeometryError::RankDeficient { k });
        }
        let completion = orthonormal_completion(&normals);
        if completion.len() + k != n {
            return Err(GeometryError::RankDeficient { k });
        }
        let reference = best_reference(&normals);
        Ok(Self { normals, completion, reference })
    }

    /// Rows ν₁..ν_n: the linear map T_P.
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows: Vec<_> = self.normals.iter().chain(&self.completion).map(|v| v.transpose()).collect();
        DMatrix::from_rows(&rows)
    }
}

/// Direction e maximizing min_i ⟨ν_i, e⟩: 10⁴ sampled directions, then a
/// shrinking random local search.
pub fn best_reference(normals: &[DVector<f64>]) -> DVector<f64> {
    let n = normals[0].len();
    let score = |e: &DVector<f64>| normals.iter().map(|v| v.dot(e)).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gauss = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        let v = DVector::from_fn(n, |_, _| {
            let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        v.normalize()
    };
    // the normalized mean is a good seed and often optimal
    let mut best = normals.iter().fold(DVector::zeros(n), |a, v| a + v);
    best = if best.norm() > 0.0 { best.normalize() } else { normals[0].clone() };
    let mut best_s = score(&best);
    for _ in 0..10_000 {
        let e = gauss(&mut rng);
        let s = score(&e);
        if s > best_s {
            best = e;
            best_s = s;
        }
    }
    let mut step = 0.1;
    while step > 1e-10 {
        let mut improved = false;
        for _ in 0..50 {
            let e = (&best + gauss(&mut rng) * step).normalize();
            let s = score(&e);
            if s > best_s {
                best = e;
                best_s = s;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConeKind {
    Halfspace { axis: Vec<f64> },
    /// two normals; `opening` is the dihedral angle of the wedge
    Wedge { normals: [Vec<f64>; 2], opening: f64 },
    CapCone { axis: Vec<f64>, aperture: f64 },
    Fan { normals: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentConeSpec {
    pub n: usize,
    pub kind: ConeKind,
    /// label of the associated spherical domain Σ = V ∩ S^(n−1)
    pub sigma: String,
}

impl TangentConeSpec {
    pub fn cap_cone(n: usize, aperture: f64) -> Self {
        let mut axis = vec![0.0; n];
        axis[n - 1] = 1.0;
        Self { n, kind: ConeKind::CapCone { axis, aperture }, sigma: format!("cap({aperture:.6})") }
    }

    /// Membership test; dilation invariant by construction.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            ConeKind::Halfspace { axis } => dot(axis, x) > 0.0,
            ConeKind::Wedge { normals, .. } => normals.iter().all(|v| dot(v, x) > 0.0),
            ConeKind::Fan { normals } => normals.iter().all(|v| dot(v, x) > 0.0),
            ConeKind::CapCone { axis, aperture } => {
                let r = dot(x, x).sqrt();
                r > 0.0 && (dot(axis, x) / r).clamp(-1.0, 1.0).acos() < *aperture
            }
        }
    }
}

/// Intersection of the tangent half-spaces at 0.
pub fn tangent_cone(surfaces: &[GraphSurface]) -> Result<TangentConeSpec, GeometryError> {
    let normals: Vec<DVector<f64>> = surfaces.iter().map(|s| s.normal()).collect();
    let n = surfaces.first().ok_or(GeometryError::RankDeficient { k: 0 })?.n;
    for s in surfaces {
        if s.n != n {
            return Err(GeometryError::Dimension { expected: n, got: s.n });
        }
    }
    HyperplaneFan::new(normals.clone())?;
    let vecs: Vec<Vec<f64>> = normals.iter().map(|v| v.iter().copied().collect()).collect();
    Ok(match vecs.len() {
        1 => TangentConeSpec { n, kind: ConeKind::Halfspace { axis: vecs[0].clone() }, sigma: "half-sphere".into() },
        2 => {
            let opening = std::f64::consts::PI - normals[0].dot(&normals[1]).clamp(-1.0, 1.0).acos();
            TangentConeSpec {
                n,
                kind: ConeKind::Wedge { normals: [vecs[0].clone(), vecs[1].clone()], opening },
                sigma: format!("lune({opening:.6})"),
            }
        }
        _ => TangentConeSpec { n, kind: ConeKind::Fan { normals: vecs }, sigma: "fan".into() },
    })
}

/// T = T_P⁻¹ ∘ T_S: signed distances to the surfaces become signed distances
/// to their tangent planes.
#[derive(Debug, Clone)]
pub struct DiffeoT {
    pub surfaces: Vec<GraphSurface>,
    pub fan: HyperplaneFan,
    pub r_t: f64,
    inverse: DMatrix<f64>,
}

/// r_T = min(0.25, 0.1/κ) with κ the largest C² seminorm on the chart ball of radius 0.25.
pub fn build_t(surfaces: Vec<GraphSurface>) -> Result<DiffeoT, GeometryError> {
    let fan = HyperplaneFan::new(surfaces.iter().map(|s| s.normal()).collect())?;
    let kappa = surfaces.iter().map(|s| s.c2_seminorm(0.25)).fold(0.0, f64::max);
    let r_t = if kappa > 0.0 { (0.1 / kappa).min(0.25) } else { 0.25 };
    let inverse = fan.matrix().try_inverse().ok_or(GeometryError::RankDeficient { k: surfaces.len() })?;
    Ok(DiffeoT { surfaces, fan, r_t, inverse })
}

impl DiffeoT {
    pub fn n(&self) -> usize {
        self.fan.reference.len()
    }

    /// (d_S1(x), …, d_Sk(x), ⟨ν_(k+1), x⟩, …).
    pub fn distances(&self, x: &[f64]) -> Result<DVector<f64>, GeometryError> {
        let mut d: Vec<f64> = self.surfaces.iter().map(|s| signed_distance(s, x)).collect::<Result<_, _>>()?;
        d.extend(self.fan.completion.iter().map(|v| dot(v.as_slice(), x)));
        Ok(DVector::from_vec(d))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let n = self.n();
        if x.len() != n {
            return Err(GeometryError::Dimension { expected: n, got: x.len() });
        }
        let norm = dot(x, x).sqrt();
        if norm >= self.r_t {
            return Err(GeometryError::Domain { norm, limit: self.r_t });
        }
        let d = self.distances(x)?;
        Ok((&self.inverse * d).iter().copied().collect())
    }

    /// Central-difference Jacobian with h = 10⁻⁵·max(|x|, 10⁻³).
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let h = 1e-5 * dot(x, x).sqrt().max(1e-3);
        self.jacobian_step(x, h)
    }

    pub fn jacobian_step(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>, GeometryError> {
        let n = self.n();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (self.apply(&xp)?, self.apply(&xm)?);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Largest |d_(S_i)(x) − d_(P_i)(Tx)| over the surfaces.
    pub fn distance_defect(&self, x: &[f64]) -> Result<f64, GeometryError> {
        let xb = self.apply(x)?;
        let mut worst: f64 = 0.0;
        for (s, nu) in self.surfaces.iter().zip(&self.fan.normals) {
            worst = worst.max((signed_distance(s, x)? - dot(nu.as_slice(), &xb)).abs());
        }
        Ok(worst)
    }

    /// Points with every signed distance positive.
    pub fn in_domain(&self, x: &[f64]) -> Result<bool, GeometryError> {
        for s in &self.surfaces {
            if signed_distance(s, x)? <= 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// (|Δ_x(f∘T) − Δf(Tx)|)/(|∇f| + |x||∇²f|) for f(x̄) = |x̄|^(−1/2), with
    /// the x-Laplacian by central differences of step h.
    pub fn composition_ratio(&self, x: &[f64], h: f64) -> Result<f64, GeometryError> {
        let n = self.n();
        let f = |p: &[f64]| dot(p, p).powf(-0.25);
        let ft = |p: &[f64]| -> Result<f64, GeometryError> { Ok(f(&self.apply(p)?)) };
        let c = ft(x)?;
        let mut lap = 0.0;
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            lap += (ft(&xp)? - 2.0 * c + ft(&xm)?) / (h * h);
        }
        let xb = self.apply(x)?;
        let r = dot(&xb, &xb).sqrt();
        let nf = n as f64;
        // f = r^(-1/2): f' = -r^(-3/2)/2, f'' = 3r^(-5/2)/4, Δf = f'' + (n-1)f'/r
        let d1 = 0.5 * r.powf(-1.5);
        let d2 = 0.75 * r.powf(-2.5);
        let exact = d2 - (nf - 1.0) * d1 / r;
        let hess_norm = d2.max(d1 / r);
        let xn = dot(x, x).sqrt();
        Ok((lap - exact).abs() / (d1 + xn * hess_norm))
    }
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of |Tx − x| against |x| along the ray through `dir`, over
/// |x| ∈ [r_T/64, r_T/2].
pub fn straightening_slope(t: &DiffeoT, dir: &[f64]) -> Result<f64, GeometryError> {
    let nrm = dot(dir, dir).sqrt();
    let mut rs = Vec::new();
    let mut es = Vec::new();
    for k in 0..=12 {
        let r = t.r_t / 2.0 * 0.5f64.powf(k as f64 * 0.5);
        let x: Vec<f64> = dir.iter().map(|v| v / nrm * r).collect();
        let xb = t.apply(&x)?;
        let e = xb.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        rs.push(r);
        es.push(e);
    }
    Ok(loglog_slope(&rs, &es))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_distances() {
        let p = GraphSurface::axis_aligned(3, GraphFn::Polynomial { terms: vec![] }, "plane").unwrap();
        assert!((signed_distance(&p, &[0.0, 0.0, 0.3]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(signed_distance(&p, &[0.7, 0.0, 0.0]).unwrap(), 0.0);
        assert!((signed_distance(&p, &[0.2, 0.1, -0.4]).unwrap() + 0.4).abs() < 1e-15);
    }

    #[test]
    fn sphere_distance_is_exact() {
        let s = GraphSurface::sphere(3, 1.0).unwrap();
        for x in [[0.1, 0.0, 0.1], [0.05, -0.1, 0.02], [0.2, 0.1, -0.05], [0.0, 0.0, 0.2]] {
            let exact: f64 = 1.0 - ((x[0] * x[0] + x[1] * x[1] + (x[2] - 1.0) * (x[2] - 1.0)) as f64).sqrt();
            let d = signed_distance(&s, &x).unwrap();
            assert!((d - exact).abs() < 1e-13, "{d} vs {exact}");
        }
    }

    #[test]
    fn polynomial_jet_matches_differences() {
        let f = GraphFn::Polynomial {
            terms: vec![
                Monomial { coeff: 1.5, powers: vec![2, 1] },
                Monomial { coeff: -0.7, powers: vec![0, 3] },
                Monomial { coeff: 0.2, powers: vec![1, 1] },
            ],
        };
        let y = [0.3, -0.2];
        let j = f.jet(&y);
        let h = 1e-5;
        for i in 0..2 {
            let mut p = y;
            let mut m = y;
            p[i] += h;
            m[i] -= h;
            let g = (f.jet(&p).value - f.jet(&m).value) / (2.0 * h);
            assert!((g - j.grad[i]).abs() < 1e-8);
            for k in 0..2 {
                let hh = (f.jet(&p).grad[k] - f.jet(&m).grad[k]) / (2.0 * h);
                assert!((hh - j.hess[(i, k)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dependent_normals_rejected() {
        let a = GraphSurface::plane(&[0.0, 0.0, 1.0], "a").unwrap();
        let b = GraphSurface::plane(&[0.0, 0.0, 1.0], "b").unwrap();
        let c = GraphSurface::plane(&[1.0, 0.0, 1.0], "c").unwrap();
        assert!(matches!(tangent_cone(&[a.clone(), c.clone(), b]), Err(GeometryError::DependentNormals { i: 0, j: 2 })));
        let cone = tangent_cone(&[a, c]).unwrap();
        assert!(cone.contains(&[0.0, 0.0, 1.0]));
        assert!(cone.contains(&[0.0, 0.0, 7.0]));
    }

    #[test]
    fn reference_direction_balances_normals() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let normals = vec![DVector::from_vec(vec![s, 0.0, s]), DVector::from_vec(vec![-s, 0.0, s])];
        let e = best_reference(&normals);
        assert!((e[2] - 1.0).abs() < 1e-8, "{e}");
    }

    #[test]
    fn completion_is_orthonormal() {
        let v = DVector::from_vec(vec![0.3, -0.4, 0.5, 0.1]).normalize();
        let w = orthonormal_completion(&[v.clone()]);
        assert_eq!(w.len(), 3);
        for a in &w {
            assert!(a.dot(&v).abs() < 1e-14);
            assert!((a.norm() - 1.0).abs() < 1e-14);
        }
    }
}
