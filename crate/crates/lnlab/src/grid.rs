//! Graded 1-D node sequences and nonuniform finite-difference weights.

/// Which interval ends receive refined spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refine {
    None,
    Lo,
    Hi,
    Both,
}

/// Nodes on [lo, hi] from the power map s ↦ s^q toward the refined ends.
/// Near a refined end the node distance grows like (j/N)^q.
pub fn graded(lo: f64, hi: f64, n: usize, q: f64, refine: Refine) -> Vec<f64> {
    assert!(n >= 3);
    let len = hi - lo;
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            let s = j as f64 / (n - 1) as f64;
            let w = match refine {
                Refine::None => s,
                Refine::Lo => s.powf(q),
                Refine::Hi => 1.0 - (1.0 - s).powf(q),
                Refine::Both => {
                    let a = s.powf(q);
                    let b = (1.0 - s).powf(q);
                    a / (a + b)
                }
            };
            lo + len * w
        })
        .collect();
    x[0] = lo;
    x[n - 1] = hi;
    x
}

/// Distances in [floor, dmax] with spacing ∝ d/(1 + d/blend): geometric
/// close to the wall, close to uniform once d exceeds `blend`.
pub fn log_layer(dmax: f64, floor: f64, blend: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && floor > 0.0 && dmax > floor && blend > 0.0);
    let k = (dmax / floor).ln() + (dmax - floor) / blend;
    let lf = floor.ln();
    let mut out = Vec::with_capacity(count);
    let mut x = lf;
    for j in 0..count {
        let target = k * j as f64 / (count - 1) as f64;
        // solve (x - ln floor) + (e^x - floor)/blend = target; monotone and convex in x
        for _ in 0..100 {
            let f = x - lf + (x.exp() - floor) / blend - target;
            let df = 1.0 + x.exp() / blend;
            let step = f / df;
            x -= step;
            if step.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        out.push(x.exp());
    }
    out[0] = floor;
    out[count - 1] = dmax;
    out
}

/// Three-point weights (left, centre, right) at an interior node.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil3 {
    pub d1: [f64; 3],
    pub d2: [f64; 3],
}

pub fn stencil(hm: f64, hp: f64) -> Stencil3 {
    Stencil3 {
        d1: [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))],
        d2: [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))],
    }
}

/// Interior stencils for every node; the two end entries are zero.
pub fn stencils(x: &[f64]) -> Vec<Stencil3> {
    let n = x.len();
    let mut out = vec![Stencil3::default(); n];
    for i in 1..n - 1 {
        out[i] = stencil(x[i] - x[i - 1], x[i + 1] - x[i]);
    }
    out
}

/// Second-order one-sided first-derivative weights at x0 using x0, x1, x2.
pub fn one_sided_d1(x0: f64, x1: f64, x2: f64) -> [f64; 3] {
    let h1 = x1 - x0;
    let h2 = x2 - x0;
    let c1 = h2 / (h1 * (h2 - h1));
    let c2 = -h1 / (h2 * (h2 - h1));
    [-(c1 + c2), c1, c2]
}

/// First and second derivative arrays by the three-point formulas, with
/// one-sided second-order closures at both ends for the first derivative.
pub fn derivatives(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let st = stencils(x);
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        let s = st[i];
        d1[i] = s.d1[0] * y[i - 1] + s.d1[1] * y[i] + s.d1[2] * y[i + 1];
        d2[i] = s.d2[0] * y[i - 1] + s.d2[1] * y[i] + s.d2[2] * y[i + 1];
    }
    let w = one_sided_d1(x[0], x[1], x[2]);
    d1[0] = w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
    let w = one_sided_d1(x[n - 1], x[n - 2], x[n - 3]);
    d1[n - 1] = w[0] * y[n - 1] + w[1] * y[n - 2] + w[2] * y[n - 3];
    d2[0] = d2[1];
    d2[n - 1] = d2[n - 2];
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_endpoints_and_monotone() {
        for r in [Refine::None, Refine::Lo, Refine::Hi, Refine::Both] {
            let x = graded(0.2, 1.7, 50, 3.0, r);
            assert_eq!(x[0], 0.2);
            assert_eq!(x[49], 1.7);
            assert!(x.windows(2).all(|w| w[1] > w[0]));
        }
        let x = graded(0.0, 1.0, 11, 3.0, Refine::Hi);
        assert!((1.0 - x[9] - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn log_layer_spacing() {
        let d = log_layer(1.5, 1e-10, 0.05, 800);
        assert_eq!(d[0], 1e-10);
        assert_eq!(d[799], 1.5);
        assert!(d.windows(2).all(|w| w[1] > w[0]));
        let r1 = d[1] / d[0];
        let r2 = d[2] / d[1];
        assert!((r1 - r2).abs() < 1e-6 * r1);
        let h_end = d[799] - d[798];
        let h_prev = d[798] - d[797];
        assert!((h_end / h_prev - 1.0).abs() < 1e-3);
    }

    #[test]
    fn stencils_exact_on_quadratics() {
        let s = stencil(0.3, 0.7);
        let f = |x: f64| 2.0 * x * x - x + 5.0;
        let x0 = 1.1;
        let v = [f(x0 - 0.3), f(x0), f(x0 + 0.7)];
        let d1: f64 = (0..3).map(|k| s.d1[k] * v[k]).sum();
        let d2: f64 = (0..3).map(|k| s.d2[k] * v[k]).sum();
        assert!((d1 - (4.0 * x0 - 1.0)).abs() < 1e-12);
        assert!((d2 - 4.0).abs() < 1e-11);
        let w = one_sided_d1(0.0, 0.2, 0.5);
        let d: f64 = w[0] * f(0.0) + w[1] * f(0.2) + w[2] * f(0.5);
        assert!((d + 1.0).abs() < 1e-12);
    }
}
