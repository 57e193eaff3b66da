//! Cubic interpolating spline on a nonuniform grid.

use crate::linalg::solve_tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndSlope {
    Natural,
    Clamped(f64),
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at the knots
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64], left: EndSlope, right: EndSlope) -> Self {
        let n = x.len();
        assert!(n >= 3 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            sub[i] = h[i - 1] / 6.0;
            diag[i] = (h[i - 1] + h[i]) / 3.0;
            sup[i] = h[i] / 6.0;
            rhs[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
        }
        match left {
            EndSlope::Natural => diag[0] = 1.0,
            EndSlope::Clamped(s) => {
                diag[0] = h[0] / 3.0;
                sup[0] = h[0] / 6.0;
                rhs[0] = (y[1] - y[0]) / h[0] - s;
            }
        }
        match right {
            EndSlope::Natural => diag[n - 1] = 1.0,
            EndSlope::Clamped(s) => {
                sub[n - 1] = h[n - 2] / 6.0;
                diag[n - 1] = h[n - 2] / 3.0;
                rhs[n - 1] = s - (y[n - 1] - y[n - 2]) / h[n - 2];
            }
        }
        let m = solve_tridiagonal(&sub, &diag, &sup, &rhs).expect("spline system is diagonally dominant");
        Self { x: x.to_vec(), y: y.to_vec(), m }
    }

    /// Index of the cell containing `t` (clamped to the grid).
    pub fn cell(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.cell(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_with_exact_slopes() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let fp = |x: f64| 3.0 * x * x - 2.0;
        let x: Vec<f64> = (0..12).map(|i| (i as f64 / 11.0).powf(1.5) * 2.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let s = CubicSpline::new(&x, &y, EndSlope::Clamped(fp(0.0)), EndSlope::Clamped(fp(2.0)));
        for t in [0.05, 0.33, 1.0, 1.77, 1.99] {
            assert!((s.eval(t) - f(t)).abs() < 1e-12);
        }
    }
}
