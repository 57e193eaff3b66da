//! Small direct solvers: tridiagonal, symmetric tridiagonal LDLᵀ with
//! inertia counts, and banded LU with partial pivoting.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Solves a tridiagonal system. `sub[i]` couples row i to i-1 (sub[0] unused),
/// `sup[i]` couples row i to i+1 (last unused).
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    for v in [sub.len(), sup.len(), rhs.len()] {
        if v != n {
            return Err(LinalgError::Dimension { expected: n, got: v });
        }
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(LinalgError::ZeroPivot { row: 0 });
    }
    c[0] = sup[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return Err(LinalgError::ZeroPivot { row: i });
        }
        c[i] = sup[i] / piv;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// LDLᵀ factorization of a symmetric tridiagonal matrix shifted by `-shift`.
/// `off[i]` couples i and i+1.
#[derive(Debug, Clone)]
pub struct SymTridiagLdl {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl SymTridiagLdl {
    pub fn factor(diag: &[f64], off: &[f64], shift: f64) -> Result<Self, LinalgError> {
        let n = diag.len();
        if off.len() + 1 != n {
            return Err(LinalgError::Dimension { expected: n - 1, got: off.len() });
        }
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        // an exactly vanishing pivot is nudged, which keeps the inertia count valid
        let tiny = |v: f64, scale: f64| if v == 0.0 { f64::EPSILON * scale.max(f64::MIN_POSITIVE) } else { v };
        d[0] = tiny(diag[0] - shift, diag[0].abs() + shift.abs());
        for i in 1..n {
            l[i - 1] = off[i - 1] / d[i - 1];
            d[i] = tiny(diag[i] - shift - l[i - 1] * off[i - 1], diag[i].abs() + shift.abs());
            if !d[i].is_finite() {
                return Err(LinalgError::ZeroPivot { row: i });
            }
        }
        Ok(Self { d, l })
    }

    /// Number of negative pivots, i.e. eigenvalues below the shift (Sylvester).
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= self.l[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= self.l[i] * y[i + 1];
        }
        y
    }
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, stored with room
/// for the fill produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, data: vec![0.0; ld * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // row offset kl + ku + i - j within column j
        j * self.ld + (self.kl + self.ku + i - j)
    }

    /// Adds `v` at (i, j). Panics if outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && i + self.ku >= j, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl >= i && i + self.ku + self.kl >= j {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                *yi += self.data[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    /// In-place LU with partial pivoting, then solves for `rhs`.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(LinalgError::Dimension { expected: n, got: rhs.len() });
        }
        let kl = self.kl;
        let kuf = self.ku + self.kl;
        let mut b = rhs.to_vec();
        // row equilibration: pivot choices compare rows on a common scale
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + self.ku).min(n - 1);
            let big = (lo..=hi).map(|j| self.data[self.idx(i, j)].abs()).fold(0.0, f64::max);
            if big > 0.0 && big.is_finite() {
                for j in lo..=hi {
                    let k = self.idx(i, j);
                    self.data[k] /= big;
                }
                b[i] /= big;
            }
        }
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinalgError::ZeroPivot { row: k });
            }
            piv[k] = p;
            let cend = (k + kuf).min(n - 1);
            if p != k {
                for j in k..=cend {
                    let a = self.idx(k, j);
                    let c = self.idx(p, j);
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            let pv = self.data[self.idx(k, k)];
            if last == k {
                continue;
            }
            // multipliers live below the pivot in column k; update column by
            // column so that the inner loop is contiguous
            let base = self.idx(k + 1, k);
            let cnt = last - k;
            for q in 0..cnt {
                self.data[base + q] /= pv;
            }
            for q in 0..cnt {
                b[k + 1 + q] -= self.data[base + q] * b[k];
            }
            for j in k + 1..=cend {
                let kj = self.data[self.idx(k, j)];
                if kj == 0.0 {
                    continue;
                }
                let cj = self.idx(k + 1, j);
                let (head, tail) = self.data.split_at_mut(cj);
                let mult = &head[base..base + cnt];
                for q in 0..cnt {
                    tail[q] -= mult[q] * kj;
                }
            }
        }
        let mut x = b;
        for k in (0..n).rev() {
            let cend = (k + kuf).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=cend {
                s -= self.data[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_known_solution() {
        let sub = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let sup = [-1.0, -1.0, -1.0, 0.0];
        let x_true = [1.0, 2.0, 3.0, 4.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x_true[i];
                if i > 0 {
                    s += sub[i] * x_true[i - 1];
                }
                if i < 3 {
                    s += sup[i] * x_true[i + 1];
                }
                s
            })
            .collect();
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(x_true.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ldl_inertia_counts_eigenvalues_below_shift() {
        // eigenvalues of tridiag(-1,2,-1), n=5: 2-2cos(k pi/6)
        let diag = vec![2.0; 5];
        let off = vec![-1.0; 4];
        let eig: Vec<f64> =
            (1..=5).map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 6.0).cos()).collect();
        for s in [0.1, 0.5, 1.5, 2.5, 3.5, 4.0] {
            let f = SymTridiagLdl::factor(&diag, &off, s).unwrap();
            let expect = eig.iter().filter(|&&e| e < s).count();
            assert_eq!(f.negative_count(), expect);
        }
    }

    #[test]
    fn band_solve_with_pivoting() {
        let n = 7;
        let mut a = BandMatrix::zeros(n, 2, 1);
        for i in 0..n {
            a.add(i, i, if i % 2 == 0 { 1e-14 } else { 3.0 });
            if i + 1 < n {
                a.add(i, i + 1, 1.0);
            }
            if i >= 1 {
                a.add(i, i - 1, 2.0);
            }
            if i >= 2 {
                a.add(i, i - 2, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let rhs = a.mul_vec(&x_true);
        let x = a.solve(&rhs).unwrap();
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-10, "{p} vs {q}");
        }
    }
}
