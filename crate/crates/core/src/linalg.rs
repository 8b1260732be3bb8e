//! Small dense/banded linear algebra helpers used by the collocation solver.

use crate::error::{Error, Result};

/// Banded matrix in LAPACK-style band storage with room for fill-in from
/// partial pivoting: entry `(i, j)` with `|i - j|` within the bandwidths
/// lives at `data[kl + ku + i - j][j]`.
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let rows = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; rows * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) * self.n + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j <= i + self.ku && i <= j + self.kl, "outside band");
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    /// LU factorization with partial pivoting, then solve in place.
    /// Consumes the matrix (the factorization overwrites the band).
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        // After pivoting the upper bandwidth grows to kl + ku.
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut piv = k;
            let mut piv_val = self.get(k, k).abs();
            for i in (k + 1)..=last_row {
                let v = self.get(i, k).abs();
                if v > piv_val {
                    piv = i;
                    piv_val = v;
                }
            }
            if piv_val == 0.0 {
                return Err(Error::EigensolverFailure(format!(
                    "banded LU: zero pivot at column {k}"
                )));
            }
            if piv != k {
                let last_col = (k + kl + ku).min(n - 1);
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(piv, j);
                    self.data.swap(a, b);
                }
                rhs.swap(k, piv);
            }
            let pivot = self.get(k, k);
            for i in (k + 1)..=last_row {
                let m = self.get(i, k) / pivot;
                if m != 0.0 {
                    let last_col = (k + kl + ku).min(n - 1);
                    for j in (k + 1)..=last_col {
                        let v = self.get(k, j);
                        if v != 0.0 {
                            self.add(i, j, -m * v);
                        }
                    }
                    rhs[i] -= m * rhs[k];
                }
                let idx = self.idx(i, k);
                self.data[idx] = 0.0;
            }
        }
        // Back substitution.
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let mut s = rhs[k];
            for j in (k + 1)..=last_col {
                s -= self.get(k, j) * rhs[j];
            }
            rhs[k] = s / self.get(k, k);
        }
        Ok(())
    }
}

/// Cubic Hermite evaluation on `[x0, x1]` from endpoint values and slopes.
pub fn hermite(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// Derivative of the cubic Hermite interpolant.
pub fn hermite_deriv(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * h * d1)
        / h
}

/// Solve a tridiagonal system by the Thomas algorithm (no pivoting; the
/// caller must supply a diagonally dominant system). `sub[i]` multiplies
/// `x[i-1]` in row `i` (`sub[0]` unused) and `sup[i]` multiplies `x[i+1]`
/// (`sup[n-1]` unused).
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv.abs() < 1e-300 {
        return Err(Error::RankDeficient(piv.abs()));
    }
    c[0] = sup[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i] * c[i - 1];
        if piv.abs() < 1e-300 {
            return Err(Error::RankDeficient(piv.abs()));
        }
        if i + 1 < n {
            c[i] = sup[i] / piv;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Index of the interval containing `x` in a strictly increasing grid.
pub fn bracket(grid: &[f64], x: f64) -> usize {
    match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(grid.len() - 2),
        Err(i) => i.saturating_sub(1).min(grid.len() - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn banded_vs_dense(n: usize, kl: usize, ku: usize, seed: u64) {
        // Simple deterministic pseudo-random fill.
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) * 2.0 - 1.0
        };
        let mut band = BandedMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if j <= i + ku && i <= j + kl {
                    let v = next() + if i == j { 4.0 } else { 0.0 };
                    band.set(i, j, v);
                    dense[(i, j)] = v;
                }
            }
        }
        let mut rhs: Vec<f64> = (0..n).map(|_| next()).collect();
        let expected = dense
            .lu()
            .solve(&DMatrix::from_column_slice(n, 1, &rhs))
            .unwrap();
        band.solve(&mut rhs).unwrap();
        for i in 0..n {
            assert!(
                (rhs[i] - expected[(i, 0)]).abs() < 1e-9,
                "mismatch at {i}: {} vs {}",
                rhs[i],
                expected[(i, 0)]
            );
        }
    }

    #[test]
    fn banded_solve_matches_dense() {
        banded_vs_dense(30, 8, 8, 1);
        banded_vs_dense(57, 8, 8, 2);
        banded_vs_dense(12, 2, 3, 3);
        banded_vs_dense(5, 1, 1, 4);
    }

    #[test]
    fn banded_solve_needs_pivoting() {
        // Zero on the first diagonal entry forces a row interchange.
        let mut band = BandedMatrix::zeros(3, 1, 1);
        band.set(0, 0, 0.0);
        band.set(0, 1, 2.0);
        band.set(1, 0, 1.0);
        band.set(1, 1, 1.0);
        band.set(1, 2, 1.0);
        band.set(2, 1, 1.0);
        band.set(2, 2, 3.0);
        // Solution of [[0,2,0],[1,1,1],[0,1,3]] x = b for x = (1, 2, 3).
        let mut rhs = vec![4.0, 6.0, 11.0];
        band.solve(&mut rhs).unwrap();
        assert!((rhs[0] - 1.0).abs() < 1e-12);
        assert!((rhs[1] - 2.0).abs() < 1e-12);
        assert!((rhs[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        // p(x) = x^3 - 2x + 1 on [1, 3].
        let p = |x: f64| x * x * x - 2.0 * x + 1.0;
        let dp = |x: f64| 3.0 * x * x - 2.0;
        for k in 0..=10 {
            let x = 1.0 + 0.2 * k as f64;
            assert!((hermite(x, 1.0, 3.0, p(1.0), p(3.0), dp(1.0), dp(3.0)) - p(x)).abs() < 1e-12);
            assert!(
                (hermite_deriv(x, 1.0, 3.0, p(1.0), p(3.0), dp(1.0), dp(3.0)) - dp(x)).abs()
                    < 1e-11
            );
        }
    }

    proptest! {
        #[test]
        fn bracket_finds_containing_interval(x in 0.0..9.99f64) {
            let grid: Vec<f64> = (0..11).map(|i| i as f64).collect();
            let i = bracket(&grid, x);
            prop_assert!(grid[i] <= x + 1e-12 && x <= grid[i + 1] + 1e-12);
        }
    }
}
