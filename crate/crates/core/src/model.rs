//! Model definition: parameters, vector fields, fixed points, and the
//! linearized first-order system.
//!
//! Two coordinate orderings are used throughout the crate. Nonlinear work
//! (orbit construction, the boundary value solve) uses `(U, P, V, Q, W, R)`,
//! which keeps the fast pair `(U, P)` in front. Linear work (bundles, the
//! symplectic form) uses `(u, v, w, p, q, r)`, which exposes the Hamiltonian
//! block structure. [`PhasePoint`] converts between the two.

use nalgebra::{Matrix3x6, Matrix6, Matrix6x3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of each nonlinear coordinate `(U, P, V, Q, W, R)` inside the
/// linearized ordering `(u, v, w, p, q, r)`.
pub const NONLINEAR_TO_LINEARIZED: [usize; 6] = [0, 3, 1, 4, 2, 5];

/// Model parameters of the activator-inhibitor system.
///
/// `dd` is the inhibitor diffusion-length ratio (written `D` in formulas);
/// the config-file key is also `dd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub dd: f64,
    pub tau: f64,
    pub theta: f64,
}

impl ModelParams {
    pub fn new(
        epsilon: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        dd: f64,
        tau: f64,
        theta: f64,
    ) -> Result<Self> {
        let p = Self {
            epsilon,
            alpha,
            beta,
            gamma,
            dd,
            tau,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.alpha == 0.0 {
            return bad("alpha must be nonzero");
        }
        if self.beta == 0.0 {
            return bad("beta must be nonzero");
        }
        if !(self.dd > 1.0) {
            return bad("dd must exceed 1");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.theta > 0.0) {
            return bad("theta must be positive");
        }
        if ![self.epsilon, self.alpha, self.beta, self.gamma, self.tau, self.theta]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("parameters must be finite");
        }
        Ok(())
    }

    /// Parse a flat `key=value` config (one pair per line, `#` comments).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = Self {
            epsilon: 0.01,
            alpha: f64::NAN,
            beta: f64::NAN,
            gamma: f64::NAN,
            dd: f64::NAN,
            tau: 1.0,
            theta: 1.0,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParams(format!("line {}: expected key=value", lineno + 1))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::InvalidParams(format!("line {}: bad number {:?}", lineno + 1, value.trim()))
            })?;
            match key.trim() {
                "epsilon" => p.epsilon = value,
                "alpha" => p.alpha = value,
                "beta" => p.beta = value,
                "gamma" => p.gamma = value,
                "dd" => p.dd = value,
                "tau" => p.tau = value,
                "theta" => p.theta = value,
                other => {
                    return Err(Error::InvalidParams(format!(
                        "line {}: unknown key {:?}",
                        lineno + 1,
                        other
                    )))
                }
            }
        }
        if [p.alpha, p.beta, p.gamma, p.dd].iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParams(
                "config must set alpha, beta, gamma, dd".to_string(),
            ));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "epsilon={}\nalpha={}\nbeta={}\ngamma={}\ndd={}\ntau={}\ntheta={}\n",
            self.epsilon, self.alpha, self.beta, self.gamma, self.dd, self.tau, self.theta
        )
    }
}

/// A point of the six-dimensional phase space in nonlinear ordering.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub u: f64,
    pub p: f64,
    pub v: f64,
    pub q: f64,
    pub w: f64,
    pub r: f64,
}

impl PhasePoint {
    pub fn new(u: f64, p: f64, v: f64, q: f64, w: f64, r: f64) -> Self {
        Self { u, p, v, q, w, r }
    }

    /// `(U, P, V, Q, W, R)` as a vector.
    pub fn to_vector(self) -> Vector6<f64> {
        Vector6::new(self.u, self.p, self.v, self.q, self.w, self.r)
    }

    pub fn from_vector(y: &Vector6<f64>) -> Self {
        Self::new(y[0], y[1], y[2], y[3], y[4], y[5])
    }

    /// `(u, v, w, p, q, r)` as a vector.
    pub fn to_linearized(self) -> Vector6<f64> {
        Vector6::new(self.u, self.v, self.w, self.p, self.q, self.r)
    }

    pub fn from_linearized(y: &Vector6<f64>) -> Self {
        Self::new(y[0], y[3], y[1], y[4], y[2], y[5])
    }
}

/// Permute a nonlinear-ordered vector into linearized ordering.
pub fn nonlinear_to_linearized(y: &Vector6<f64>) -> Vector6<f64> {
    let mut out = Vector6::zeros();
    for (i, &j) in NONLINEAR_TO_LINEARIZED.iter().enumerate() {
        out[j] = y[i];
    }
    out
}

/// Permute a linearized-ordered vector into nonlinear ordering.
pub fn linearized_to_nonlinear(y: &Vector6<f64>) -> Vector6<f64> {
    let mut out = Vector6::zeros();
    for (i, &j) in NONLINEAR_TO_LINEARIZED.iter().enumerate() {
        out[i] = y[j];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timescale {
    Fast,
    Slow,
}

/// Right-hand side of the standing-wave ODE in nonlinear ordering.
///
/// The fast and slow versions describe the same dynamics and differ by a
/// factor of `epsilon` in the independent variable.
pub fn vector_field(point: &PhasePoint, params: &ModelParams, timescale: Timescale) -> Vector6<f64> {
    let ModelParams {
        epsilon: eps,
        alpha,
        beta,
        gamma,
        dd,
        ..
    } = *params;
    let PhasePoint { u, p, v, q, w, r } = *point;
    let p_dot = -u + u.powi(3) + eps * (alpha * v + beta * w + gamma);
    match timescale {
        Timescale::Fast => Vector6::new(
            p,
            p_dot,
            eps * q,
            eps * (v - u),
            eps / dd * r,
            eps / dd * (w - u),
        ),
        Timescale::Slow => Vector6::new(
            p / eps,
            p_dot / eps,
            q,
            v - u,
            r / dd,
            (w - u) / dd,
        ),
    }
}

/// Jacobian of the fast vector field in nonlinear ordering.
pub fn fast_jacobian(u: f64, params: &ModelParams) -> Matrix6<f64> {
    let a = linearization_matrix(0.0, u, params);
    let mut out = Matrix6::zeros();
    for (i, &ii) in NONLINEAR_TO_LINEARIZED.iter().enumerate() {
        for (j, &jj) in NONLINEAR_TO_LINEARIZED.iter().enumerate() {
            out[(i, j)] = a[(ii, jj)];
        }
    }
    out
}

/// Rest state `X_eps^- = (U^-, 0, U^-, 0, U^-, 0)` with `U^-` near `-1`.
pub fn fixed_point(params: &ModelParams) -> Result<PhasePoint> {
    let ModelParams {
        epsilon: eps,
        alpha,
        beta,
        gamma,
        ..
    } = *params;
    let g = |u: f64| u.powi(3) - u + eps * ((alpha + beta) * u + gamma);
    let dg = |u: f64| 3.0 * u * u - 1.0 + eps * (alpha + beta);
    let mut u = -1.0;
    for _ in 0..50 {
        let f = g(u);
        if f.abs() < 1e-14 {
            return Ok(PhasePoint::new(u, 0.0, u, 0.0, u, 0.0));
        }
        let d = dg(u);
        if d == 0.0 {
            break;
        }
        u -= f / d;
        if !(-1.5..=-0.5).contains(&u) {
            return Err(Error::NoRootNearMinusOne {
                last_u: u,
                residual: g(u).abs(),
            });
        }
    }
    if g(u).abs() < 1e-12 {
        return Ok(PhasePoint::new(u, 0.0, u, 0.0, u, 0.0));
    }
    Err(Error::NoRootNearMinusOne {
        last_u: u,
        residual: g(u).abs(),
    })
}

/// Coefficient matrix `A(lambda, xi)` of the linearized fast system, in
/// linearized ordering, with `U = U(xi)` substituted.
pub fn linearization_matrix(lambda: f64, u: f64, params: &ModelParams) -> Matrix6<f64> {
    let ModelParams {
        epsilon: eps,
        alpha,
        beta,
        dd,
        tau,
        theta,
        ..
    } = *params;
    let mut a = Matrix6::zeros();
    a[(0, 3)] = 1.0;
    a[(1, 4)] = eps;
    a[(2, 5)] = eps / dd;
    a[(3, 0)] = lambda - 1.0 + 3.0 * u * u;
    a[(3, 1)] = alpha * eps;
    a[(3, 2)] = beta * eps;
    a[(4, 0)] = -eps;
    a[(4, 1)] = eps * (lambda * tau + 1.0);
    a[(5, 0)] = -eps / dd;
    a[(5, 2)] = eps / dd * (lambda * theta + 1.0);
    a
}

/// Eigenstructure of the asymptotic matrix `A_infinity(lambda)`.
///
/// Eigenvalues are sorted ascending; eigenvectors are unit vectors with the
/// first nonzero component positive, in linearized ordering.
#[derive(Debug, Clone)]
pub struct EigenSplitting {
    pub mu: [f64; 6],
    /// Eigenvector columns, ordered with `mu`.
    pub eta: Matrix6<f64>,
    /// Span of the three decaying directions.
    pub stable: Matrix6x3<f64>,
    /// Span of the three growing directions.
    pub unstable: Matrix6x3<f64>,
    /// Left eigenvector rows for the unstable triple; annihilate `S(lambda)`.
    pub unstable_left: Matrix3x6<f64>,
    /// Left eigenvector rows for the stable triple; annihilate `U(lambda)`.
    pub stable_left: Matrix3x6<f64>,
}

/// Stable/unstable splitting of `A_infinity(lambda)` at the rest state.
pub fn asymptotic_splitting(lambda: f64, params: &ModelParams) -> Result<EigenSplitting> {
    let rest = fixed_point(params)?;
    let a = linearization_matrix(lambda, rest.u, params);
    eigen_splitting_of(&a)
}

/// Splitting of an explicit hyperbolic 6x6 matrix with real spectrum.
pub fn eigen_splitting_of(a: &Matrix6<f64>) -> Result<EigenSplitting> {
    use ndarray::Array2;
    use ndarray_linalg::Eig;

    let mut nd = Array2::<f64>::zeros((6, 6));
    for i in 0..6 {
        for j in 0..6 {
            nd[(i, j)] = a[(i, j)];
        }
    }
    let (vals, vecs) = nd
        .eig()
        .map_err(|e| Error::EigensolverFailure(format!("{e}")))?;
    let scale = vals.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    for z in vals.iter() {
        if z.im.abs() > 1e-9 * scale.max(1.0) {
            return Err(Error::EigensolverFailure(format!(
                "complex eigenvalue {} in asymptotic splitting",
                z
            )));
        }
    }
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| vals[i].re.partial_cmp(&vals[j].re).unwrap());

    let mut mu = [0.0; 6];
    let mut eta = Matrix6::zeros();
    for (k, &idx) in order.iter().enumerate() {
        mu[k] = vals[idx].re;
        if mu[k].abs() < 1e-10 {
            return Err(Error::NotHyperbolic(mu[k].abs()));
        }
        let mut col = Vector6::zeros();
        for i in 0..6 {
            col[i] = vecs[(i, idx)].re;
        }
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::EigensolverFailure("zero eigenvector".to_string()));
        }
        col /= norm;
        // Sign convention: first nonzero component positive.
        if let Some(first) = col.iter().find(|c| c.abs() > 1e-10) {
            if *first < 0.0 {
                col = -col;
            }
        }
        eta.set_column(k, &col);
    }

    let mut stable = Matrix6x3::zeros();
    let mut unstable = Matrix6x3::zeros();
    for i in 0..6 {
        for k in 0..3 {
            stable[(i, k)] = eta[(i, k)];
            unstable[(i, k)] = eta[(i, 3 + k)];
        }
    }
    let inv = eta
        .try_inverse()
        .ok_or_else(|| Error::EigensolverFailure("eigenbasis not invertible".to_string()))?;
    let mut unstable_left = Matrix3x6::zeros();
    let mut stable_left = Matrix3x6::zeros();
    for k in 0..3 {
        for j in 0..6 {
            stable_left[(k, j)] = inv[(k, j)];
            unstable_left[(k, j)] = inv[(3 + k, j)];
        }
    }
    Ok(EigenSplitting {
        mu,
        eta,
        stable,
        unstable,
        unstable_left,
        stable_left,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn params(epsilon: f64, alpha: f64, beta: f64, gamma: f64, dd: f64) -> ModelParams {
        ModelParams::new(epsilon, alpha, beta, gamma, dd, 1.0, 1.0).unwrap()
    }

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn fixed_point_epsilon_limit() {
        let p = params(1e-8, 2.0, 1.0, 1.0, 5.0);
        let x = fixed_point(&p).unwrap();
        assert_abs_diff_eq!(x.u, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn fixed_point_unperturbed_is_exact() {
        let p = ModelParams::new(0.01, 1e-300, 1e-300, 0.0, 5.0, 1.0, 1.0).unwrap();
        let x = fixed_point(&p).unwrap();
        assert_eq!(x.u, -1.0);
    }

    #[test]
    fn fixed_point_matches_bisection_oracle() {
        let p = params(0.01, 2.0, 1.0, 1.0, 5.0);
        let x = fixed_point(&p).unwrap();
        let cubic = |u: f64| u.powi(3) - u + 0.01 * (3.0 * u + 1.0);
        let oracle = bisect(-1.2, -0.8, cubic);
        assert_abs_diff_eq!(x.u, oracle, epsilon = 1e-12);
        // Residual of the full vector field at the rest state.
        let f = vector_field(&x, &p, Timescale::Fast);
        assert!(f.norm() < 1e-12);
        assert!((x.u + 1.0).abs() <= 10.0 * p.epsilon);
    }

    #[test]
    fn vector_field_reduced_fast_front_point() {
        // epsilon -> 0 on the fast scale: only the (U, P) pair moves.
        let mut p = params(1.0, 2.0, 1.0, 1.0, 5.0);
        p.epsilon = 0.0;
        let y = PhasePoint::new(0.0, 1.0 / 2f64.sqrt(), 0.3, -0.2, 0.5, 0.1);
        let f = vector_field(&y, &p, Timescale::Fast);
        assert_abs_diff_eq!(f[0], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        for k in 1..6 {
            assert_abs_diff_eq!(f[k], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn vector_field_direct_substitution() {
        let p = params(0.01, 1.0, 1.0, 0.0, 5.0);
        let y = PhasePoint::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let f = vector_field(&y, &p, Timescale::Fast);
        assert_abs_diff_eq!(f[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[3], -0.01, epsilon = 1e-15);
    }

    #[test]
    fn fast_and_slow_timescales_agree_after_rescaling() {
        let p = params(0.02, 2.0, 1.0, 1.0, 5.0);
        let y = PhasePoint::new(0.3, -0.1, 0.2, 0.4, -0.6, 0.5);
        let fast = vector_field(&y, &p, Timescale::Fast);
        let slow = vector_field(&y, &p, Timescale::Slow);
        for k in 0..6 {
            assert_abs_diff_eq!(fast[k], p.epsilon * slow[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn linearization_reduced_entries() {
        let mut p = params(1.0, 2.0, 1.0, 1.0, 5.0);
        p.epsilon = 0.0;
        let a = linearization_matrix(0.0, 0.0, &p);
        let mut expected = Matrix6::zeros();
        expected[(0, 3)] = 1.0;
        expected[(3, 0)] = -1.0;
        assert_eq!(a, expected);
        let a = linearization_matrix(0.0, -1.0, &p);
        assert_eq!(a[(3, 0)], 2.0);
    }

    #[test]
    fn linearization_entry_by_entry() {
        let p = ModelParams::new(0.01, 2.0, 3.0, 0.0, 2.0, 1.0, 1.0).unwrap();
        let a = linearization_matrix(0.5, 1.0, &p);
        assert_abs_diff_eq!(a[(3, 0)], 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(3, 1)], 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(3, 2)], 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(4, 0)], -0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(4, 1)], 0.015, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(5, 2)], 0.0075, epsilon = 1e-15);
    }

    #[test]
    fn splitting_leading_order_eigenvalues() {
        let p = params(0.01, 2.0, 1.0, 1.0, 2.0);
        let s = asymptotic_splitting(0.0, &p).unwrap();
        let expected = [-2f64.sqrt(), -0.01, -0.005, 0.005, 0.01, 2f64.sqrt()];
        // Fast eigenvalues pick up an O(epsilon) shift through U^-; slow ones
        // are accurate to O(epsilon^2).
        let tol = [3e-2, 5e-4, 5e-4, 5e-4, 5e-4, 3e-2];
        for k in 0..6 {
            assert_abs_diff_eq!(s.mu[k], expected[k], epsilon = tol[k]);
        }
        // Hamiltonian symmetry of the exact spectrum.
        for k in 0..6 {
            assert_abs_diff_eq!(s.mu[k], -s.mu[5 - k], epsilon = 1e-10);
        }
    }

    #[test]
    fn splitting_eigenvectors_converge_to_eta_basis() {
        let p = params(1e-7, 2.0, 1.0, 1.0, 5.0);
        let s = asymptotic_splitting(0.0, &p).unwrap();
        // Unit-normalized eta basis of the singular limit.
        let sq = 1.0 / 3f64.sqrt();
        let e = 1.0 / 2f64.sqrt();
        let eta: [[f64; 6]; 6] = [
            [sq, 0.0, 0.0, -sq * 2f64.sqrt(), 0.0, 0.0],
            [0.0, e, 0.0, 0.0, -e, 0.0],
            [0.0, 0.0, e, 0.0, 0.0, -e],
            [0.0, 0.0, e, 0.0, 0.0, e],
            [0.0, e, 0.0, 0.0, e, 0.0],
            [sq, 0.0, 0.0, sq * 2f64.sqrt(), 0.0, 0.0],
        ];
        for k in 0..6 {
            let col = s.eta.column(k);
            let mut dot = 0.0;
            for i in 0..6 {
                dot += col[i] * eta[k][i];
            }
            assert!(dot.abs() > 1.0 - 1e-4, "column {k}: overlap {dot}");
        }
    }

    #[test]
    fn splitting_left_rows_annihilate_opposite_frames() {
        let p = params(0.01, -5.0, 5.0, 0.5, 5.0);
        let s = asymptotic_splitting(0.0, &p).unwrap();
        assert!((s.unstable_left * s.stable).norm() < 1e-10);
        assert!((s.stable_left * s.unstable).norm() < 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = params(0.01, 2.0, 1.0, 1.0, 5.0);
        let y = PhasePoint::new(0.4, -0.3, 0.2, 0.1, -0.5, 0.6);
        let jac = fast_jacobian(y.u, &p);
        let h = 1e-6;
        let base = y.to_vector();
        for j in 0..6 {
            let mut plus = base;
            let mut minus = base;
            plus[j] += h;
            minus[j] -= h;
            let fp = vector_field(&PhasePoint::from_vector(&plus), &p, Timescale::Fast);
            let fm = vector_field(&PhasePoint::from_vector(&minus), &p, Timescale::Fast);
            for i in 0..6 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                let scale = jac[(i, j)].abs().max(1.0);
                assert!(
                    (fd - jac[(i, j)]).abs() < 1e-6 * scale,
                    "entry ({i},{j}): fd {fd} vs {}",
                    jac[(i, j)]
                );
            }
        }
    }

    #[test]
    fn config_round_trip() {
        let p = params(0.01, 2.0, 1.0, 1.0, 5.0);
        let q = ModelParams::from_config_str(&p.to_config_string()).unwrap();
        assert_eq!(p, q);
        let json = serde_json::to_string(&p).unwrap();
        let r: ModelParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, r);
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(ModelParams::from_config_str("alpha=2\nbeta=1\n").is_err());
        assert!(ModelParams::from_config_str("alpha=x\n").is_err());
        assert!(ModelParams::new(0.01, 2.0, 1.0, 1.0, 0.5, 1.0, 1.0).is_err());
        assert!(ModelParams::new(-0.01, 2.0, 1.0, 1.0, 5.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn permutation_round_trip(u in -2.0..2.0f64, p in -2.0..2.0f64, v in -2.0..2.0f64,
                                  q in -2.0..2.0f64, w in -2.0..2.0f64, r in -2.0..2.0f64) {
            let y = PhasePoint::new(u, p, v, q, w, r);
            let back = PhasePoint::from_linearized(&y.to_linearized());
            prop_assert_eq!(y, back);
            let vec = y.to_vector();
            let there = nonlinear_to_linearized(&vec);
            let back2 = linearized_to_nonlinear(&there);
            prop_assert_eq!(vec, back2);
        }
    }
}
