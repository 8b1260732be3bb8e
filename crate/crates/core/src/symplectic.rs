//! The symplectic form, Lagrangian frames, and Pluecker coordinates on
//! `Gr(3, 6)`.
//!
//! All vectors here live in the linearized ordering `(u, v, w, p, q, r)`.
//! The form is `omega = du^dp - alpha dv^dq - beta D dw^dr`; it is preserved
//! by the linearized flow, so the set of Lagrangian 3-planes is invariant.

use nalgebra::{Matrix3, Matrix6, Matrix6x3, Vector6};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::singular::SQRT2;

/// Matrix of the symplectic form in linearized ordering.
pub fn omega_matrix(params: &ModelParams) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m[(0, 3)] = 1.0;
    m[(3, 0)] = -1.0;
    m[(1, 4)] = -params.alpha;
    m[(4, 1)] = params.alpha;
    m[(2, 5)] = -params.beta * params.dd;
    m[(5, 2)] = params.beta * params.dd;
    m
}

/// `omega(x, y) = x^T Omega y`.
pub fn omega_form(x: &Vector6<f64>, y: &Vector6<f64>, params: &ModelParams) -> f64 {
    (x[0] * y[3] - x[3] * y[0]) - params.alpha * (x[1] * y[4] - x[4] * y[1])
        - params.beta * params.dd * (x[2] * y[5] - x[5] * y[2])
}

/// The singular-limit eigenbasis `eta_1 .. eta_6` with the paper-style
/// normalization (entries `0`, `+/-1`, `+/-sqrt(2)`), as matrix columns.
pub fn eta_basis() -> Matrix6<f64> {
    Matrix6::from_columns(&[
        Vector6::new(1.0, 0.0, 0.0, -SQRT2, 0.0, 0.0),
        Vector6::new(0.0, 1.0, 0.0, 0.0, -1.0, 0.0),
        Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, -1.0),
        Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 1.0),
        Vector6::new(0.0, 1.0, 0.0, 0.0, 1.0, 0.0),
        Vector6::new(1.0, 0.0, 0.0, SQRT2, 0.0, 0.0),
    ])
}

/// Combination of eta-basis coefficients into a standard-ordering vector.
pub fn eta_combination(coeffs: &[f64; 6]) -> Vector6<f64> {
    eta_basis() * Vector6::from_row_slice(coeffs)
}

/// A 3-plane in `R^6` given by a spanning frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    pub columns: Matrix6x3<f64>,
    pub orthonormal: bool,
}

impl LagrangianFrame {
    /// Wrap a frame, rejecting rank-deficient spans. Columns are rescaled to
    /// unit length before the rank test so the check is about the plane, not
    /// the conditioning of a particular frame.
    pub fn new(columns: Matrix6x3<f64>) -> Result<Self> {
        let mut scaled = columns;
        for k in 0..3 {
            let n = scaled.column(k).norm();
            if n == 0.0 {
                return Err(Error::RankDeficient(0.0));
            }
            let col = scaled.column(k).into_owned() / n;
            scaled.set_column(k, &col);
        }
        let svd = scaled.svd(false, false);
        let smin = svd.singular_values[2];
        if smin < 1e-10 {
            return Err(Error::RankDeficient(smin));
        }
        Ok(Self {
            columns,
            orthonormal: false,
        })
    }

    pub fn from_columns(a: Vector6<f64>, b: Vector6<f64>, c: Vector6<f64>) -> Result<Self> {
        Self::new(Matrix6x3::from_columns(&[a, b, c]))
    }

    /// Orthonormalized copy (QR with positive diagonal, so the orientation of
    /// the column span is kept).
    pub fn orthonormalized(&self) -> Self {
        Self {
            columns: orthonormalize_positive(&self.columns).0,
            orthonormal: true,
        }
    }

    /// Largest pairwise `|omega(v_i, v_j)|` over the frame columns.
    pub fn lagrangian_residual(&self, params: &ModelParams) -> f64 {
        let f = self.orthonormalized();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let vi = f.columns.column(i).into_owned();
                let vj = f.columns.column(j).into_owned();
                worst = worst.max(omega_form(&vi, &vj, params).abs());
            }
        }
        worst
    }

    pub fn is_lagrangian(&self, params: &ModelParams, tol: f64) -> (bool, f64) {
        let residual = self.lagrangian_residual(params);
        (residual < tol, residual)
    }
}

/// QR factorization of a 6x3 frame with positive diagonal of the triangular
/// factor. The determinant of any 6x6 matrix completed with these columns
/// keeps its sign under the substitution.
pub fn orthonormalize_positive(frame: &Matrix6x3<f64>) -> (Matrix6x3<f64>, Matrix3<f64>) {
    let mut q = *frame;
    let mut r = Matrix3::zeros();
    for k in 0..3 {
        for j in 0..k {
            let proj = q.column(j).dot(&q.column(k));
            r[(j, k)] = proj;
            let col_j = q.column(j).into_owned();
            let mut col_k = q.column(k).into_owned();
            col_k -= proj * col_j;
            q.set_column(k, &col_k);
        }
        // Re-orthogonalize once; plain Gram-Schmidt loses digits.
        for j in 0..k {
            let proj = q.column(j).dot(&q.column(k));
            r[(j, k)] += proj;
            let col_j = q.column(j).into_owned();
            let mut col_k = q.column(k).into_owned();
            col_k -= proj * col_j;
            q.set_column(k, &col_k);
        }
        let norm = q.column(k).norm();
        r[(k, k)] = norm;
        let col_k = q.column(k).into_owned() / norm;
        q.set_column(k, &col_k);
    }
    (q, r)
}

/// Operator-norm distance between the orthogonal projectors of two planes,
/// in `[0, 1]`; `0` iff equal planes.
pub fn plane_gap(a: &LagrangianFrame, b: &LagrangianFrame) -> Result<f64> {
    let qa = a.orthonormalized().columns;
    let qb = b.orthonormalized().columns;
    let m: Matrix3<f64> = qa.transpose() * qb;
    let svd = m.svd(false, false);
    let smin: f64 = svd.singular_values[2].min(1.0);
    Ok((1.0 - smin * smin).max(0.0).sqrt())
}

/// Determinant of the 6x6 matrix `[a | b]`.
pub fn det_frames(a: &Matrix6x3<f64>, b: &Matrix6x3<f64>) -> f64 {
    let mut m = Matrix6::zeros();
    for i in 0..6 {
        for k in 0..3 {
            m[(i, k)] = a[(i, k)];
            m[(i, 3 + k)] = b[(i, k)];
        }
    }
    m.determinant()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PluckerBasis {
    Standard,
    Eta,
}

/// Lexicographic 3-subsets of `{0..5}`.
pub const TRIPLES: [(usize, usize, usize); 20] = [
    (0, 1, 2),
    (0, 1, 3),
    (0, 1, 4),
    (0, 1, 5),
    (0, 2, 3),
    (0, 2, 4),
    (0, 2, 5),
    (0, 3, 4),
    (0, 3, 5),
    (0, 4, 5),
    (1, 2, 3),
    (1, 2, 4),
    (1, 2, 5),
    (1, 3, 4),
    (1, 3, 5),
    (1, 4, 5),
    (2, 3, 4),
    (2, 3, 5),
    (2, 4, 5),
    (3, 4, 5),
];

/// Projective coordinates of a 3-plane: the twenty 3x3 minors of its frame,
/// normalized by the entry of largest magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerVector {
    pub coords: [f64; 20],
    pub basis: PluckerBasis,
}

impl PluckerVector {
    /// Coordinate for an index triple given 1-based indices in any order
    /// (antisymmetric; zero on repeats).
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == j || j == k || i == k {
            return 0.0;
        }
        let mut idx = [i - 1, j - 1, k - 1];
        let mut sign = 1.0;
        // Sort the three indices, tracking the permutation parity.
        for a in 0..2 {
            for b in 0..(2 - a) {
                if idx[b] > idx[b + 1] {
                    idx.swap(b, b + 1);
                    sign = -sign;
                }
            }
        }
        let pos = TRIPLES
            .iter()
            .position(|&t| t == (idx[0], idx[1], idx[2]))
            .unwrap();
        sign * self.coords[pos]
    }

    /// Largest violation of the Grassmann-Pluecker quadratic relations.
    pub fn grassmann_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 1..=6usize {
            for b in (a + 1)..=6 {
                for &(j0, j1, j2) in TRIPLES.iter() {
                    // Exchange relation over a 4-set {j0, j1, j2, extra}.
                    for extra in (j2 + 1)..6 {
                        let js = [j0 + 1, j1 + 1, j2 + 1, extra + 1];
                        let mut acc = 0.0;
                        for (t, &jt) in js.iter().enumerate() {
                            let mut rest = js.to_vec();
                            rest.remove(t);
                            let term = self.get(a, b, jt) * self.get(rest[0], rest[1], rest[2]);
                            acc += if t % 2 == 0 { term } else { -term };
                        }
                        worst = worst.max(acc.abs());
                    }
                }
            }
        }
        worst
    }

    /// JSON object keyed by 1-based index strings `"123" .. "456"`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (pos, &(i, j, k)) in TRIPLES.iter().enumerate() {
            map.insert(
                format!("{}{}{}", i + 1, j + 1, k + 1),
                json!(self.coords[pos]),
            );
        }
        json!({
            "basis": match self.basis { PluckerBasis::Standard => "standard", PluckerBasis::Eta => "eta" },
            "coords": map,
        })
    }

    /// True when the two projective vectors agree up to a global sign.
    pub fn matches(&self, other: &PluckerVector, tol: f64) -> bool {
        let direct: f64 = (0..20)
            .map(|k| (self.coords[k] - other.coords[k]).abs())
            .fold(0.0, f64::max);
        let flipped: f64 = (0..20)
            .map(|k| (self.coords[k] + other.coords[k]).abs())
            .fold(0.0, f64::max);
        direct.min(flipped) < tol
    }
}

/// Pluecker coordinates of a frame, optionally re-expressed in the eta basis
/// first.
pub fn plucker_coords(frame: &LagrangianFrame, basis: PluckerBasis) -> Result<PluckerVector> {
    let mut cols = match basis {
        PluckerBasis::Standard => frame.columns,
        PluckerBasis::Eta => {
            let inv = eta_basis()
                .try_inverse()
                .expect("eta basis is invertible");
            inv * frame.columns
        }
    };
    // Coordinates are projective, so rescale columns for numerical safety.
    for k in 0..3 {
        let n = cols.column(k).norm();
        if n == 0.0 {
            return Err(Error::RankDeficient(0.0));
        }
        let col = cols.column(k).into_owned() / n;
        cols.set_column(k, &col);
    }
    let svd = cols.svd(false, false);
    if svd.singular_values[2] < 1e-10 {
        return Err(Error::RankDeficient(svd.singular_values[2]));
    }
    let mut coords = [0.0; 20];
    for (pos, &(i, j, k)) in TRIPLES.iter().enumerate() {
        let m = Matrix3::new(
            cols[(i, 0)],
            cols[(i, 1)],
            cols[(i, 2)],
            cols[(j, 0)],
            cols[(j, 1)],
            cols[(j, 2)],
            cols[(k, 0)],
            cols[(k, 1)],
            cols[(k, 2)],
        );
        coords[pos] = m.determinant();
    }
    let max = coords.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    for c in coords.iter_mut() {
        *c /= max;
    }
    Ok(PluckerVector { coords, basis })
}
