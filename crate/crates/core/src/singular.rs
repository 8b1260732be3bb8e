//! The singular (epsilon = 0) homoclinic skeleton.
//!
//! A standing single pulse limits on a five-segment orbit: a slow departure
//! along `W^u(X_-)`, a fast front to the right branch of the critical
//! manifold, a slow plateau, a fast back, and a slow return along
//! `W^s(X_-)`. The jump-off data are fixed by the positive roots of
//! `alpha e^{-2x} + beta e^{-2x/D} = gamma`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{ModelParams, PhasePoint};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// A positive root of the jump condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSolution {
    /// Slow-time half-width of the plateau excursion.
    pub x_star: f64,
    /// 1-based index among the ascending roots for the same parameters.
    pub root_index: usize,
}

/// Jump-condition residual `f(x) = alpha e^{-2x} + beta e^{-2x/D} - gamma`.
pub fn jump_residual(x: f64, params: &ModelParams) -> f64 {
    params.alpha * (-2.0 * x).exp() + params.beta * (-2.0 * x / params.dd).exp() - params.gamma
}

fn polish_root(mut x: f64, lo: f64, hi: f64, params: &ModelParams) -> f64 {
    // Newton refinement, guarded by the bracket.
    for _ in 0..60 {
        let f = jump_residual(x, params);
        if f.abs() < 1e-15 {
            break;
        }
        let df = -2.0 * params.alpha * (-2.0 * x).exp()
            - 2.0 / params.dd * params.beta * (-2.0 * x / params.dd).exp();
        if df == 0.0 {
            break;
        }
        let next = x - f / df;
        if next <= lo || next >= hi {
            break;
        }
        x = next;
    }
    x
}

fn bisect_root(mut lo: f64, mut hi: f64, params: &ModelParams) -> f64 {
    let flo = jump_residual(lo, params);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if flo * jump_residual(mid, params) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-16 * (1.0 + hi) {
            break;
        }
    }
    polish_root(0.5 * (lo + hi), lo.min(hi) - 1.0, hi.max(lo) + 1.0, params)
}

/// All positive roots of the jump condition, ascending. `f` is a sum of two
/// exponentials, so it has at most one interior extremum (at
/// `x = ln(-alpha D / beta) / (2 - 2/D)` when `alpha beta < 0`) and at most
/// two positive roots.
pub fn solve_jump_condition(params: &ModelParams) -> Vec<JumpSolution> {
    let ModelParams {
        alpha,
        beta,
        gamma,
        dd,
        ..
    } = *params;
    let mut roots: Vec<f64> = Vec::new();

    if gamma == 0.0 {
        // f -> 0 at infinity; the only possible root is the interior zero of
        // the two-exponential balance.
        if alpha * beta < 0.0 {
            let x = (-alpha / beta).ln() / (2.0 - 2.0 / dd);
            if x > 0.0 && jump_residual(x, params).abs() < 1e-10 {
                roots.push(polish_root(x, 0.0, x + 1.0, params));
            }
        }
    } else {
        // Beyond x_cut both exponentials are below |gamma|/4, so f keeps the
        // sign of -gamma there.
        let bound = (4.0 * (alpha.abs() + beta.abs()) / gamma.abs()).max(2.0);
        let x_cut = (dd / 2.0) * bound.ln() + 1.0;

        let mut splits = vec![0.0];
        if alpha * beta < 0.0 {
            let x_ext = (-alpha * dd / beta).ln() / (2.0 - 2.0 / dd);
            if x_ext > 0.0 && x_ext < x_cut {
                splits.push(x_ext);
            }
        }
        splits.push(x_cut);
        for pair in splits.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let flo = jump_residual(lo, params);
            let fhi = jump_residual(hi, params);
            if flo == 0.0 && lo > 0.0 {
                roots.push(lo);
            } else if flo * fhi < 0.0 {
                roots.push(bisect_root(lo, hi, params));
            } else if fhi == 0.0 && hi < x_cut {
                // Tangency at the extremum; counted once.
                roots.push(hi);
            }
        }
    }

    roots.retain(|&x| x > 0.0);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    roots
        .into_iter()
        .enumerate()
        .map(|(i, x_star)| JumpSolution {
            x_star,
            root_index: i + 1,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FastBranch {
    /// `(-1, 0) -> (+1, 0)`, positive `P`.
    Front,
    /// `(+1, 0) -> (-1, 0)`, negative `P`.
    Back,
}

/// Momentum on the fast heteroclinic at height `U`.
pub fn fast_heteroclinic_p(u: f64, branch: FastBranch) -> Result<f64> {
    if u.abs() > 1.0 {
        return Err(Error::Domain(format!("|U| = {} > 1 on heteroclinic", u.abs())));
    }
    let p = (1.0 - u * u) / SQRT2;
    Ok(match branch {
        FastBranch::Front => p,
        FastBranch::Back => -p,
    })
}

/// Time parametrization of the fast heteroclinic with `U(0) = 0`.
pub fn fast_heteroclinic_u(xi: f64, branch: FastBranch) -> f64 {
    match branch {
        FastBranch::Front => (xi / SQRT2).tanh(),
        FastBranch::Back => -(xi / SQRT2).tanh(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    SlowUnstable,
    FastFront,
    SlowPlateau,
    FastBack,
    SlowStable,
}

/// Evaluate a slow segment at its own slow time `s`.
///
/// The unstable/stable arcs sit on the lines `Q = +/-(V + 1)`,
/// `R = +/-(W + 1)` and reach the jump-off data at `s = 0`; the plateau runs
/// over `[-x_star, x_star]` with its reversibility midpoint at `s = 0`.
pub fn slow_arc(kind: SegmentKind, x_star: f64, dd: f64, s: f64) -> Result<PhasePoint> {
    let a = 1.0 - (-2.0 * x_star).exp();
    let b = 1.0 - (-2.0 * x_star / dd).exp();
    match kind {
        SegmentKind::SlowUnstable => {
            if s > 1e-12 {
                return Err(Error::Domain(format!("slow-unstable arc needs s <= 0, got {s}")));
            }
            let ev = s.exp();
            let ew = (s / dd).exp();
            Ok(PhasePoint::new(-1.0, 0.0, a * ev - 1.0, a * ev, b * ew - 1.0, b * ew))
        }
        SegmentKind::SlowPlateau => {
            if s < -x_star - 1e-12 || s > x_star + 1e-12 {
                return Err(Error::Domain(format!(
                    "plateau arc needs |s| <= x_star = {x_star}, got {s}"
                )));
            }
            let c1 = -(-x_star).exp();
            let c3 = -(-x_star / dd).exp();
            Ok(PhasePoint::new(
                1.0,
                0.0,
                2.0 * c1 * s.cosh() + 1.0,
                2.0 * c1 * s.sinh(),
                2.0 * c3 * (s / dd).cosh() + 1.0,
                2.0 * c3 * (s / dd).sinh(),
            ))
        }
        SegmentKind::SlowStable => {
            if s < -1e-12 {
                return Err(Error::Domain(format!("slow-stable arc needs s >= 0, got {s}")));
            }
            let ev = (-s).exp();
            let ew = (-s / dd).exp();
            Ok(PhasePoint::new(-1.0, 0.0, a * ev - 1.0, -a * ev, b * ew - 1.0, -b * ew))
        }
        SegmentKind::FastFront | SegmentKind::FastBack => Err(Error::Domain(
            "slow_arc called with a fast segment kind".to_string(),
        )),
    }
}

/// The assembled five-segment singular orbit.
#[derive(Debug, Clone)]
pub struct SingularOrbit {
    pub params: ModelParams,
    pub jump: JumpSolution,
    pub z1: PhasePoint,
    pub z2: PhasePoint,
    pub z3: PhasePoint,
    pub z4: PhasePoint,
}

impl SingularOrbit {
    pub fn segment_kinds() -> [SegmentKind; 5] {
        [
            SegmentKind::SlowUnstable,
            SegmentKind::FastFront,
            SegmentKind::SlowPlateau,
            SegmentKind::FastBack,
            SegmentKind::SlowStable,
        ]
    }

    /// Evaluate one segment at its own time variable (slow time for slow
    /// segments, fast time centered at `U = 0` for the jumps).
    pub fn eval_segment(&self, kind: SegmentKind, t: f64) -> Result<PhasePoint> {
        let dd = self.params.dd;
        match kind {
            SegmentKind::FastFront => {
                let u = fast_heteroclinic_u(t, FastBranch::Front);
                let p = fast_heteroclinic_p(u, FastBranch::Front)?;
                Ok(PhasePoint::new(u, p, self.z1.v, self.z1.q, self.z1.w, self.z1.r))
            }
            SegmentKind::FastBack => {
                let u = fast_heteroclinic_u(t, FastBranch::Back);
                let p = fast_heteroclinic_p(u, FastBranch::Back)?;
                Ok(PhasePoint::new(u, p, self.z3.v, self.z3.q, self.z3.w, self.z3.r))
            }
            slow => slow_arc(slow, self.jump.x_star, dd, t),
        }
    }

    /// Composite profile in fast time for a given `epsilon`, with the plateau
    /// midpoint at `xi = 0` and the jumps near `xi = +/- x_star/epsilon`.
    /// This is the seed for the boundary value solve.
    pub fn composite(&self, xi: f64, epsilon: f64) -> PhasePoint {
        let x_star = self.jump.x_star;
        let dd = self.params.dd;
        let xi_abs = xi.abs();
        let xi_jump = x_star / epsilon;
        let u = -((xi_abs - xi_jump) / SQRT2).tanh();
        let p_mag = -(1.0 - u * u) / SQRT2;
        let s = epsilon * xi_abs;
        let slow = if s <= x_star {
            slow_arc(SegmentKind::SlowPlateau, x_star, dd, s).unwrap()
        } else {
            slow_arc(SegmentKind::SlowStable, x_star, dd, s - x_star).unwrap()
        };
        if xi >= 0.0 {
            PhasePoint::new(u, p_mag, slow.v, slow.q, slow.w, slow.r)
        } else {
            PhasePoint::new(u, -p_mag, slow.v, -slow.q, slow.w, -slow.r)
        }
    }

    /// JSON description with sampled polylines for plotting.
    pub fn to_json(&self) -> serde_json::Value {
        let sample = |kind: SegmentKind, lo: f64, hi: f64, n: usize| -> Vec<Vec<f64>> {
            (0..=n)
                .map(|k| {
                    let t = lo + (hi - lo) * k as f64 / n as f64;
                    let y = self.eval_segment(kind, t).unwrap().to_vector();
                    let mut row = vec![t];
                    row.extend(y.iter());
                    row
                })
                .collect()
        };
        let x = self.jump.x_star;
        json!({
            "x_star": x,
            "root_index": self.jump.root_index,
            "params": self.params,
            "corners": { "z1": self.z1, "z2": self.z2, "z3": self.z3, "z4": self.z4 },
            "segments": [
                { "kind": "slow-unstable", "time": "slow", "polyline": sample(SegmentKind::SlowUnstable, -8.0, 0.0, 100) },
                { "kind": "fast-front", "time": "fast", "polyline": sample(SegmentKind::FastFront, -12.0, 12.0, 100) },
                { "kind": "slow-plateau", "time": "slow", "polyline": sample(SegmentKind::SlowPlateau, -x, x, 100) },
                { "kind": "fast-back", "time": "fast", "polyline": sample(SegmentKind::FastBack, -12.0, 12.0, 100) },
                { "kind": "slow-stable", "time": "slow", "polyline": sample(SegmentKind::SlowStable, 0.0, 8.0, 100) },
            ],
        })
    }
}

/// Assemble the singular orbit for one jump solution.
pub fn build_singular_orbit(params: &ModelParams, jump: &JumpSolution) -> Result<SingularOrbit> {
    let f = jump_residual(jump.x_star, params);
    if f.abs() > 1e-9 || jump.x_star <= 0.0 {
        return Err(Error::Domain(format!(
            "x_star = {} does not solve the jump condition (residual {f:e})",
            jump.x_star
        )));
    }
    let v0 = -(-2.0 * jump.x_star).exp();
    let w0 = -(-2.0 * jump.x_star / params.dd).exp();
    let z1 = PhasePoint::new(-1.0, 0.0, v0, 1.0 + v0, w0, 1.0 + w0);
    let z2 = PhasePoint::new(1.0, 0.0, v0, 1.0 + v0, w0, 1.0 + w0);
    let z3 = PhasePoint::new(1.0, 0.0, v0, -(1.0 + v0), w0, -(1.0 + w0));
    let z4 = PhasePoint::new(-1.0, 0.0, v0, -(1.0 + v0), w0, -(1.0 + w0));
    Ok(SingularOrbit {
        params: *params,
        jump: *jump,
        z1,
        z2,
        z3,
        z4,
    })
}
