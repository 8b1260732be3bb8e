//! The standing pulse at ε > 0, computed as a two-point boundary value
//! problem on a truncated fast-time interval.
//!
//! The wave is even in ξ, so we solve on the half interval `[0, L]` with
//! symmetry conditions `P(0) = Q(0) = R(0) = 0`, confine the far end to the
//! stable eigenspace of the asymptotic linearization, and mirror. The
//! discretization is the fourth-order mono-implicit Runge–Kutta formula
//! (Simpson's rule with an interpolated midpoint stage — the condensed
//! three-stage Lobatto IIIA scheme) on a mesh concentrated near the fast
//! front, with a geometrically coarsening tail: the slow fields relax at
//! rate ε/D, so the domain must extend many slow units past the jump before
//! the endpoint is close to the fixed point. Fourth order matters:
//! conjugate-point detection fits the wave derivative into transported
//! Lagrangian frames at 1e-6 accuracy, which a second-order profile on this
//! mesh cannot deliver.

use nalgebra::Vector6;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{bracket, hermite, hermite_deriv, BandedMatrix};
use crate::model::{
    asymptotic_splitting, fast_jacobian, fixed_point, vector_field, ModelParams, PhasePoint,
    Timescale, NONLINEAR_TO_LINEARIZED,
};
use crate::singular::{build_singular_orbit, JumpSolution, SingularOrbit};

/// Fast-front node spacing. Far tighter than plain profile accuracy needs:
/// the O(h^4) profile error at the fronts perturbs the linearized flow
/// there, and the perturbation rides the slow growing mode exp((ε/D)ξ) down
/// the tail. Keeping the wave derivative inside the transported unstable
/// bundle within 1e-6 over the whole (thousands of fast units long) domain
/// requires the front error at ~1e-9, hence this spacing.
const H_LAYER: f64 = 0.005;
/// Plateau spacing (solution varies at rate ε there).
const H_PLATEAU: f64 = 1.5;
/// Cap on tail spacing (solution varies at rate ε/D there; the cap is set
/// by cubic-interpolant derivative accuracy, not by the solve itself).
const H_TAIL_MAX: f64 = 6.0;
/// Fast-time half-width of the refined window around each jump.
const LAYER_HALF_WIDTH: f64 = 12.0;

/// A computed standing-pulse profile on `[-L, L]`.
#[derive(Debug, Clone)]
pub struct PulseProfile {
    /// Strictly increasing fast-time nodes spanning `[-L, L]`.
    pub grid: Vec<f64>,
    pub values: Vec<PhasePoint>,
    pub params: ModelParams,
    /// The jump solution that seeded the solve.
    pub x_star: JumpSolution,
    /// Index of ξ = 0, where the odd components vanish.
    pub midpoint: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalOrder {
    Value,
    Derivative,
}

/// Default truncation: the slow fields decay like `exp(-(ξ - x*/ε)·ε/D)`,
/// so 15 slow units of margin put the endpoint within ~3e-7 of the fixed
/// point.
pub fn default_half_width(params: &ModelParams, jump: &JumpSolution) -> f64 {
    (jump.x_star + 15.0 * params.dd) / params.epsilon
}

/// Graded half-interval mesh: `[0, L]` with a dense window around the jump
/// at `x*/ε`, moderate spacing on the plateau, and a geometric tail.
fn build_half_mesh(l: f64, xi_jump: f64, refine: f64) -> Vec<f64> {
    assert!(refine > 0.0);
    let h_layer = H_LAYER / refine;
    let h_plateau = H_PLATEAU / refine;
    let h_tail_max = H_TAIL_MAX / refine;
    let a = (xi_jump - LAYER_HALF_WIDTH).max(0.0);
    let b = (xi_jump + LAYER_HALF_WIDTH).min(l);

    let mut mesh = vec![0.0];
    let push_uniform = |mesh: &mut Vec<f64>, to: f64, h: f64| {
        let from = *mesh.last().unwrap();
        if to <= from {
            return;
        }
        let n = ((to - from) / h).ceil().max(1.0) as usize;
        let step = (to - from) / n as f64;
        for k in 1..=n {
            mesh.push(from + step * k as f64);
        }
    };
    push_uniform(&mut mesh, a, h_plateau);
    push_uniform(&mut mesh, b, h_layer);
    // Geometric coarsening from the layer spacing up to the tail cap.
    let mut h = h_layer;
    while *mesh.last().unwrap() < l {
        h = (h * 1.12).min(h_tail_max).min(l - mesh.last().unwrap());
        let next = mesh.last().unwrap() + h;
        mesh.push(next);
    }
    *mesh.last_mut().unwrap() = l;
    mesh
}

/// The discrete half-interval collocation system.
struct HalfSystem<'a> {
    params: &'a ModelParams,
    mesh: &'a [f64],
    /// Projection rows in nonlinear component ordering: left eigenvector
    /// rows of the unstable eigenvalues annihilate the stable eigenspace.
    proj: [[f64; 6]; 3],
    xfix: Vector6<f64>,
}

impl<'a> HalfSystem<'a> {
    fn new(params: &'a ModelParams, mesh: &'a [f64]) -> Result<Self> {
        let xfix = fixed_point(params)?.to_vector();
        let splitting = asymptotic_splitting(0.0, params)?;
        let mut proj = [[0.0; 6]; 3];
        for k in 0..3 {
            for j in 0..6 {
                proj[k][j] = splitting.unstable_left[(k, NONLINEAR_TO_LINEARIZED[j])];
            }
        }
        Ok(Self {
            params,
            mesh,
            proj,
            xfix,
        })
    }

    fn intervals(&self) -> usize {
        self.mesh.len() - 1
    }

    fn unknowns(&self) -> usize {
        6 * self.mesh.len()
    }

    /// Residual plus a scaled norm: collocation rows report the ODE defect,
    /// not the increment defect (tail intervals are up to 250x wider than
    /// layer ones).
    fn residual(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let m = self.intervals();
        let mut r = vec![0.0; self.unknowns()];
        r[0] = z[1];
        r[1] = z[3];
        r[2] = z[5];
        let mut worst: f64 = r[0].abs().max(r[1].abs()).max(r[2].abs());
        for i in 0..m {
            let h = self.mesh[i + 1] - self.mesh[i];
            let yi = Vector6::from_row_slice(&z[6 * i..6 * i + 6]);
            let yn = Vector6::from_row_slice(&z[6 * (i + 1)..6 * (i + 1) + 6]);
            let fi = vector_field(&PhasePoint::from_vector(&yi), self.params, Timescale::Fast);
            let fn_ = vector_field(&PhasePoint::from_vector(&yn), self.params, Timescale::Fast);
            let yh = 0.5 * (yi + yn) + (h / 8.0) * (fi - fn_);
            let fh = vector_field(&PhasePoint::from_vector(&yh), self.params, Timescale::Fast);
            for c in 0..6 {
                let defect = yn[c] - yi[c] - (h / 6.0) * (fi[c] + 4.0 * fh[c] + fn_[c]);
                r[3 + 6 * i + c] = defect;
                worst = worst.max((defect / h).abs());
            }
        }
        for k in 0..3 {
            let mut s = 0.0;
            for j in 0..6 {
                s += self.proj[k][j] * (z[6 * m + j] - self.xfix[j]);
            }
            r[3 + 6 * m + k] = s;
            worst = worst.max(s.abs());
        }
        (r, worst)
    }

    fn assemble(&self, z: &[f64]) -> BandedMatrix {
        let m = self.intervals();
        let mut jac = BandedMatrix::zeros(self.unknowns(), 8, 8);
        jac.set(0, 1, 1.0);
        jac.set(1, 3, 1.0);
        jac.set(2, 5, 1.0);
        let eye = nalgebra::Matrix6::<f64>::identity();
        for i in 0..m {
            let h = self.mesh[i + 1] - self.mesh[i];
            let yi = Vector6::from_row_slice(&z[6 * i..6 * i + 6]);
            let yn = Vector6::from_row_slice(&z[6 * (i + 1)..6 * (i + 1) + 6]);
            let fi = vector_field(&PhasePoint::from_vector(&yi), self.params, Timescale::Fast);
            let fn_ = vector_field(&PhasePoint::from_vector(&yn), self.params, Timescale::Fast);
            let yh = 0.5 * (yi + yn) + (h / 8.0) * (fi - fn_);
            let ji = fast_jacobian(yi[0], self.params);
            let jn = fast_jacobian(yn[0], self.params);
            let jh = fast_jacobian(yh[0], self.params);
            // Chain rule through the interpolated stage: the defect depends
            // on y_i both directly and via y_half.
            let d_left = -eye - (h / 6.0) * (ji + 4.0 * jh * (0.5 * eye + (h / 8.0) * ji));
            let d_right = eye - (h / 6.0) * (jn + 4.0 * jh * (0.5 * eye - (h / 8.0) * jn));
            for c in 0..6 {
                let row = 3 + 6 * i + c;
                for d in 0..6 {
                    jac.set(row, 6 * i + d, d_left[(c, d)]);
                    jac.set(row, 6 * (i + 1) + d, d_right[(c, d)]);
                }
            }
        }
        for k in 0..3 {
            for j in 0..6 {
                jac.set(3 + 6 * m + k, 6 * m + j, self.proj[k][j]);
            }
        }
        jac
    }

    fn newton_direction(&self, z: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let jac = self.assemble(z);
        let mut delta = r.iter().map(|v| -v).collect::<Vec<f64>>();
        jac.solve(&mut delta)?;
        Ok(delta)
    }
}

/// Newton solve of the half-interval collocation system. `seed` supplies the
/// initial guess per node.
fn solve_half(
    params: &ModelParams,
    mesh: &[f64],
    seed: impl Fn(f64) -> PhasePoint,
) -> Result<Vec<PhasePoint>> {
    let m = mesh.len() - 1;
    let system = HalfSystem::new(params, mesh)?;

    let mut z: Vec<f64> = Vec::with_capacity(system.unknowns());
    for &xi in mesh {
        let y = seed(xi).to_vector();
        z.extend_from_slice(y.as_slice());
    }

    let point_at = |z: &[f64], i: usize| -> PhasePoint {
        PhasePoint::from_vector(&Vector6::from_row_slice(&z[6 * i..6 * i + 6]))
    };

    let (mut r, mut norm) = system.residual(&z);
    let mut best_norm = norm;
    let mut since_best = 0usize;
    // The convergence tolerance is near roundoff on purpose: leftover
    // algebraic defect integrates against the slow Green's function (time
    // scale D/ε), so a 1e-11 defect would leave ~1e-9 errors in the slow
    // fields — enough to break downstream bundle-containment guarantees.
    for _ in 0..300 {
        if norm < 1e-13 {
            return Ok((0..=m).map(|i| point_at(&z, i)).collect());
        }
        let delta = system.newton_direction(&z, &r)?;
        // Error-oriented damping: accept a step when the simplified Newton
        // correction at the trial point (same Jacobian) contracts, even if
        // the residual transiently rises. Plain residual monotonicity stalls
        // here: a small ODE defect can demand an O(1) front shift, and the
        // residual grows along that path before it collapses.
        let delta_norm = delta.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
        // Trust-region cap: the Jacobian has a soft front-displacement mode
        // for wide, weakly pinned pulses, and an uncapped full step along it
        // overshoots into a residual limit cycle. The fields are O(1), so
        // capping the per-node change keeps steps in the basin.
        let mut t = (0.4 / delta_norm).min(1.0);
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            let (rt, nt) = system.residual(&trial);
            if !nt.is_finite() {
                t *= 0.5;
                continue;
            }
            if nt < (1.0 - 0.25 * t) * norm {
                z = trial;
                r = rt;
                norm = nt;
                accepted = true;
                break;
            }
            let simplified = system.newton_direction(&trial, &rt)?;
            let s_norm = simplified.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
            if s_norm < (1.0 - 0.25 * t) * delta_norm {
                z = trial;
                r = rt;
                norm = nt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        // Stagnation guard on the residual envelope. The damped iteration
        // routinely oscillates (a front-position correction raises the
        // residual before it collapses), so individual norms are not
        // monotone; track the best norm seen and give up only after a long
        // run of accepted steps with no envelope progress.
        if norm < 0.75 * best_norm {
            best_norm = norm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 25 {
                break;
            }
        }
    }
    if norm.is_finite() && norm < 1e-6 {
        Err(Error::MeshTooCoarse { residual: norm })
    } else {
        Err(Error::NewtonDiverged { residual: norm })
    }
}

fn mirror(mesh: &[f64], half: Vec<PhasePoint>, params: &ModelParams, jump: &JumpSolution) -> PulseProfile {
    let m = mesh.len() - 1;
    let mut grid = Vec::with_capacity(2 * m + 1);
    let mut values = Vec::with_capacity(2 * m + 1);
    for i in (1..=m).rev() {
        grid.push(-mesh[i]);
        let y = half[i];
        values.push(PhasePoint::new(y.u, -y.p, y.v, -y.q, y.w, -y.r));
    }
    for i in 0..=m {
        grid.push(mesh[i]);
        values.push(half[i]);
    }
    PulseProfile {
        grid,
        values,
        params: *params,
        x_star: jump.clone(),
        midpoint: m,
    }
}

/// Solve for the standing pulse. `n_half` requests a node count for the half
/// interval (0 = use the built-in grading); `l` is the fast-time half-width.
pub fn solve_pulse(
    params: &ModelParams,
    jump: &JumpSolution,
    l: f64,
    n_half: usize,
) -> Result<PulseProfile> {
    params.validate()?;
    let xi_jump = jump.x_star / params.epsilon;
    if l < 2.0 * xi_jump + 10.0 {
        return Err(Error::Domain(format!(
            "half-width {l} too small: need at least {}",
            2.0 * xi_jump + 10.0
        )));
    }
    let base = build_half_mesh(l, xi_jump, 1.0);
    let refine = if n_half == 0 {
        1.0
    } else {
        n_half as f64 / base.len() as f64
    };
    if H_LAYER / refine > 1.0 / 12.0 {
        return Err(Error::InvalidParams(format!(
            "node count {n_half} cannot resolve the fast fronts on [0, {l}]"
        )));
    }
    let mesh = if n_half == 0 {
        base
    } else {
        build_half_mesh(l, xi_jump, refine)
    };

    let orbit = build_singular_orbit(params, jump)?;
    let eps = params.epsilon;
    let direct = solve_half(params, &mesh, |xi| orbit.composite(xi, eps));
    let half = match direct {
        Ok(h) => h,
        Err(first_err) => {
            continuation_solve(params, jump, l, refine, &orbit).map_err(|_| first_err)?
        }
    };
    Ok(mirror(&mesh, half, params, jump))
}

/// Fallback: walk ε down geometrically from 0.05, re-meshing each step and
/// seeding from the previous solution at matched slow position x = εξ.
fn continuation_solve(
    params: &ModelParams,
    jump: &JumpSolution,
    l_target: f64,
    refine: f64,
    orbit: &SingularOrbit,
) -> Result<Vec<PhasePoint>> {
    let target = params.epsilon;
    let mut eps_path = vec![];
    let mut e = 0.05_f64.max(target);
    while e > target * 1.0001 {
        eps_path.push(e);
        e *= 0.7;
    }
    eps_path.push(target);

    let mut prev: Option<(ModelParams, PulseProfile)> = None;
    let mut last = None;
    for &eps in &eps_path {
        let p_k = ModelParams { epsilon: eps, ..*params };
        let l_k = l_target * target / eps;
        let mesh = build_half_mesh(l_k, jump.x_star / eps, refine);
        let seed_prev = prev.as_ref();
        let half = solve_half(&p_k, &mesh, |xi| match seed_prev {
            None => orbit.composite(xi, eps),
            Some((p_old, prof)) => {
                let xi_old = (xi * eps / p_old.epsilon).min(*prof.grid.last().unwrap());
                prof.value_at(xi_old).unwrap()
            }
        })?;
        let prof = mirror(&mesh, half.clone(), &p_k, jump);
        prev = Some((p_k, prof));
        last = Some(half);
    }
    Ok(last.unwrap())
}

impl PulseProfile {
    fn component(&self, i: usize) -> Vector6<f64> {
        self.values[i].to_vector()
    }

    /// Cubic Hermite value at any ξ in `[-L, L]`; node slopes come from the
    /// vector field, so derivative queries stay consistent with the flow.
    pub fn value_at(&self, xi: f64) -> Result<PhasePoint> {
        let i = self.locate(xi)?;
        let (y0, y1) = (self.component(i), self.component(i + 1));
        let d0 = vector_field(&self.values[i], &self.params, Timescale::Fast);
        let d1 = vector_field(&self.values[i + 1], &self.params, Timescale::Fast);
        let mut out = Vector6::zeros();
        for c in 0..6 {
            out[c] = hermite(
                xi,
                self.grid[i],
                self.grid[i + 1],
                y0[c],
                y1[c],
                d0[c],
                d1[c],
            );
        }
        Ok(PhasePoint::from_vector(&out))
    }

    /// Derivative φ′(ξ) of the interpolated profile.
    pub fn derivative_at(&self, xi: f64) -> Result<Vector6<f64>> {
        let i = self.locate(xi)?;
        let (y0, y1) = (self.component(i), self.component(i + 1));
        let d0 = vector_field(&self.values[i], &self.params, Timescale::Fast);
        let d1 = vector_field(&self.values[i + 1], &self.params, Timescale::Fast);
        let mut out = Vector6::zeros();
        for c in 0..6 {
            out[c] = hermite_deriv(
                xi,
                self.grid[i],
                self.grid[i + 1],
                y0[c],
                y1[c],
                d0[c],
                d1[c],
            );
        }
        Ok(out)
    }

    fn locate(&self, xi: f64) -> Result<usize> {
        let l = *self.grid.last().unwrap();
        if xi < self.grid[0] || xi > l {
            return Err(Error::Domain(format!("xi = {xi} outside [-{l}, {l}]")));
        }
        Ok(bracket(&self.grid, xi))
    }

    /// Worst per-interval defect of the fourth-order discrete equations,
    /// scaled by the interval width.
    pub fn collocation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.len() - 1 {
            let h = self.grid[i + 1] - self.grid[i];
            let yi = self.component(i);
            let yn = self.component(i + 1);
            let fi = vector_field(&self.values[i], &self.params, Timescale::Fast);
            let fn_ = vector_field(&self.values[i + 1], &self.params, Timescale::Fast);
            let yh = 0.5 * (yi + yn) + (h / 8.0) * (fi - fn_);
            let fh = vector_field(
                &PhasePoint::from_vector(&yh),
                &self.params,
                Timescale::Fast,
            );
            for c in 0..6 {
                let defect = (yn[c] - yi[c]) / h - (fi[c] + 4.0 * fh[c] + fn_[c]) / 6.0;
                worst = worst.max(defect.abs());
            }
        }
        worst
    }

    /// Max deviation from even/odd symmetry about the midpoint.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.midpoint;
        let mut worst: f64 = 0.0;
        for k in 1..=m {
            let a = self.values[m - k];
            let b = self.values[m + k];
            for d in [
                a.u - b.u,
                a.p + b.p,
                a.v - b.v,
                a.q + b.q,
                a.w - b.w,
                a.r + b.r,
            ] {
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// Distance of the endpoints from the fixed point.
    pub fn endpoint_defect(&self) -> Result<f64> {
        let xfix = fixed_point(&self.params)?.to_vector();
        let a = (self.component(0) - xfix).amax();
        let b = (self.component(self.values.len() - 1) - xfix).amax();
        Ok(a.max(b))
    }

    /// The U = 0 crossing on the front (ξ < 0) and back (ξ > 0), refined by
    /// bisection of the interpolant.
    pub fn zero_crossings(&self) -> Result<(f64, f64)> {
        let mut found = Vec::new();
        for i in 0..self.grid.len() - 1 {
            if self.values[i].u == 0.0 {
                found.push(self.grid[i]);
            } else if self.values[i].u * self.values[i + 1].u < 0.0 {
                let mut lo = self.grid[i];
                let mut hi = self.grid[i + 1];
                let mut flo = self.values[i].u;
                let mut best = lo;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = self.value_at(mid)?.u;
                    best = mid;
                    if fm.abs() < 1e-13 || hi - lo < 1e-14 {
                        break;
                    }
                    if flo * fm < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                found.push(best);
            }
        }
        match found.as_slice() {
            [front, back] if *front < 0.0 && *back > 0.0 => Ok((*front, *back)),
            _ => Err(Error::Domain(format!(
                "expected one U = 0 crossing per front, found {}",
                found.len()
            ))),
        }
    }

    /// CSV dump, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,U,P,V,Q,W,R\r\n");
        for (xi, y) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\r\n",
                xi, y.u, y.p, y.v, y.q, y.w, y.r
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "params": self.params,
            "x_star": self.x_star.x_star,
            "root_index": self.x_star.root_index,
            "half_width": self.grid.last().unwrap(),
            "nodes": self.grid.len(),
            "midpoint": self.midpoint,
            "grid": self.grid,
            "values": self.values.iter().map(|y| vec![y.u, y.p, y.v, y.q, y.w, y.r]).collect::<Vec<_>>(),
        })
    }
}

/// Uniform evaluation entry point.
pub fn evaluate_profile(profile: &PulseProfile, xi: f64, order: EvalOrder) -> Result<Vector6<f64>> {
    match order {
        EvalOrder::Value => Ok(profile.value_at(xi)?.to_vector()),
        EvalOrder::Derivative => profile.derivative_at(xi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singular::{solve_jump_condition, SQRT2};
    use approx::assert_abs_diff_eq;

    fn stable_params(eps: f64) -> ModelParams {
        ModelParams::new(eps, 2.0, 1.0, 1.0, 5.0, 1.0, 1.0).unwrap()
    }

    fn solve_case(params: &ModelParams) -> (JumpSolution, PulseProfile) {
        let jump = solve_jump_condition(params).into_iter().next().unwrap();
        let l = default_half_width(params, &jump);
        let profile = solve_pulse(params, &jump, l, 0).unwrap();
        (jump, profile)
    }

    /// One-sided Hausdorff distance of the (U, P) projection to the ε = 0
    /// skeleton (the two heteroclinic arcs plus the slow segments at U = ±1).
    fn skeleton_distance(profile: &PulseProfile) -> f64 {
        let mut pts = Vec::new();
        for k in 0..=2000 {
            let u = -1.0 + 2.0 * k as f64 / 2000.0;
            let p = (1.0 - u * u) / SQRT2;
            pts.push((u, p));
            pts.push((u, -p));
        }
        let mut worst: f64 = 0.0;
        for y in &profile.values {
            let d = pts
                .iter()
                .map(|&(u, p)| ((y.u - u).powi(2) + (y.p - p).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        worst
    }

    #[test]
    fn newton_step_residual_is_consistent() {
        // Solve J d = -r at the singular seed on a short mesh and verify the
        // linear model: ||r(z + t d)|| should drop like (1 - t)||r|| for
        // small t if the Jacobian and the banded solve are right.
        let params = stable_params(0.01);
        let jump = solve_jump_condition(&params).into_iter().next().unwrap();
        let orbit = build_singular_orbit(&params, &jump).unwrap();
        let mesh = build_half_mesh(400.0, jump.x_star / params.epsilon, 1.0);
        let system = HalfSystem::new(&params, &mesh).unwrap();
        let mut z = Vec::new();
        for &xi in &mesh {
            z.extend_from_slice(orbit.composite(xi, 0.01).to_vector().as_slice());
        }
        let (r, norm) = system.residual(&z);
        let delta = system.newton_direction(&z, &r).unwrap();
        // Check the solve itself: J d + r should vanish.
        let jac = system.assemble(&z);
        let mut worst_lin: f64 = 0.0;
        let n = system.unknowns();
        for i in 0..n {
            let mut s = r[i];
            for j in i.saturating_sub(8)..(i + 9).min(n) {
                s += jac.get(i, j) * delta[j];
            }
            worst_lin = worst_lin.max(s.abs());
        }
        assert!(worst_lin < 1e-8 * norm.max(1.0), "linear solve defect {worst_lin:e}");
        // Check the Jacobian against the nonlinear residual: a small step
        // along the Newton direction must shrink the residual linearly.
        let t = 1e-3;
        let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
        let (_, nt) = system.residual(&trial);
        assert!(
            nt < (1.0 - 0.5 * t) * norm,
            "no descent: {norm:e} -> {nt:e} at t = {t}"
        );
    }

    #[test]
    fn stable_case_profile_invariants() {
        let params = stable_params(0.01);
        let (jump, profile) = solve_case(&params);
        assert!(profile.collocation_residual() < 1e-10);
        assert!(profile.symmetry_defect() < 1e-8);
        assert!(profile.endpoint_defect().unwrap() < 1e-6);

        let max_u = profile.values.iter().map(|y| y.u).fold(f64::MIN, f64::max);
        assert!(max_u > 0.9 && max_u < 1.1, "max U = {max_u}");

        // Plateau value of V at the midpoint vs the ε = 0 arc.
        let c1 = -(-jump.x_star).exp();
        let v_mid = profile.values[profile.midpoint].v;
        assert!(
            (v_mid - (2.0 * c1 + 1.0)).abs() < 10.0 * params.epsilon,
            "V(0) = {v_mid}, plateau = {}",
            2.0 * c1 + 1.0
        );
    }

    #[test]
    fn profile_approaches_singular_skeleton_linearly_in_epsilon() {
        let d1 = skeleton_distance(&solve_case(&stable_params(0.02)).1);
        let d2 = skeleton_distance(&solve_case(&stable_params(0.01)).1);
        let ratio = d1 / d2;
        assert!(
            (1.4..=2.6).contains(&ratio),
            "distance ratio {ratio} (d(0.02) = {d1}, d(0.01) = {d2})"
        );
    }

    #[test]
    fn evaluation_matches_nodes_and_flow() {
        let params = stable_params(0.01);
        let (_, profile) = solve_case(&params);
        // Node queries return stored values exactly.
        for &i in &[0, 57, profile.midpoint, profile.values.len() - 1] {
            let y = profile.value_at(profile.grid[i]).unwrap();
            assert_eq!(y.to_vector(), profile.values[i].to_vector());
        }
        // Derivative queries agree with the vector field at off-node points.
        let l = *profile.grid.last().unwrap();
        let mut state = 0x9e3779b97f4a7c15_u64;
        for _ in 0..50 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let xi = ((state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * l;
            let d = evaluate_profile(&profile, xi, EvalOrder::Derivative).unwrap();
            let y = profile.value_at(xi).unwrap();
            let f = vector_field(&y, &params, Timescale::Fast);
            assert!((d - f).amax() < 1e-6, "defect {} at xi = {xi}", (d - f).amax());
        }
        assert!(matches!(
            evaluate_profile(&profile, l + 1.0, EvalOrder::Value),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn back_midpoint_slope_matches_heteroclinic() {
        let params = stable_params(0.01);
        let (_, profile) = solve_case(&params);
        let (xi_front, xi_back) = profile.zero_crossings().unwrap();
        assert!(profile.value_at(xi_front).unwrap().u.abs() < 1e-10);
        assert!(profile.value_at(xi_back).unwrap().u.abs() < 1e-10);
        let p_back = profile.value_at(xi_back).unwrap().p;
        assert_abs_diff_eq!(p_back, -1.0 / SQRT2, epsilon = 0.05);
        let p_front = profile.value_at(xi_front).unwrap().p;
        assert_abs_diff_eq!(p_front, 1.0 / SQRT2, epsilon = 0.05);
    }

    #[test]
    fn small_parameter_changes_move_the_profile_little() {
        let params = stable_params(0.01);
        let (_, base) = solve_case(&params);
        let nudged = ModelParams {
            alpha: params.alpha + 1e-4,
            ..params
        };
        let (_, moved) = solve_case(&nudged);
        // Meshes coincide (same x* to leading digits would shift nodes, so
        // compare via interpolation at the base nodes).
        let mut worst: f64 = 0.0;
        let l_moved = *moved.grid.last().unwrap();
        for (xi, y) in base.grid.iter().zip(&base.values) {
            if xi.abs() > l_moved {
                continue;
            }
            let z = moved.value_at(*xi).unwrap();
            worst = worst.max((y.to_vector() - z.to_vector()).amax());
        }
        assert!(worst < 100.0 * 1e-4, "sup shift {worst}");
    }

    #[test]
    fn both_roots_of_the_two_root_case_yield_pulses() {
        let params = ModelParams::new(0.01, -5.0, 5.0, 0.5, 5.0, 1.0, 1.0).unwrap();
        let roots = solve_jump_condition(&params);
        assert_eq!(roots.len(), 2);
        for jump in &roots {
            let l = default_half_width(&params, jump);
            let profile = solve_pulse(&params, jump, l, 0).unwrap();
            assert!(profile.collocation_residual() < 1e-10);
            assert!(profile.endpoint_defect().unwrap() < 1e-6);
        }
    }

    #[test]
    fn rejects_short_domains_and_coarse_meshes() {
        let params = stable_params(0.01);
        let jump = solve_jump_condition(&params).into_iter().next().unwrap();
        assert!(matches!(
            solve_pulse(&params, &jump, 50.0, 0),
            Err(Error::Domain(_))
        ));
        let l = default_half_width(&params, &jump);
        assert!(matches!(
            solve_pulse(&params, &jump, l, 40),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn csv_and_json_round_out() {
        let params = stable_params(0.01);
        let (_, profile) = solve_case(&params);
        let csv = profile.to_csv();
        assert!(csv.starts_with("xi,U,P,V,Q,W,R\r\n"));
        assert_eq!(csv.lines().count(), profile.grid.len() + 1);
        let j = profile.to_json();
        assert_eq!(j["nodes"], json!(profile.grid.len()));
        assert_eq!(j["values"].as_array().unwrap().len(), profile.grid.len());
    }
}
