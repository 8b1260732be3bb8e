use pulse_stability::maslov::{evolve_bundle, reference_plane, Direction};
use pulse_stability::model::ModelParams;
use pulse_stability::pulse::{default_half_width, solve_pulse};
use pulse_stability::singular::solve_jump_condition;
use pulse_stability::symplectic::det_frames;

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let params = ModelParams { alpha: args[0], beta: args[1], gamma: args[2], dd: args[3], epsilon: 0.01, tau: 1.0, theta: 1.0 };
    let roots = solve_jump_condition(&params);
    let jump = &roots[0];
    let l = default_half_width(&params, jump);
    let profile = solve_pulse(&params, jump, l, 0).unwrap();
    let forward = evolve_bundle(&profile, Direction::ForwardFromLeft).unwrap();
    let backward = evolve_bundle(&profile, Direction::BackwardFromRight).unwrap();
    let reference = reference_plane(&profile, &backward).unwrap();
    for (i, &xi) in forward.nodes.iter().enumerate() {
        let d = det_frames(&forward.frames[i].columns, &reference.frame.columns);
        println!("{xi} {d:e}");
    }
    eprintln!("xi_infinity = {}", reference.xi_infinity);
    eprintln!("gap_to_limit = {:e}", reference.gap_to_limit);
    let mut worst = (0.0_f64, 0.0_f64);
    for (i, &xi) in forward.nodes.iter().enumerate() {
        let d = profile.derivative_at(xi).unwrap();
        let resid = forward.containment_residual(i, &d);
        if resid > worst.0 {
            worst = (resid, xi);
        }
    }
    eprintln!("max containment residual {:e} at xi = {}", worst.0, worst.1);
}
