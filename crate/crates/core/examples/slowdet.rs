use pulse_stability::maslov::slow_manifold_det;
use pulse_stability::model::ModelParams;
use pulse_stability::singular::solve_jump_condition;

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let params = ModelParams { alpha: args[0], beta: args[1], gamma: args[2], dd: args[3], epsilon: 0.01, tau: 1.0, theta: 1.0 };
    let roots = solve_jump_condition(&params);
    let jump = &roots[0];
    let n = 400;
    for k in 0..=n {
        let x = -jump.x_star + 2.0 * jump.x_star * k as f64 / n as f64;
        println!("{x} {:e}", slow_manifold_det(&params, jump, x));
    }
}
