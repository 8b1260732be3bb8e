//! Command-line front end: pulse existence, singular orbits, full pulse
//! profiles, Maslov indices, eigenvalue spectra, time evolution, parameter
//! scans, and the cross-validation report.
//!
//! Exit codes: 0 on success, 2 on bad arguments, 1 on computational failure
//! (with a machine-readable JSON error object on standard error).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pulse_stability::maslov::{maslov_index, stability_criterion};
use pulse_stability::model::ModelParams;
use pulse_stability::pde::{deviation, evolve, max_dt, SimState};
use pulse_stability::pulse::{default_half_width, solve_pulse};
use pulse_stability::singular::{build_singular_orbit, solve_jump_condition, JumpSolution};
use pulse_stability::spectrum::point_spectrum;

use pulse_stability_cli::{
    criterion_line, cross_validate, parse_config, run_scan, scan_csv, scan_svg, verdict_name,
    AxisRange, ReportSettings, ScanConfig,
};

#[derive(Parser)]
#[command(
    name = "pulse-stability",
    version,
    about = "Standing-pulse construction and stability analysis for a three-component \
             activator-inhibitor reaction-diffusion system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the jump condition and print roots with their stability verdicts.
    Exist(CommonArgs),
    /// Assemble the singular (fast-slow) orbit and write CSV + JSON.
    Orbit(CommonArgs),
    /// Solve the full pulse boundary value problem and write CSV + JSON.
    Pulse(CommonArgs),
    /// Compute the Maslov index of the pulse and write the report JSON.
    Maslov(CommonArgs),
    /// Compute the leading eigenvalues of the linearization and write
    /// the report JSON plus eigenfunction CSV.
    Spectrum(CommonArgs),
    /// Evolve a perturbed pulse in time and write the deviation series.
    Evolve(CommonArgs),
    /// Scan an (alpha, beta) grid; write ScanResult CSV and an SVG heat map
    /// of the stability boundary.
    Scan(ScanArgs),
    /// Full cross-validation (Maslov vs spectrum vs PDE) for one parameter
    /// set, with a pass/fail summary.
    Report(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Fast-inhibitor coupling strength.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Slow-inhibitor coupling strength.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Constant forcing.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Inhibitor diffusion-length ratio (must exceed 1).
    #[arg(long, allow_hyphen_values = true)]
    dd: Option<f64>,
    /// Interface-width parameter.
    #[arg(long)]
    epsilon: Option<f64>,
    /// First inhibitor time constant.
    #[arg(long)]
    tau: Option<f64>,
    /// Second inhibitor time constant.
    #[arg(long)]
    theta: Option<f64>,
    /// Which jump-condition root to use (1-based, ascending).
    #[arg(long = "root-index")]
    root_index: Option<usize>,
    /// Fast-time half-width of the pulse domain.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Node count for the half pulse mesh (0 = built-in grading).
    #[arg(long = "N")]
    n: Option<usize>,
    /// Slow-grid budget for the spectrum / grid points for evolution.
    #[arg(long = "Nx")]
    nx: Option<usize>,
    /// Slow-space half-domain for the spectrum / evolution.
    #[arg(long = "Lx")]
    lx: Option<f64>,
    /// Random seed for perturbations.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Upgrade to the full Maslov pipeline where optional.
    #[arg(long)]
    full: bool,
    /// Config file with key=value lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Final time for evolution.
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Time step for evolution (capped by the explicit-reaction bound).
    #[arg(long)]
    dt: Option<f64>,
    /// Perturbation amplitude for evolution.
    #[arg(long)]
    amplitude: Option<f64>,
}

#[derive(Args, Clone)]
struct ScanArgs {
    /// Alpha range, `start:end:count` or a single value.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Beta range, `start:end:count` or a single value.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dd: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the Maslov pipeline in every cell with a root.
    #[arg(long)]
    full: bool,
    /// Config file with key=value lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum RunError {
    Usage(String),
    Compute(pulse_stability::Error),
    Io(std::io::Error),
}

impl From<pulse_stability::Error> for RunError {
    fn from(e: pulse_stability::Error) -> Self {
        RunError::Compute(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Compute(e)) => {
            let kind = format!("{e:?}");
            let kind = kind
                .split(|c| c == '(' || c == ' ' || c == '{')
                .next()
                .unwrap_or("Unknown");
            eprintln!("{}", json!({ "error": e.to_string(), "kind": kind }));
            ExitCode::from(1)
        }
        Err(RunError::Io(e)) => {
            eprintln!("{}", json!({ "error": e.to_string(), "kind": "Io" }));
            ExitCode::from(1)
        }
    }
}

/// Flag values merged over config-file values merged over defaults.
struct Resolved {
    params: ModelParams,
    root_index: usize,
    l: Option<f64>,
    n: usize,
    nx: Option<usize>,
    lx: Option<f64>,
    seed: u64,
    out: PathBuf,
    t_final: f64,
    dt: f64,
    amplitude: f64,
}

fn load_config(path: &Option<PathBuf>) -> Result<HashMap<String, String>, RunError> {
    match path {
        None => Ok(HashMap::new()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            parse_config(&text).map_err(RunError::Usage)
        }
    }
}

fn config_get<T: std::str::FromStr>(
    config: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, RunError> {
    match config.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| RunError::Usage(format!("config key {key}: bad value {raw:?}"))),
    }
}

impl CommonArgs {
    fn resolve(&self) -> Result<Resolved, RunError> {
        let config = load_config(&self.config)?;
        let need = |flag: Option<f64>, key: &str| -> Result<f64, RunError> {
            match flag.or(config_get(&config, key)?) {
                Some(v) => Ok(v),
                None => Err(RunError::Usage(format!("--{key} is required"))),
            }
        };
        let params = ModelParams::new(
            self.epsilon
                .or(config_get(&config, "epsilon")?)
                .unwrap_or(0.01),
            need(self.alpha, "alpha")?,
            need(self.beta, "beta")?,
            need(self.gamma, "gamma")?,
            need(self.dd, "dd")?,
            self.tau.or(config_get(&config, "tau")?).unwrap_or(1.0),
            self.theta.or(config_get(&config, "theta")?).unwrap_or(1.0),
        )?;
        Ok(Resolved {
            params,
            root_index: self
                .root_index
                .or(config_get(&config, "root-index")?)
                .unwrap_or(1),
            l: self.l.or(config_get(&config, "L")?),
            n: self.n.or(config_get(&config, "N")?).unwrap_or(0),
            nx: self.nx.or(config_get(&config, "Nx")?),
            lx: self.lx.or(config_get(&config, "Lx")?),
            seed: self.seed.or(config_get(&config, "seed")?).unwrap_or(42),
            out: self
                .out
                .clone()
                .or(config
                    .get("out")
                    .map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(".")),
            t_final: self
                .t_final
                .or(config_get(&config, "t-final")?)
                .unwrap_or(200.0),
            dt: self.dt.or(config_get(&config, "dt")?).unwrap_or(0.05),
            amplitude: self
                .amplitude
                .or(config_get(&config, "amplitude")?)
                .unwrap_or(1e-3),
        })
    }
}

impl Resolved {
    fn jump(&self) -> Result<JumpSolution, RunError> {
        let roots = solve_jump_condition(&self.params);
        if roots.is_empty() {
            return Err(RunError::Compute(pulse_stability::Error::Domain(
                "no pulse: the jump condition has no positive roots".to_string(),
            )));
        }
        roots
            .iter()
            .find(|r| r.root_index == self.root_index)
            .copied()
            .ok_or_else(|| {
                RunError::Usage(format!(
                    "--root-index {} out of range: {} root(s) exist",
                    self.root_index,
                    roots.len()
                ))
            })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), RunError> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Exist(args) => cmd_exist(&args.resolve()?),
        Command::Orbit(args) => cmd_orbit(&args.resolve()?),
        Command::Pulse(args) => cmd_pulse(&args.resolve()?),
        Command::Maslov(args) => cmd_maslov(&args.resolve()?),
        Command::Spectrum(args) => cmd_spectrum(&args.resolve()?),
        Command::Evolve(args) => cmd_evolve(&args.resolve()?),
        Command::Scan(args) => cmd_scan(&args),
        Command::Report(args) => cmd_report(&args.resolve()?),
    }
}

fn cmd_exist(r: &Resolved) -> Result<(), RunError> {
    let p = &r.params;
    println!(
        "parameters: alpha={} beta={} gamma={} dd={} epsilon={} tau={} theta={}",
        p.alpha, p.beta, p.gamma, p.dd, p.epsilon, p.tau, p.theta
    );
    let roots = solve_jump_condition(p);
    if roots.is_empty() {
        println!("no pulse: the jump condition has no positive roots");
        return Ok(());
    }
    for jump in &roots {
        println!("{}", criterion_line(p, jump));
    }
    Ok(())
}

fn cmd_orbit(r: &Resolved) -> Result<(), RunError> {
    let jump = r.jump()?;
    let orbit = build_singular_orbit(&r.params, &jump)?;
    let l = r.l.unwrap_or_else(|| default_half_width(&r.params, &jump));
    let n = if r.n == 0 { 2001 } else { r.n };
    let mut csv = String::from("xi,u,p,v,q,w,r\n");
    for k in 0..n {
        let xi = -l + 2.0 * l * k as f64 / (n - 1) as f64;
        let y = orbit.composite(xi, r.params.epsilon);
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            xi, y.u, y.p, y.v, y.q, y.w, y.r
        ));
    }
    r.write("orbit.csv", &csv)?;
    r.write("orbit.json", &format!("{:#}\n", orbit.to_json()))?;
    Ok(())
}

fn cmd_pulse(r: &Resolved) -> Result<(), RunError> {
    let jump = r.jump()?;
    let l = r.l.unwrap_or_else(|| default_half_width(&r.params, &jump));
    let profile = solve_pulse(&r.params, &jump, l, r.n)?;
    r.write("pulse.csv", &profile.to_csv())?;
    r.write("pulse.json", &format!("{:#}\n", profile.to_json()))?;
    println!(
        "pulse solved: x* = {:e}, {} mesh nodes, collocation residual {:.3e}",
        jump.x_star,
        profile.grid.len(),
        profile.collocation_residual()
    );
    Ok(())
}

fn cmd_maslov(r: &Resolved) -> Result<(), RunError> {
    let jump = r.jump()?;
    let l = r.l.unwrap_or_else(|| default_half_width(&r.params, &jump));
    let profile = solve_pulse(&r.params, &jump, l, r.n)?;
    let report = maslov_index(&profile)?;
    r.write("maslov.json", &format!("{:#}\n", report.to_json()))?;
    let (verdict, margin) = stability_criterion(&r.params, &jump);
    println!(
        "Maslov index {} ({} interior crossing(s), endpoint n+ = {}); \
         criterion margin {:e} ({}); singular-limit agreement: {}",
        report.total_index,
        report.interior_points.len(),
        report.endpoint_positive_count,
        margin,
        verdict_name(verdict),
        report.agreement
    );
    Ok(())
}

fn cmd_spectrum(r: &Resolved) -> Result<(), RunError> {
    let jump = r.jump()?;
    let l = r.l.unwrap_or_else(|| default_half_width(&r.params, &jump));
    let profile = solve_pulse(&r.params, &jump, l, r.n)?;
    let nx = r.nx.unwrap_or(800);
    let lx = r.lx.unwrap_or(2.0 * jump.x_star + 20.0);
    let report = point_spectrum(&profile, nx, lx, 6)?;
    r.write("spectrum.json", &format!("{:#}\n", report.to_json()))?;
    let indices: Vec<usize> = (0..report.leading.len().min(4)).collect();
    r.write("eigenfunctions.csv", &report.eigenfunctions_csv(&indices))?;
    println!(
        "unstable eigenvalues: {}; translation eigenvalue {:e}; essential spectrum edge {:e}",
        report.unstable_count, report.translation_eigenvalue, report.essential_edge
    );
    Ok(())
}

fn cmd_evolve(r: &Resolved) -> Result<(), RunError> {
    let jump = r.jump()?;
    let l = r.l.unwrap_or_else(|| default_half_width(&r.params, &jump));
    let profile = solve_pulse(&r.params, &jump, l, r.n)?;
    let lx = r.lx.unwrap_or(45.0);
    let nx = r.nx.unwrap_or(1000);
    let mut state = SimState::from_profile(&profile, lx, nx, 0.0)?;
    state.add_uniform_noise(r.amplitude, r.seed);
    let dt = r.dt.min(0.9 * max_dt(&state));
    let traj = evolve(&state, r.t_final, dt)?;
    let mut csv = String::from("t,deviation,sup_u,mass_u\n");
    for s in &traj {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            s.t,
            deviation(s, &profile)?,
            s.sup_u(),
            s.mass_u()
        ));
    }
    r.write("deviation.csv", &csv)?;
    r.write("final_state.csv", &traj.last().unwrap().to_csv())?;
    println!(
        "evolved to t = {} (dt = {:e}, seed {}, amplitude {:e}): deviation {:e} -> {:e}",
        r.t_final,
        dt,
        r.seed,
        r.amplitude,
        deviation(&traj[0], &profile)?,
        deviation(traj.last().unwrap(), &profile)?
    );
    Ok(())
}

fn cmd_scan(args: &ScanArgs) -> Result<(), RunError> {
    let config = load_config(&args.config)?;
    let range = |flag: &Option<String>, key: &str| -> Result<AxisRange, RunError> {
        let raw = flag
            .clone()
            .or_else(|| config.get(key).cloned())
            .ok_or_else(|| RunError::Usage(format!("--{key} is required")))?;
        AxisRange::parse(&raw).map_err(RunError::Usage)
    };
    let need = |flag: Option<f64>, key: &str| -> Result<f64, RunError> {
        match flag.or(config_get(&config, key)?) {
            Some(v) => Ok(v),
            None => Err(RunError::Usage(format!("--{key} is required"))),
        }
    };
    let cfg = ScanConfig {
        alpha: range(&args.alpha, "alpha")?,
        beta: range(&args.beta, "beta")?,
        gamma: need(args.gamma, "gamma")?,
        dd: need(args.dd, "dd")?,
        epsilon: args
            .epsilon
            .or(config_get(&config, "epsilon")?)
            .unwrap_or(0.01),
        tau: args.tau.or(config_get(&config, "tau")?).unwrap_or(1.0),
        theta: args.theta.or(config_get(&config, "theta")?).unwrap_or(1.0),
        full: args.full,
    };
    let out = args
        .out
        .clone()
        .or(config.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let result = run_scan(&cfg);
    write_artifact(&out, "scan.csv", &scan_csv(&result))?;
    write_artifact(&out, "scan.svg", &scan_svg(&result))?;

    let with_roots = result.cells.iter().filter(|c| !c.roots.is_empty()).count();
    let stable = result
        .cells
        .iter()
        .flat_map(|c| &c.roots)
        .filter(|r| r.margin < 0.0)
        .count();
    let unstable = result
        .cells
        .iter()
        .flat_map(|c| &c.roots)
        .filter(|r| r.margin > 0.0)
        .count();
    println!(
        "scanned {} cells: {} with a pulse ({} stable root(s), {} unstable root(s)), {} no-pulse",
        result.cells.len(),
        with_roots,
        stable,
        unstable,
        result.cells.len() - with_roots
    );
    Ok(())
}

fn write_artifact(out: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(r: &Resolved) -> Result<(), RunError> {
    let jump = r.jump()?;
    let mut settings = ReportSettings {
        seed: r.seed,
        t_final: r.t_final,
        dt: r.dt,
        amplitude: r.amplitude,
        ..ReportSettings::default()
    };
    if let Some(nx) = r.nx {
        settings.nx = nx;
        settings.sim_nx = nx;
    }
    if let Some(lx) = r.lx {
        settings.sim_lx = lx;
    }
    let validation = cross_validate(&r.params, &jump, &settings)?;
    r.write("report.json", &format!("{:#}\n", validation.to_json()))?;
    print!("{}", validation.text_summary());
    Ok(())
}
