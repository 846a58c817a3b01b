//! Command-line driver for the droplet numerical laboratory.
//!
//! One binary, one subcommand per module. Every run resolves a complete
//! parameter set (config file < CLI flags), executes the mapped module
//! operations, and writes JSON-lines records plus CSV artifacts into the
//! output directory. Artifacts are deterministic for a fixed seed/config:
//! records carry a fixed clock and a run id derived from (seed, command,
//! params), never wall time.
//!
//! Exit codes: 0 success, 1 validation/configuration error, 2 numerical
//! failure (singular Δ, non-convergence, collision).

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num::One;

use droplet_core::fock::{
    build_i1, build_i2, calibrate_i2, diagonalize_and_match, match_i1, q2_eigenvalue, FockBasis,
    Partition,
};
use droplet_core::hydro::{droplet_density, droplet_report, laguerre_droplet, Grid};
use droplet_core::jack::{jack_basis, model_alpha, verify_eigenvector};
use droplet_core::langevin::{
    lyapunov_oracle_em, matrix_simulate, mode_simulate, EuclideanLattice, MatrixSimConfig,
    ModeSimConfig,
};
use droplet_core::matrix::{
    b_n, build_annihilation, classical_invariant, constraint_residual, embed_state, evolve_exact,
    gauge_residual, max_abs, particle_positions, solve_multipliers,
};
use droplet_core::noise::NoiseStream;
use droplet_core::params::PhysParams;
use droplet_core::report::{fmt_f64, write_csv, write_jsonl, Clock, Observable, RunRecord};
use droplet_core::{calogero, Config, RVec, C64};

/// Error type carrying the process exit code.
enum CliError {
    /// Validation or configuration problem → exit 1.
    Validation(String),
    /// Numerical failure → exit 2.
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

fn validation(e: impl ToString) -> CliError {
    CliError::Validation(e.to_string())
}

fn numerical(e: impl ToString) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "droplet",
    about = "Numerical laboratory for the trapped Calogero model and its matrix-model reduction"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for JSON-lines and CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-N matrix model: residuals, invariants, multiplier solve.
    Matrix(MatrixArgs),
    /// Direct N-body integration from random admissible initial data.
    Calogero(CalogeroArgs),
    /// Droplet density report and radial profile.
    Hydro(HydroArgs),
    /// Truncated Fock-space spectra.
    Fock(FockArgs),
    /// Jack polynomial eigenvector checks.
    Jack(JackArgs),
    /// Stochastic-quantization simulators.
    Langevin(LangevinArgs),
    /// Run the full acceptance suite.
    VerifyAll(VerifyArgs),
}

#[derive(Args)]
struct MatrixArgs {
    /// Matrix dimension N.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Evolution time for the invariant check, in periods.
    #[arg(long, default_value_t = 1.0)]
    periods: f64,
}

#[derive(Args)]
struct CalogeroArgs {
    /// Particle count.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Final time in periods.
    #[arg(long, default_value_t = 1.0)]
    periods: f64,
    /// Number of sampled trajectory rows.
    #[arg(long, default_value_t = 50)]
    samples: usize,
}

#[derive(Args)]
struct HydroArgs {
    /// Droplet particle number N.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Grid points per axis.
    #[arg(long, default_value_t = 256)]
    grid: usize,
}

#[derive(Args)]
struct FockArgs {
    /// Operator to diagonalize.
    #[arg(long, value_parser = ["i1", "i2"], default_value = "i2")]
    op: String,
    /// Partition level (total weight).
    #[arg(long, default_value_t = 4)]
    level: usize,
    /// Background particle number N.
    #[arg(long, default_value_t = 10)]
    n: usize,
}

#[derive(Args)]
struct JackArgs {
    /// Polynomial degree.
    #[arg(long, default_value_t = 4)]
    degree: usize,
    /// Background particle number N for the I₂ check.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Use α = 1 (Schur point) instead of the model value ℓħ²/ℓθ².
    #[arg(long)]
    alpha_one: bool,
}

#[derive(Args)]
struct LangevinArgs {
    /// `modes` (lattice SDE ensemble) or `matrix` (constrained walk).
    #[arg(long, value_parser = ["modes", "matrix"], default_value = "modes")]
    kind: String,
    /// Lattice sites M (modes) .
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// Highest mode n (modes) or matrix dimension N (matrix).
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Auxiliary-time step.
    #[arg(long, default_value_t = 0.005)]
    dtau: f64,
    /// Trajectories (modes) or steps (matrix).
    #[arg(long, default_value_t = 200)]
    count: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Reduced sizes for a fast smoke run.
    #[arg(long)]
    quick: bool,
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful outcomes; everything else is a
            // validation failure (exit 1), including unknown flags.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(k) = cli.workers {
        if k == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        // Ignore the error if a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(validation)?,
        None => Config::new(),
    };
    if let Some(seed) = cli.seed {
        config.set("seed", seed);
    }
    let params = config.phys_params().map_err(validation)?;
    let seed = config.seed().map_err(validation)?;
    let clock = Clock::Fixed(0);

    match &cli.command {
        Command::Matrix(args) => run_matrix(args, &cli.out, params, seed, clock),
        Command::Calogero(args) => run_calogero(args, &cli.out, params, seed, clock),
        Command::Hydro(args) => run_hydro(args, &cli.out, params, seed, clock),
        Command::Fock(args) => run_fock(args, &cli.out, params, seed, clock),
        Command::Jack(args) => run_jack(args, &cli.out, params, seed, clock),
        Command::Langevin(args) => run_langevin(args, &cli.out, params, seed, clock),
        Command::VerifyAll(args) => run_verify(args, &cli.out, params, seed, clock),
    }
}

/// Distinct centered positions and centered momenta from the seed.
fn random_initial(seed: u64, n: usize) -> (RVec, RVec) {
    let mut stream = NoiseStream::new(seed, 0);
    loop {
        let mut xs: Vec<f64> = (0..n).map(|_| 1.5 * stream.normal()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let com: f64 = xs.iter().sum::<f64>() / n as f64;
        for x in &mut xs {
            *x -= com;
        }
        let min_gap = xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if n == 1 || min_gap > 0.3 {
            let mut ps: Vec<f64> = (0..n).map(|_| 0.5 * stream.normal()).collect();
            let pcom: f64 = ps.iter().sum::<f64>() / n as f64;
            for q in &mut ps {
                *q -= pcom;
            }
            return (RVec::from_vec(xs), RVec::from_vec(ps));
        }
    }
}

fn run_matrix(
    args: &MatrixArgs,
    out: &Path,
    params: PhysParams,
    seed: u64,
    clock: Clock,
) -> Result<(), CliError> {
    let (x, p) = random_initial(seed, args.n);
    let state = embed_state(&x, &p, &params).map_err(numerical)?;
    let t = args.periods * 2.0 * std::f64::consts::PI / params.omega;
    let evolved = evolve_exact(&state, t);
    let mut obs = vec![
        Observable::new("constraint_residual", max_abs(&constraint_residual(&state))),
        Observable::new("gauge_residual", max_abs(&gauge_residual(&state))),
    ];
    for n in 1..=3.min(args.n) {
        let i0 = classical_invariant(&state, n).map_err(numerical)?;
        let i1 = classical_invariant(&evolved, n).map_err(numerical)?;
        obs.push(Observable::new(format!("i{n}"), i0));
        obs.push(Observable::new(format!("i{n}_drift"), (i1 - i0).abs()));
        let b = b_n(&state, n).map_err(numerical)?;
        obs.push(Observable::new(format!("b{n}_abs"), b.norm()));
    }
    let at_a = build_annihilation(args.n, &params).map_err(numerical)?;
    let raw = &at_a.z * C64::new(0.0, -params.omega);
    let sol = solve_multipliers(&at_a, &raw).map_err(numerical)?;
    obs.push(Observable::new("multiplier_residual", sol.residual));

    let rows: Vec<Vec<String>> = particle_positions(&state)
        .iter()
        .zip(x.iter())
        .map(|(eig, xi)| vec![fmt_f64(*eig), fmt_f64(*xi)])
        .collect();
    write_csv(&out.join("matrix_positions.csv"), &["eigenvalue", "position"], &rows)
        .map_err(validation)?;
    let record = RunRecord::new(seed, params, format!("matrix n={}", args.n), obs, clock);
    write_jsonl(&out.join("matrix.jsonl"), &[record]).map_err(validation)?;
    Ok(())
}

fn run_calogero(
    args: &CalogeroArgs,
    out: &Path,
    params: PhysParams,
    seed: u64,
    clock: Clock,
) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }
    let (x, p) = random_initial(seed, args.n);
    let state = calogero::ParticleState::new(x, p, params).map_err(validation)?;
    let t_final = args.periods * 2.0 * std::f64::consts::PI / params.omega;
    let times: Vec<f64> = (1..=args.samples)
        .map(|j| t_final * j as f64 / args.samples as f64)
        .collect();
    let h0 = calogero::hamiltonian(&state).map_err(numerical)?;
    let traj = calogero::integrate(&state, t_final, &times, 1e-11).map_err(numerical)?;
    let mut rows = Vec::new();
    let mut h_drift: f64 = 0.0;
    for point in &traj {
        let h = calogero::hamiltonian(&point.state).map_err(numerical)?;
        h_drift = h_drift.max((h - h0).abs());
        let mut row = vec![fmt_f64(point.t)];
        row.extend(point.state.x.iter().map(|v| fmt_f64(*v)));
        row.extend(point.state.p.iter().map(|v| fmt_f64(*v)));
        rows.push(row);
    }
    let mut header = vec!["t".to_string()];
    header.extend((0..args.n).map(|i| format!("x{i}")));
    header.extend((0..args.n).map(|i| format!("p{i}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_csv(&out.join("calogero_trajectory.csv"), &header_refs, &rows).map_err(validation)?;
    let obs = vec![
        Observable::new("energy", h0),
        Observable::new("energy_drift", h_drift),
    ];
    let record = RunRecord::new(seed, params, format!("calogero n={}", args.n), obs, clock);
    write_jsonl(&out.join("calogero.jsonl"), &[record]).map_err(validation)?;
    Ok(())
}

fn run_hydro(
    args: &HydroArgs,
    out: &Path,
    params: PhysParams,
    seed: u64,
    clock: Clock,
) -> Result<(), CliError> {
    let grid = Grid::for_droplet(args.n, args.grid, &params).map_err(validation)?;
    let field = droplet_density(args.n, &grid, &params).map_err(numerical)?;
    let report = droplet_report(&field, args.n, &params);
    // Radial profile along the +x axis against the closed-form oracle.
    let mut rows = Vec::new();
    for ix in args.grid / 2..args.grid {
        let r = grid.coord(ix);
        rows.push(vec![
            fmt_f64(r),
            fmt_f64(field.at(ix, args.grid / 2)),
            fmt_f64(laguerre_droplet(args.n, r, &params)),
        ]);
    }
    write_csv(
        &out.join("hydro_radial.csv"),
        &["r", "density", "oracle"],
        &rows,
    )
    .map_err(validation)?;
    let obs = vec![
        Observable::new("plateau", report.plateau),
        Observable::new("edge_radius", report.edge_radius),
        Observable::new("trace_norm", report.trace_norm),
    ];
    let record = RunRecord::new(
        seed,
        params,
        format!("hydro n={} grid={}", args.n, args.grid),
        obs,
        clock,
    );
    write_jsonl(&out.join("hydro.jsonl"), &[record]).map_err(validation)?;
    Ok(())
}

fn run_fock(
    args: &FockArgs,
    out: &Path,
    params: PhysParams,
    seed: u64,
    clock: Clock,
) -> Result<(), CliError> {
    let lam_max = args.level.max(4);
    let basis = FockBasis::new(lam_max);
    let report = match args.op.as_str() {
        "i1" => {
            let op = build_i1(&basis, args.n, &params);
            match_i1(&op, &basis, args.level, args.n, &params).map_err(numerical)?
        }
        _ => {
            let op = build_i2(&basis, args.n, &params);
            let cal = calibrate_i2(&op, &basis, args.n, &params, 4).map_err(numerical)?;
            diagonalize_and_match(&op, &basis, args.level, args.n, &params, &cal)
                .map_err(numerical)?
        }
    };
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| {
            vec![
                e.partition.label(),
                fmt_f64(e.eigenvalue),
                fmt_f64(e.predicted),
                fmt_f64(e.residual),
                fmt_f64(q2_eigenvalue(&e.partition.conjugate(), args.n, &params)),
            ]
        })
        .collect();
    write_csv(
        &out.join("fock_spectrum.csv"),
        &["partition", "eigenvalue", "predicted", "residual", "q2_dual"],
        &rows,
    )
    .map_err(validation)?;
    let obs = vec![
        Observable::new("max_residual", report.max_residual),
        Observable::new("degenerate_pairs", report.degenerate_pairs.len() as f64),
        Observable::new(
            "q2_spot_level2",
            q2_eigenvalue(
                &Partition::new(vec![2]).map_err(validation)?,
                args.n,
                &params,
            ),
        ),
    ];
    let record = RunRecord::new(
        seed,
        params,
        format!("fock {} level={} n={}", args.op, args.level, args.n),
        obs,
        clock,
    );
    write_jsonl(&out.join("fock.jsonl"), &[record]).map_err(validation)?;
    Ok(())
}

fn run_jack(
    args: &JackArgs,
    out: &Path,
    params: PhysParams,
    seed: u64,
    clock: Clock,
) -> Result<(), CliError> {
    let alpha = if args.alpha_one {
        num::rational::BigRational::one()
    } else {
        model_alpha(&params).map_err(validation)?
    };
    let basis = FockBasis::new(args.degree);
    let polys = jack_basis(args.degree, &alpha).map_err(numerical)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for jack in &polys {
        let check = verify_eigenvector(jack, &basis, args.n, &params).map_err(numerical)?;
        worst = worst.max(check.residual);
        rows.push(vec![
            jack.label.label(),
            fmt_f64(check.rayleigh),
            fmt_f64(check.predicted),
            fmt_f64(check.residual),
        ]);
    }
    write_csv(
        &out.join("jack_eigen.csv"),
        &["partition", "rayleigh", "predicted", "residual"],
        &rows,
    )
    .map_err(validation)?;
    let obs = vec![
        Observable::new("count", polys.len() as f64),
        Observable::new("max_residual", worst),
    ];
    let record = RunRecord::new(
        seed,
        params,
        format!("jack degree={} n={}", args.degree, args.n),
        obs,
        clock,
    );
    write_jsonl(&out.join("jack.jsonl"), &[record]).map_err(validation)?;
    Ok(())
}

fn run_langevin(
    args: &LangevinArgs,
    out: &Path,
    params: PhysParams,
    seed: u64,
    clock: Clock,
) -> Result<(), CliError> {
    let mut obs = Vec::new();
    let command;
    if args.kind == "matrix" {
        command = format!("langevin matrix n={} steps={}", args.n, args.count);
        let cfg = MatrixSimConfig::new(args.n, args.count, args.dtau, seed);
        let report = matrix_simulate(&cfg, &params).map_err(numerical)?;
        obs.push(Observable::new(
            "max_constraint_residual",
            report.max_constraint_residual,
        ));
        obs.push(Observable::new("max_gauge_residual", report.max_gauge_residual));
        obs.push(Observable::new("dtau_final", report.dtau_final));
        obs.push(Observable::new("rejected_steps", report.rejected_steps as f64));
    } else {
        command = format!(
            "langevin modes m={} n_max={} trajectories={}",
            args.m, args.n, args.count
        );
        let lattice = EuclideanLattice::new(args.m, 0.1).map_err(validation)?;
        let cfg = ModeSimConfig {
            lattice,
            n_max: args.n,
            dtau: args.dtau,
            sample_periods: 25.0,
            trajectories: args.count,
            seed,
            k_probe: vec![0, 1.min(args.m - 1)],
        };
        let stats = mode_simulate(&cfg, &params).map_err(numerical)?;
        for (n, k, m) in &stats.equal_time {
            obs.push(Observable::new(format!("cov_n{n}_k{k}"), m.mean));
            obs.push(Observable::new(format!("cov_n{n}_k{k}_se"), m.std_err));
            obs.push(Observable::new(
                format!("oracle_n{n}_k{k}"),
                lyapunov_oracle_em(*n, *k, &lattice, args.dtau, &params).map_err(numerical)?,
            ));
        }
        for (n, k, rate) in &stats.decay_rate {
            obs.push(Observable::new(format!("decay_n{n}_k{k}"), *rate));
        }
        obs.push(Observable::new("cross_mode_abs", stats.cross_mode.mean));
    }
    let record = RunRecord::new(seed, params, command, obs, clock);
    write_jsonl(&out.join("langevin.jsonl"), &[record]).map_err(validation)?;
    Ok(())
}

fn run_verify(
    args: &VerifyArgs,
    out: &Path,
    params: PhysParams,
    seed: u64,
    clock: Clock,
) -> Result<(), CliError> {
    let results = droplet_core::acceptance::run_all(args.quick);
    let mut records = Vec::new();
    let mut all = true;
    for r in &results {
        println!(
            "[{}] criterion {:2} {:32} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.details
        );
        all &= r.passed;
        records.push(RunRecord::new(
            seed,
            params,
            format!("verify criterion {}: {}", r.id, r.name),
            vec![Observable::new("passed", if r.passed { 1.0 } else { 0.0 })],
            clock,
        ));
    }
    write_jsonl(&out.join("verify.jsonl"), &records).map_err(validation)?;
    if all {
        Ok(())
    } else {
        Err(CliError::Numerical("acceptance criteria failed".into()))
    }
}
