use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eikograph::config::RunConfig;
use eikograph::graph::{
    boundary_threshold, build_graph, covering_check, epsilon_schedule, hausdorff_to_boundary, mark_boundary, Graph,
};
use eikograph::harness::{
    coupled_dt, emit_report, gamma_spacing, mc_cover_probability, rate_checks, resolve_k1, run_convergence, summary_text, McConfig,
    ReportFormat, SweepConfig,
};
use eikograph::io;
use eikograph::kernel::cfl_bound;
use eikograph::manifold::sample_points;
use eikograph::reference::{check_uniform_regime, closed_form_fields, sup_error, ErrorRecord};
use eikograph::solver::{
    audit_barriers, audit_regularity, euler_step, nonlocal_gradient, nonlocal_gradient_brute_force, solve, Field,
    RegularityConstants, SolverConfig,
};
use eikograph::{Error, Result};
use rand::Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "eikograph", version, about = "Non-local Eikonal solver on random geometric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (defaults to the unit-sphere cap problem).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Record every k-th step of the trajectory.
    #[arg(long, global = true)]
    snapshot_every: Option<usize>,
    /// Stop once the largest update falls below the steady tolerance.
    #[arg(long, global = true)]
    stop_at_steady: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Format of the convergence table.
    #[arg(long, global = true, value_parser = ["csv", "json"], default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a cloud and build its graph.
    Gen,
    /// Solve one problem and audit the trajectory.
    Solve,
    /// Run a convergence sweep.
    Converge,
    /// Monte-Carlo frequency of the covering and boundary events.
    McCover,
    /// Run the invariant checks on the configured problem.
    Validate,
}

enum Failure {
    Config(Error),
    Run(Error),
    Validate(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e),
            other => Failure::Run(other),
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(eikograph::config::ProblemSpec::sphere_cap()),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(k) = common.snapshot_every {
        config.solver.snapshot_every = k;
    }
    if common.stop_at_steady {
        config.solver.stop_at_steady = true;
    }
    config.validate()?;
    Ok(config)
}

struct Built {
    graph: Graph,
    k1: Option<f64>,
}

fn build(config: &RunConfig, n: usize) -> Result<Built> {
    let p = &config.problem;
    let (kernel, constants) = p.kernel.build()?;
    let (epsilon, k1) = match config.epsilon {
        Some(e) => (e, None),
        None => {
            let k1 = resolve_k1(config)?;
            let m = p.m_star(config.m_star);
            (epsilon_schedule(n, m, config.nu, config.tau, k1)?.epsilon_n, Some(k1))
        }
    };
    let cloud = sample_points(&p.manifold, n, p.density, config.seed)?;
    let marking = mark_boundary(&cloud, &p.boundary, kernel.a, epsilon, config.nu)?;
    let graph = build_graph(cloud, &kernel, &constants, epsilon)?.with_boundary_mask(marking.mask)?;
    Ok(Built { graph, k1 })
}

fn solver_config(config: &RunConfig, graph: &Graph) -> SolverConfig {
    let eps = graph.epsilon();
    let dt = config.solver.dt.unwrap_or_else(|| coupled_dt(eps, config.zeta, cfl_bound(graph.constants(), eps)).0);
    SolverConfig {
        dt,
        horizon: config.solver.horizon,
        cfl_mode: config.solver.cfl_mode,
        steady_tol: config.solver.steady_tol,
        stop_at_steady: config.solver.stop_at_steady,
        snapshot_every: config.solver.snapshot_every,
        potential: config.problem.potential,
        initial: config.problem.initial,
    }
}

fn gen(config: &RunConfig, out: &Path, header: &str) -> Result<()> {
    let Built { graph, k1 } = build(config, config.n)?;
    io::write_points(&out.join("points.csv"), graph.cloud(), header)?;
    io::write_graph(out, &graph, header)?;
    let cover = covering_check(graph.cloud(), graph.kernel().a, graph.epsilon(), config.nu, config.probes)?;
    io::write_json(
        &out.join("graph.json"),
        &json!({
            "config_hash": config.hash(),
            "n": graph.len(),
            "epsilon": graph.epsilon(),
            "k1": k1,
            "directed_edges": graph.directed_edge_count(),
            "boundary_vertices": graph.boundary_count(),
            "cover": cover,
            "kernel_constants": graph.constants(),
        }),
    )?;
    println!(
        "n = {}, epsilon = {:.6}, directed edges = {}, boundary vertices = {}",
        graph.len(),
        graph.epsilon(),
        graph.directed_edge_count(),
        graph.boundary_count()
    );
    Ok(())
}

fn solve_cmd(config: &RunConfig, out: &Path, header: &str) -> Result<()> {
    let Built { graph, .. } = build(config, config.n)?;
    let solver = solver_config(config, &graph);
    let solution = solve(&graph, &solver)?;
    io::write_solution(&out.join("solution.csv"), &solution.trajectory, header)?;
    let p = &config.problem;
    let rc = RegularityConstants::new(&graph, &solution.potential, p.initial.lipschitz(&p.manifold));
    let mut regularity = audit_regularity(&solution.trajectory, &graph, &rc);
    let barriers = if solution.initial.iter().all(|v| *v == 0.0) {
        let b = audit_barriers(&solution.trajectory, &graph, &p.boundary, &solution.potential, &solution.initial, solver.horizon)?;
        if !b.skipped {
            regularity.barrier_lower_ok = Some(b.lower_ok);
            regularity.barrier_upper_ok = Some(b.upper_ok);
        }
        Some(b)
    } else {
        None
    };
    if check_uniform_regime(&p.potential, &p.initial).is_ok() {
        let times: Vec<f64> = solution.trajectory.iter().map(|f| f.time).collect();
        let oracle = closed_form_fields(graph.cloud(), &p.boundary, &p.potential, &p.initial, &times)?;
        let record = ErrorRecord {
            n: graph.len(),
            epsilon: graph.epsilon(),
            dt: solution.dt,
            sup_error: sup_error(&solution.trajectory, &oracle)?,
            boundary_hausdorff: boundary_hausdorff(config, &graph),
            runtime_seconds: None,
            seed: config.seed,
        };
        println!("sup error against min(t, d(x, boundary)): {:.6e}", record.sup_error);
        io::write_errors(&out.join("errors.csv"), [&record], header)?;
    }
    io::write_json(
        &out.join("run.json"),
        &json!({
            "config": config,
            "config_hash": config.hash(),
            "epsilon": graph.epsilon(),
            "dt": solution.dt,
            "dt_clamped": solution.dt_clamped,
            "steps": solution.steps,
            "steady_state_step": solution.steady_state_step,
            "max_time_quotient": solution.max_time_quotient,
            "regularity_constants": rc,
            "regularity": regularity,
            "barriers": barriers,
        }),
    )?;
    println!(
        "epsilon = {:.6}, dt = {:.6e}, steps = {}, time-Lipschitz ok = {}, space ok = {}",
        graph.epsilon(),
        solution.dt,
        solution.steps,
        regularity.time_ok(),
        regularity.space_ok()
    );
    Ok(())
}

fn boundary_hausdorff(config: &RunConfig, graph: &Graph) -> f64 {
    let p = &config.problem;
    let threshold = boundary_threshold(graph.kernel().a, graph.epsilon(), config.nu);
    let sample = p.boundary.sample(&p.manifold, gamma_spacing(p, threshold));
    hausdorff_to_boundary(&p.boundary, &sample, graph.cloud(), graph.boundary_mask()).unwrap_or(f64::NAN)
}

fn converge(config: &RunConfig, out: &Path, header: &str, format: ReportFormat) -> Result<()> {
    let k1 = resolve_k1(config)?;
    let sweep = SweepConfig::from_run(config, k1);
    let table = run_convergence(&sweep)?;
    io::write_errors(&out.join("errors.csv"), table.records(), header)?;
    io::write_timings(&out.join("timings.csv"), &table, header)?;
    emit_report(&table, out, format, header)?;
    print!("{}", summary_text(&table));
    if !rate_checks(&table).all() {
        log::warn!("rate checks did not all pass");
    }
    Ok(())
}

fn mc_cover(config: &RunConfig, out: &Path) -> Result<()> {
    let k1 = resolve_k1(config)?;
    let report = mc_cover_probability(&McConfig {
        problem: config.problem.clone(),
        n: config.mc.n,
        trials: config.mc.trials,
        nu: config.nu,
        tau: config.tau,
        m_star: config.problem.m_star(config.m_star),
        k1,
        probes: config.probes,
        seed_base: config.seed,
        epsilon: config.mc.epsilon,
    })?;
    io::write_json(&out.join("mc.json"), &json!({ "config_hash": config.hash(), "report": report }))?;
    println!(
        "n = {}, trials = {}, epsilon = {:.6}: cover {:.3}, boundary {:.3}, joint {:.3}",
        report.n, report.trials, report.epsilon_n, report.cover_frequency, report.hausdorff_frequency, report.joint_frequency
    );
    Ok(())
}

/// Largest cloud on which the brute-force operator comparison runs.
const BRUTE_FORCE_LIMIT: usize = 1000;
const ORDER_TRIALS: usize = 200;

fn validate(config: &RunConfig, out: &Path) -> std::result::Result<(), Failure> {
    let mut checks: Vec<(String, bool)> = Vec::new();
    let small = build(config, config.n.min(BRUTE_FORCE_LIMIT))?.graph;
    let mut rng = eikograph::manifold::stream_rng(config.seed, 0x7a11d);
    let values: Vec<f64> = (0..small.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let same = (0..small.len()).all(|i| nonlocal_gradient(&small, &values, i) == nonlocal_gradient_brute_force(&small, &values, i));
    checks.push(("operator equals brute-force evaluation".into(), same));

    let bound = cfl_bound(small.constants(), small.epsilon());
    let potential: Vec<f64> = (0..small.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let initial = vec![0.0; small.len()];
    let mut ordered = true;
    for _ in 0..ORDER_TRIALS {
        let f: Vec<f64> = (0..small.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = f.iter().map(|v| v + rng.random_range(0.0..0.5)).collect();
        let a = euler_step(&small, &Field::new(f, 0.0), &potential, bound, &initial)?;
        let b = euler_step(&small, &Field::new(g, 0.0), &potential, bound, &initial)?;
        ordered &= a.values.iter().zip(&b.values).all(|(x, y)| x <= y);
    }
    checks.push(("Euler step preserves order at the CFL bound".into(), ordered));

    let graph = build(config, config.n)?.graph;
    let solver = solver_config(config, &graph);
    let solution = solve(&graph, &solver)?;
    let p = &config.problem;
    let rc = RegularityConstants::new(&graph, &solution.potential, p.initial.lipschitz(&p.manifold));
    let r = audit_regularity(&solution.trajectory, &graph, &rc);
    checks.push(("time-Lipschitz bound".into(), r.time_ok()));
    checks.push(("space-regularity bound".into(), r.space_ok()));
    if solution.initial.iter().all(|v| *v == 0.0) {
        let b = audit_barriers(&solution.trajectory, &graph, &p.boundary, &solution.potential, &solution.initial, solver.horizon)?;
        if b.skipped {
            println!("SKIP barrier sandwich (no boundary vertices)");
        } else {
            checks.push(("lower barrier".into(), b.lower_ok));
            checks.push(("upper barrier".into(), b.upper_ok));
        }
    }
    for (name, ok) in &checks {
        println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
    }
    let report: Vec<_> = checks.iter().map(|(name, ok)| json!({ "check": name, "pass": ok })).collect();
    io::write_json(&out.join("validate.json"), &json!({ "config_hash": config.hash(), "checks": report }))?;
    let failed: Vec<String> = checks.into_iter().filter(|c| !c.1).map(|c| c.0).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validate(failed))
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let config = load_config(&cli.common).map_err(Failure::Config)?;
    if let Some(t) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(Error::Config(e.to_string())))?;
    }
    let out = &cli.common.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Failure::Run(e.into()))?;
    let header = io::header_line(&config.hash());
    let format = if cli.common.format == "json" { ReportFormat::Json } else { ReportFormat::Csv };
    match cli.command {
        Command::Gen => gen(&config, out, &header)?,
        Command::Solve => solve_cmd(&config, out, &header)?,
        Command::Converge => converge(&config, out, &header, format)?,
        Command::McCover => mc_cover(&config, out)?,
        Command::Validate => validate(&config, out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Validate(failed)) => {
            eprintln!("validation failed: {}", failed.join("; "));
            ExitCode::from(3)
        }
    }
}
