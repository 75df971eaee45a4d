use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use anm_phaselift::experiment::{
    draw_trial, run_sweep_with, two_step_from_signal, write_outputs, ExperimentConfig, Method, WORKERS_ENV,
};
use anm_phaselift::formulations::{run_bmi, solve_convex, solve_phaselift_fit, AnmPhaseLiftSolution, DataFit};
use anm_phaselift::signal::wrapped_distance;
use anm_phaselift::spectral::{align_phase, frequency_mse, retrieve_signal, vandermonde_decompose, FrequencyEstimate};
use anm_phaselift::{selftest, Error, Result};

/// Phase retrieval with a line-spectral prior: lifted SDPs, a built-in conic
/// solver and Monte Carlo sweeps.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the success-rate / frequency-MSE study and write CSV outputs.
    Sweep(SweepArgs),
    /// Solve a single drawn instance and print a recovery report.
    Solve(SolveArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

/// Flags that override keys of the TOML config.
#[derive(Args)]
struct Overrides {
    /// TOML config file; flags take precedence over its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Measurement SNR in dB; omit for noiseless data.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    success_threshold: Option<f64>,
    #[arg(long)]
    separation_floor: Option<f64>,
    /// Let the rank threshold choose the model order instead of using L.
    #[arg(long)]
    auto_order: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    max_outer: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated measurement counts.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of phaselift,bmi,convex,two_step.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// Trial index used to derive the instance seeds.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    #[arg(long, default_value = "bmi")]
    method: String,
}

fn base_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::load(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = o.$field { cfg.$field = v; })*};
    }
    set!(n, l, seed, lambda, success_threshold, separation_floor);
    if o.delta.is_some() {
        cfg.delta = o.delta;
    }
    if o.snr_db.is_some() {
        cfg.snr_db = o.snr_db;
    }
    if o.auto_order {
        cfg.pin_model_order = false;
    }
    if let Some(v) = o.max_iters {
        cfg.solver.max_iters = v;
    }
    if let Some(v) = o.max_outer {
        cfg.bmi.max_outer = v;
    }
    Ok(cfg)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if let Some(m) = args.m {
        cfg.m_values = m;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(methods) = args.methods {
        cfg.methods = methods.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(o) = args.output {
        cfg.output = o;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    cfg.validate()?;
    log::info!("sweep with {} workers into {}", cfg.resolved_workers(), cfg.output.display());
    let records = run_sweep_with(&cfg, |r| {
        log::debug!("{} M={} trial={} error={:.3e}", r.method, r.m, r.trial, r.signal_error)
    })?;
    let rows = write_outputs(&cfg.output, &cfg, &records)?;
    println!("{:<10} {:>4} {:>8} {:>12} {:>12}", "method", "M", "success", "median_err", "freq_mse");
    for r in rows {
        let mse = r.mean_frequency_mse.map_or("-".to_string(), |v| format!("{v:.3e}"));
        println!(
            "{:<10} {:>4} {:>8.2} {:>12.3e} {:>12}",
            r.method.name(),
            r.m,
            r.success_rate,
            r.median_error,
            mse
        );
    }
    Ok(())
}

fn describe(est: &FrequencyEstimate) -> String {
    if est.full_rank {
        return "full rank (no line spectrum)".into();
    }
    let f: Vec<String> = est.frequencies.iter().map(|f| format!("{f:.6}")).collect();
    format!("[{}]", f.join(", "))
}

fn solve_one(args: SolveArgs) -> Result<()> {
    let cfg = base_config(&args.common)?;
    cfg.validate()?;
    let method: Method = args.method.parse()?;
    let drawn = draw_trial(&cfg, args.m, args.trial)?;
    let fit = if drawn.noise_variance > 0.0 {
        DataFit::Penalized {
            delta: cfg.delta.unwrap_or(10.0 / drawn.noise_variance),
        }
    } else {
        DataFit::Exact
    };
    let order = cfg.pin_model_order.then_some(cfg.l);
    let truth = &drawn.truth;
    println!("N = {}, L = {}, M = {}, trial {} (data hash {})", cfg.n, cfg.l, args.m, args.trial, drawn.content_hash);
    let f: Vec<String> = truth.frequencies.iter().map(|f| format!("{f:.6}")).collect();
    println!("true frequencies:      [{}]", f.join(", "));

    let report = |sol: &AnmPhaseLiftSolution| -> Result<f64> {
        let err = align_phase(&retrieve_signal(&sol.x_hat)?, &truth.x)?.1;
        println!("formulation:           {}", sol.tag);
        println!("solver status:         {}", sol.status);
        println!("objective:             {:.8}", sol.objective);
        println!("signal error:          {err:.3e} ({})", if err <= cfg.success_threshold { "success" } else { "failure" });
        Ok(err)
    };
    let estimate = match method {
        Method::Phaselift | Method::TwoStep => {
            let sol = solve_phaselift_fit(&drawn.instance, fit, &cfg.solver)?;
            report(&sol)?;
            (method == Method::TwoStep)
                .then(|| two_step_from_signal(&retrieve_signal(&sol.x_hat)?, &cfg.solver, cfg.rank_tol, order))
                .transpose()?
        }
        Method::Bmi => {
            let sol = run_bmi(&drawn.instance, cfg.lambda, fit, &cfg.bmi, &cfg.solver)?;
            report(&sol)?;
            println!("outer iterations:      {} (converged: {})", sol.outer_iterations, sol.converged);
            Some(vandermonde_decompose(&sol.u_hat, cfg.rank_tol, order).unwrap_or_else(|_| FrequencyEstimate::empty()))
        }
        Method::Convex => {
            let sol = solve_convex(&drawn.instance, cfg.lambda, fit, &cfg.solver)?;
            report(&sol)?;
            Some(match vandermonde_decompose(&sol.u_hat, cfg.rank_tol, order) {
                Ok(e) => e,
                Err(Error::NotPsd { min_eigenvalue }) => {
                    println!("T(û) is indefinite (λ_min = {min_eigenvalue:.3e}); no decomposition");
                    FrequencyEstimate::empty()
                }
                Err(e) => return Err(e),
            })
        }
    };
    if let Some(est) = estimate {
        println!("estimated frequencies: {}", describe(&est));
        for &f in &truth.frequencies {
            let d = est.frequencies.iter().map(|&g| wrapped_distance(f, g)).fold(f64::INFINITY, f64::min);
            println!("  nearest to {f:.6}:   {}", if d.is_finite() { format!("{d:.3e}") } else { "-".into() });
        }
        println!(
            "frequency MSE:         {:.3e}",
            frequency_mse(&est.frequencies, &truth.frequencies, cfg.miss_penalty)
        );
    }
    Ok(())
}

fn selftest_cmd() -> bool {
    let mut ok = true;
    for c in selftest::run_all() {
        println!("{} {:<26} {:>7.2}s  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.seconds, c.detail);
        ok &= c.passed;
    }
    ok
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Solve(a) => solve_one(a),
        Command::Selftest => {
            return if selftest_cmd() { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
