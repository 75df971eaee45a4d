//! Monte Carlo sweeps over the number of measurements.
//!
//! Every `(M, trial)` pair draws one truth, one ensemble and one noise
//! realization from seeds derived from the base seed; all methods are run on
//! that same instance, so results are paired by construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formulations::{
    run_bmi, solve_anm_linear, solve_convex, solve_phaselift_fit, AnmPhaseLiftSolution, BmiOptions, DataFit,
    PhaseRetrievalInstance, DEFAULT_LAMBDA,
};
use crate::linalg::{ComplexVector, ToeplitzParam};
use crate::sdp::SolverOptions;
use crate::signal::{measure, noise_variance_for_snr, sample_truth, trial_rng, GroundTruth, MeasurementEnsemble, TruthConfig};
use crate::spectral::{
    align_phase, frequency_mse, retrieve_signal, vandermonde_decompose, FrequencyEstimate, DEFAULT_MISS_PENALTY,
    DEFAULT_RANK_TOL,
};

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "ANM_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Phaselift,
    Bmi,
    Convex,
    /// PhaseLift, then the atomic-norm program on the retrieved signal.
    TwoStep,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Phaselift, Method::Bmi, Method::Convex, Method::TwoStep];

    pub fn name(self) -> &'static str {
        match self {
            Method::Phaselift => "phaselift",
            Method::Bmi => "bmi",
            Method::Convex => "convex",
            Method::TwoStep => "two_step",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected phaselift, bmi, convex or two_step)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub l: usize,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub lambda: f64,
    /// Penalty weight for noisy runs; defaults to `10 / σ²` per trial.
    pub delta: Option<f64>,
    /// `None` means noiseless measurements and equality-constrained programs.
    pub snr_db: Option<f64>,
    pub success_threshold: f64,
    pub separation_floor: f64,
    pub magnitude_min: f64,
    pub magnitude_max: f64,
    pub rank_tol: f64,
    pub miss_penalty: f64,
    /// Use the true number of lines as the model order when decomposing.
    pub pin_model_order: bool,
    pub output: PathBuf,
    /// Worker threads; `None` uses the environment override or the number of CPUs.
    pub workers: Option<usize>,
    pub solver: SolverOptions,
    pub bmi: BmiOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 8,
            l: 2,
            m_values: (1..=8).map(|k| 4 * k).collect(),
            trials: 100,
            seed: 20_240_601,
            methods: Method::ALL.to_vec(),
            lambda: DEFAULT_LAMBDA,
            delta: None,
            snr_db: None,
            success_threshold: 1e-2,
            separation_floor: 0.125,
            magnitude_min: 0.5,
            magnitude_max: 1.5,
            rank_tol: DEFAULT_RANK_TOL,
            miss_penalty: DEFAULT_MISS_PENALTY,
            pin_model_order: true,
            output: PathBuf::from("results"),
            workers: None,
            solver: SolverOptions::default(),
            bmi: BmiOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn truth_config(&self) -> TruthConfig {
        TruthConfig {
            n: self.n,
            l: self.l,
            separation_floor: self.separation_floor,
            magnitude_min: self.magnitude_min,
            magnitude_max: self.magnitude_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return bad("m_values must be non-empty with entries ≥ 1");
        }
        if self.methods.is_empty() {
            return bad("methods must be non-empty");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if matches!(self.delta, Some(d) if !(d > 0.0)) {
            return bad("delta must be positive");
        }
        if !(self.success_threshold > 0.0) || !(self.rank_tol > 0.0) || !(self.miss_penalty >= 0.0) {
            return bad("success_threshold and rank_tol must be positive, miss_penalty nonnegative");
        }
        if self.bmi.max_outer == 0 || !(self.bmi.rel_tol > 0.0) {
            return bad("bmi.max_outer must be ≥ 1 and bmi.rel_tol positive");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        self.truth_config().validate()?;
        self.solver.validate()
    }

    /// Explicit setting, else the environment override, else the CPU count.
    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
            .unwrap_or(1)
            .max(1)
    }
}

/// The minimum wrapped separation for which the atomic-norm SDP is known to
/// be exact at length `n`, or `None` when the bound is vacuous (`n < 5`).
pub fn separation_bound(n: usize) -> Option<f64> {
    let k = n.saturating_sub(1) / 4;
    (k > 0).then(|| 1.0 / k as f64)
}

fn warn_separation_tension(cfg: &ExperimentConfig) {
    match separation_bound(cfg.n) {
        Some(b) if b > cfg.separation_floor => log::warn!(
            "N = {} needs wrapped separation ≥ {b:.3} for guaranteed atomic-norm exactness (unattainable above 0.5); \
             only the configured floor {} is enforced",
            cfg.n,
            cfg.separation_floor
        ),
        None => log::warn!("N = {} is too short for the atomic-norm separation guarantee; only the configured floor is enforced", cfg.n),
        _ => {}
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub m: usize,
    pub trial: usize,
    pub signal_error: f64,
    pub success: bool,
    /// Empty for methods that do not estimate frequencies. Uses the true
    /// model order when `pin_model_order` is set.
    pub frequency_mse: Option<f64>,
    /// Same, with the order chosen by the rank threshold.
    pub frequency_mse_auto: Option<f64>,
    /// Order chosen by the rank threshold.
    pub model_order: Option<usize>,
    pub status: String,
    pub outer_iterations: Option<usize>,
    /// SHA-256 prefix of the ensemble and measurements the method consumed.
    pub content_hash: String,
    pub wall_time_s: f64,
}

/// Seeds for one `(M, trial)` cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub truth: u64,
    pub ensemble: u64,
    pub noise: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seeds(base: u64, m: usize, trial: usize) -> TrialSeeds {
    let cell = splitmix64(base ^ splitmix64(((m as u64) << 32) | trial as u64));
    TrialSeeds {
        truth: splitmix64(cell ^ 1),
        ensemble: splitmix64(cell ^ 2),
        noise: splitmix64(cell ^ 3),
    }
}

/// One drawn problem instance plus everything needed to score it.
#[derive(Clone, Debug)]
pub struct TrialInstance {
    pub truth: GroundTruth,
    pub instance: PhaseRetrievalInstance,
    /// Zero for noiseless runs.
    pub noise_variance: f64,
    pub content_hash: String,
}

pub fn draw_trial(cfg: &ExperimentConfig, m: usize, trial: usize) -> Result<TrialInstance> {
    let seeds = trial_seeds(cfg.seed, m, trial);
    let truth = sample_truth(&cfg.truth_config(), &mut trial_rng(seeds.truth, 0))?;
    let ens = MeasurementEnsemble::gaussian(cfg.n, m, seeds.ensemble)?;
    let mut noise_rng = trial_rng(seeds.noise, 0);
    let clean = measure(&truth.x, &ens, 0.0, &mut noise_rng)?;
    let (y, noise_variance) = match cfg.snr_db {
        None => (clean, 0.0),
        Some(snr) => {
            let var = noise_variance_for_snr(&clean, snr);
            (measure(&truth.x, &ens, var, &mut noise_rng)?, var)
        }
    };
    let content_hash = content_hash(&ens, &y);
    Ok(TrialInstance {
        truth,
        instance: PhaseRetrievalInstance::new(ens, y)?,
        noise_variance,
        content_hash,
    })
}

fn content_hash(ens: &MeasurementEnsemble, y: &[f64]) -> String {
    let mut h = Sha256::new();
    for z in ens.vectors() {
        for c in z.as_slice() {
            h.update(c.re.to_le_bytes());
            h.update(c.im.to_le_bytes());
        }
    }
    for v in y {
        h.update(v.to_le_bytes());
    }
    let digest = format!("{:x}", h.finalize());
    digest[..16].to_string()
}

fn data_fit(cfg: &ExperimentConfig, noise_variance: f64) -> DataFit {
    if cfg.snr_db.is_none() || noise_variance == 0.0 {
        DataFit::Exact
    } else {
        DataFit::Penalized {
            delta: cfg.delta.unwrap_or(10.0 / noise_variance),
        }
    }
}

/// PhaseLift, leading eigenvector, atomic-norm program on that vector, then
/// Vandermonde decomposition of the recovered Toeplitz matrix.
pub fn two_step_baseline(
    inst: &PhaseRetrievalInstance,
    solver: &SolverOptions,
    rank_tol: f64,
    order: Option<usize>,
) -> Result<FrequencyEstimate> {
    let pl = solve_phaselift_fit(inst, DataFit::Exact, solver)?;
    two_step_from_signal(&retrieve_signal(&pl.x_hat)?, solver, rank_tol, order)
}

/// Second stage of [`two_step_baseline`] for an already retrieved signal.
pub fn two_step_from_signal(
    x_hat: &ComplexVector,
    solver: &SolverOptions,
    rank_tol: f64,
    order: Option<usize>,
) -> Result<FrequencyEstimate> {
    let anm = solve_anm_linear(x_hat, solver)?;
    vandermonde_decompose(&anm.u_hat, rank_tol, order)
}

struct Scored {
    signal_error: f64,
    /// Toeplitz parameter handed to the Vandermonde decomposition.
    u_hat: Option<ToeplitzParam>,
    status: String,
    outer_iterations: Option<usize>,
}

fn score_solution(sol: &AnmPhaseLiftSolution, truth: &GroundTruth) -> Result<f64> {
    Ok(align_phase(&retrieve_signal(&sol.x_hat)?, &truth.x)?.1)
}

/// Runs every configured method on one drawn instance.
pub fn run_trial(cfg: &ExperimentConfig, m: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let drawn = draw_trial(cfg, m, trial)?;
    let fit = data_fit(cfg, drawn.noise_variance);
    let order = cfg.pin_model_order.then_some(cfg.l);
    let decompose = |u: &ToeplitzParam, order: Option<usize>| -> FrequencyEstimate {
        // An indefinite T(û) has no Vandermonde decomposition: no lines found.
        vandermonde_decompose(u, cfg.rank_tol, order).unwrap_or_else(|e| {
            log::debug!("M={m} trial={trial}: decomposition failed: {e}");
            FrequencyEstimate::empty()
        })
    };
    let mse = |e: &FrequencyEstimate| frequency_mse(&e.frequencies, &drawn.truth.frequencies, cfg.miss_penalty);

    let mut phaselift: Option<(AnmPhaseLiftSolution, f64)> = None;
    let mut records = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let scored: Result<Scored> = (|| match method {
            Method::Phaselift | Method::TwoStep => {
                if phaselift.is_none() {
                    let sol = solve_phaselift_fit(&drawn.instance, fit, &cfg.solver)?;
                    let err = score_solution(&sol, &drawn.truth)?;
                    phaselift = Some((sol, err));
                }
                let (sol, err) = phaselift.as_ref().expect("just computed");
                let u_hat = if method == Method::TwoStep {
                    let x_hat = retrieve_signal(&sol.x_hat)?;
                    Some(solve_anm_linear(&x_hat, &cfg.solver)?.u_hat)
                } else {
                    None
                };
                Ok(Scored {
                    signal_error: *err,
                    u_hat,
                    status: sol.status.to_string(),
                    outer_iterations: None,
                })
            }
            Method::Bmi => {
                let sol = run_bmi(&drawn.instance, cfg.lambda, fit, &cfg.bmi, &cfg.solver)?;
                Ok(Scored {
                    signal_error: score_solution(&sol, &drawn.truth)?,
                    u_hat: Some(sol.u_hat.clone()),
                    status: sol.status.to_string(),
                    outer_iterations: Some(sol.outer_iterations),
                })
            }
            Method::Convex => {
                let sol = solve_convex(&drawn.instance, cfg.lambda, fit, &cfg.solver)?;
                Ok(Scored {
                    signal_error: score_solution(&sol, &drawn.truth)?,
                    u_hat: Some(sol.u_hat.clone()),
                    status: sol.status.to_string(),
                    outer_iterations: None,
                })
            }
        })();
        let scored = scored.unwrap_or_else(|e| {
            log::warn!("{method} M={m} trial={trial}: {e}");
            Scored {
                signal_error: f64::NAN,
                u_hat: None,
                status: "error".into(),
                outer_iterations: None,
            }
        });
        let auto = scored.u_hat.as_ref().map(|u| decompose(u, None));
        records.push(TrialRecord {
            method,
            m,
            trial,
            signal_error: scored.signal_error,
            success: scored.signal_error <= cfg.success_threshold,
            frequency_mse: scored.u_hat.as_ref().map(|u| mse(&decompose(u, order))),
            frequency_mse_auto: auto.as_ref().map(mse),
            model_order: auto.as_ref().map(|e| if e.full_rank { cfg.n } else { e.model_order() }),
            status: scored.status,
            outer_iterations: scored.outer_iterations,
            content_hash: drawn.content_hash.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}

/// [`run_sweep_with`] without a progress callback.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    run_sweep_with(cfg, |_| {})
}

/// Runs all `(M, trial)` cells on a bounded worker pool. `on_record` sees
/// records as they complete (in completion order); the returned list is
/// sorted by `(M, trial, method)` regardless of scheduling.
pub fn run_sweep_with(cfg: &ExperimentConfig, mut on_record: impl FnMut(&TrialRecord)) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    warn_separation_tension(cfg);
    let jobs: Vec<(usize, usize)> = cfg
        .m_values
        .iter()
        .flat_map(|&m| (0..cfg.trials).map(move |t| (m, t)))
        .collect();
    let workers = cfg.resolved_workers().min(jobs.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Result<Vec<TrialRecord>>>();

    let mut records = Vec::with_capacity(jobs.len() * cfg.methods.len());
    let mut first_error = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(m, t)) = jobs.get(i) else { break };
                if tx.send(run_trial(cfg, m, t)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (done, result) in rx.into_iter().enumerate() {
            match result {
                Ok(batch) => {
                    for r in &batch {
                        on_record(r);
                    }
                    records.extend(batch);
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
            log::info!("completed {}/{} trials", done + 1, jobs.len());
        }
    });
    // Drawing an instance only fails on an invalid configuration.
    if let Some(e) = first_error {
        return Err(e);
    }
    records.sort_by(|a, b| (a.m, a.trial, a.method).cmp(&(b.m, b.trial, b.method)));
    Ok(records)
}

/// Per-`(method, M)` statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_error: f64,
    pub median_error: f64,
    /// Over all trials with a frequency estimate.
    pub mean_frequency_mse: Option<f64>,
    /// Over successful trials with a frequency estimate.
    pub mean_frequency_mse_success: Option<f64>,
    /// As `mean_frequency_mse`, with rank-threshold model order.
    pub mean_frequency_mse_auto: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Groups records by `(method, M)`. Methods listed in `methods` without any
/// record are skipped with a warning.
pub fn aggregate(records: &[TrialRecord], methods: &[Method]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method, r.m)).or_default().push(r);
    }
    for &method in methods {
        if !groups.keys().any(|(m, _)| *m == method) {
            log::warn!("no records for method {method}; omitted from summary");
        }
    }
    groups
        .into_iter()
        .map(|((method, m), rows)| {
            let successes = rows.iter().filter(|r| r.success).count();
            let mut errors: Vec<f64> = rows.iter().map(|r| r.signal_error).filter(|e| !e.is_nan()).collect();
            let all_mse: Vec<f64> = rows.iter().filter_map(|r| r.frequency_mse).collect();
            let ok_mse: Vec<f64> = rows.iter().filter(|r| r.success).filter_map(|r| r.frequency_mse).collect();
            let auto_mse: Vec<f64> = rows.iter().filter_map(|r| r.frequency_mse_auto).collect();
            SummaryRow {
                method,
                m,
                trials: rows.len(),
                successes,
                success_rate: successes as f64 / rows.len() as f64,
                mean_error: mean(&errors).unwrap_or(f64::NAN),
                median_error: median(&mut errors),
                mean_frequency_mse: mean(&all_mse),
                mean_frequency_mse_success: mean(&ok_mse),
                mean_frequency_mse_auto: mean(&auto_mse),
            }
        })
        .collect()
}

pub fn write_trials_csv<W: std::io::Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text x/y series: one `# <metric> <method>` header per curve, then
/// `M value` lines.
pub fn render_curves(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let methods: Vec<Method> = {
        let mut m: Vec<Method> = rows.iter().map(|r| r.method).collect();
        m.dedup();
        m
    };
    type Metric = fn(&SummaryRow) -> Option<f64>;
    let metrics: [(&str, Metric); 4] = [
        ("success_rate", |r| Some(r.success_rate)),
        ("frequency_mse", |r| r.mean_frequency_mse),
        ("frequency_mse_success", |r| r.mean_frequency_mse_success),
        ("frequency_mse_auto", |r| r.mean_frequency_mse_auto),
    ];
    for (metric, get) in metrics {
        for &method in &methods {
            let series: Vec<(usize, f64)> = rows
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| get(r).map(|v| (r.m, v)))
                .collect();
            if series.is_empty() {
                continue;
            }
            let _ = writeln!(out, "# {metric} {method}");
            for (m, v) in series {
                let _ = writeln!(out, "{m} {v}");
            }
            out.push('\n');
        }
    }
    out
}

/// SHA-256 of the trials CSV with the wall-time column removed.
pub fn determinism_hash(records: &[TrialRecord]) -> Result<String> {
    let stripped: Vec<TrialRecord> = records
        .iter()
        .map(|r| TrialRecord {
            wall_time_s: 0.0,
            ..r.clone()
        })
        .collect();
    let mut buf = Vec::new();
    write_trials_csv(&stripped, &mut buf)?;
    Ok(format!("{:x}", Sha256::digest(&buf)))
}

/// Writes `trials.csv`, `summary.csv`, `curves.txt` and the effective
/// `config.toml` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(dir)?;
    write_trials_csv(records, std::fs::File::create(dir.join("trials.csv"))?)?;
    let rows = aggregate(records, &cfg.methods);
    write_summary_csv(&rows, std::fs::File::create(dir.join("summary.csv"))?)?;
    std::fs::write(dir.join("curves.txt"), render_curves(&rows))?;
    let mut f = std::fs::File::create(dir.join("config.toml"))?;
    f.write_all(cfg.to_toml_string().as_bytes())?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: Method, m: usize, trial: usize, err: f64, mse: Option<f64>) -> TrialRecord {
        TrialRecord {
            method,
            m,
            trial,
            signal_error: err,
            success: err <= 1e-2,
            frequency_mse: mse,
            frequency_mse_auto: mse,
            model_order: mse.map(|_| 2),
            status: "solved".into(),
            outer_iterations: None,
            content_hash: "0".into(),
            wall_time_s: 0.5,
        }
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 4,
            l: 1,
            m_values: vec![12],
            trials: 2,
            methods: vec![Method::Phaselift, Method::TwoStep],
            workers: Some(1),
            ..Default::default()
        }
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        assert_eq!(cfg.m_values, vec![4, 8, 12, 16, 20, 24, 28, 32]);
    }

    #[test]
    fn config_rejects_bad_values() {
        for toml in ["trials = 0", "m_values = []", "m_values = [0, 4]", "methods = []", "lambda = -1.0", "nope = 1"] {
            assert!(ExperimentConfig::from_toml_str(toml).is_err(), "{toml}");
        }
        let cfg = ExperimentConfig::from_toml_str("methods = [\"bmi\"]\n[solver]\nmax_iters = 50").unwrap();
        assert_eq!(cfg.methods, vec![Method::Bmi]);
        assert_eq!(cfg.solver.max_iters, 50);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let a = trial_seeds(1, 8, 0);
        assert_ne!(a, trial_seeds(2, 8, 0));
        assert_ne!(a, trial_seeds(1, 12, 0));
        assert_ne!(a, trial_seeds(1, 8, 1));
        assert_eq!(a, trial_seeds(1, 8, 0));
        assert!(a.truth != a.ensemble && a.ensemble != a.noise);
    }

    #[test]
    fn separation_bound_values() {
        assert_eq!(separation_bound(8), Some(1.0));
        assert_eq!(separation_bound(17), Some(0.25));
        assert_eq!(separation_bound(4), None);
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let recs = vec![
            record(Method::Bmi, 8, 0, 0.001, Some(0.0)),
            record(Method::Bmi, 8, 1, 0.5, Some(0.25)),
            record(Method::Bmi, 8, 2, 0.003, Some(0.01)),
            record(Method::Bmi, 8, 3, 0.2, Some(0.05)),
            record(Method::Bmi, 8, 4, 0.004, Some(0.02)),
        ];
        let rows = aggregate(&recs, &[Method::Bmi]);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.trials, r.successes), (5, 3));
        assert!((r.success_rate - 0.6).abs() < 1e-15);
        assert!((r.mean_error - 0.1416).abs() < 1e-12);
        assert!((r.median_error - 0.004).abs() < 1e-15);
        assert!((r.mean_frequency_mse.unwrap() - 0.066).abs() < 1e-12);
        assert!((r.mean_frequency_mse_success.unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn all_successes_give_unit_rate() {
        let recs: Vec<_> = (0..4).map(|t| record(Method::Convex, 16, t, 1e-4, None)).collect();
        let rows = aggregate(&recs, &[Method::Convex, Method::Bmi]);
        assert_eq!(rows.len(), 1, "empty method slice must be omitted");
        assert_eq!(rows[0].success_rate, 1.0);
        assert_eq!(rows[0].mean_frequency_mse, None);
    }

    #[test]
    fn curves_list_each_method_and_metric() {
        let recs = vec![
            record(Method::Bmi, 8, 0, 0.001, Some(0.0)),
            record(Method::Bmi, 12, 0, 0.5, Some(0.25)),
            record(Method::Phaselift, 8, 0, 0.5, None),
        ];
        let text = render_curves(&aggregate(&recs, &[Method::Bmi, Method::Phaselift]));
        assert!(text.contains("# success_rate bmi\n8 1\n12 0\n"));
        assert!(text.contains("# success_rate phaselift\n8 0\n"));
        assert!(text.contains("# frequency_mse bmi\n8 0\n12 0.25\n"));
        assert!(!text.contains("# frequency_mse phaselift"));
    }

    #[test]
    fn csv_header_is_stable() {
        let mut buf = Vec::new();
        write_trials_csv(&[record(Method::TwoStep, 4, 0, 0.1, Some(0.2))], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "method,m,trial,signal_error,success,frequency_mse,frequency_mse_auto,model_order,status,outer_iterations,content_hash,wall_time_s"
        );
        assert!(text.lines().nth(1).unwrap().starts_with("two_step,4,0,0.1,false,0.2,0.2,2,solved,,0,"));
    }

    #[test]
    fn determinism_hash_ignores_wall_time() {
        let a = vec![record(Method::Bmi, 8, 0, 0.001, Some(0.0))];
        let mut b = a.clone();
        b[0].wall_time_s = 99.0;
        assert_eq!(determinism_hash(&a).unwrap(), determinism_hash(&b).unwrap());
        b[0].signal_error = 0.002;
        assert_ne!(determinism_hash(&a).unwrap(), determinism_hash(&b).unwrap());
    }

    #[test]
    fn sweep_pairs_methods_on_identical_data() {
        let recs = run_sweep(&tiny_config()).unwrap();
        assert_eq!(recs.len(), 4);
        for pair in recs.chunks(2) {
            assert_eq!(pair[0].trial, pair[1].trial);
            assert_eq!(pair[0].content_hash, pair[1].content_hash);
            // The two-step baseline shares the PhaseLift signal estimate.
            assert_eq!(pair[0].signal_error, pair[1].signal_error);
        }
        assert_ne!(recs[0].content_hash, recs[2].content_hash);
    }

    #[test]
    fn noisy_trials_draw_noise() {
        let cfg = ExperimentConfig {
            snr_db: Some(20.0),
            ..tiny_config()
        };
        let noisy = draw_trial(&cfg, 12, 0).unwrap();
        let clean = draw_trial(&tiny_config(), 12, 0).unwrap();
        assert!(noisy.noise_variance > 0.0);
        assert_eq!(noisy.truth, clean.truth);
        assert_ne!(noisy.content_hash, clean.content_hash);
        assert!(matches!(data_fit(&cfg, noisy.noise_variance), DataFit::Penalized { delta } if (delta - 10.0 / noisy.noise_variance).abs() < 1e-9 * delta));
    }

    #[test]
    fn two_step_with_exact_signal_is_pure_anm() {
        let truth = GroundTruth::new(
            16,
            vec![0.1, 0.45],
            vec![crate::linalg::Complex64::new(1.0, 0.0), crate::linalg::Complex64::from_polar(1.0, 1.0)],
        )
        .unwrap();
        let est = two_step_from_signal(&truth.x, &SolverOptions::default(), DEFAULT_RANK_TOL, Some(2)).unwrap();
        assert!(frequency_mse(&est.frequencies, &truth.frequencies, 0.25) < 1e-10);
    }
}
