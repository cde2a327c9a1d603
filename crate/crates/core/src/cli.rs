//! `avn-steer` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 internal consistency failure (oracle disagreement).

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::criterion::{
    criterion_value, delta_prime_with, lhs_oracle, DeltaPrimeOptions, GeometricRecord, SteeringVerdict,
    SymmetrizedRecord, DEFAULT_ORACLE_GRID,
};
use crate::game::{steering_gap, w_expectation, GameSettings, GameTranscript, NcsProbabilities};
use crate::measurement::{noisy_game, stream_rng, NoiseOptions, Sampling};
use crate::quantum::{conditional_state, make_rho1, make_rho2, Outcome, TwoQubitState};
use crate::tomography::{process_fidelity, reconstruct_chi, simulate_tomography, ChiMatrix};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("consistency check failed: {0}")]
    Inconsistent(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Inconsistent(_) => EXIT_INCONSISTENT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "avn-steer", version, about = "EPR steering game, noise-robust steering criterion and process tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Game transcript and steering verdict for each (theta, eta).
    Game(RunArgs),
    /// <W> as a function of Bob's analyzer angle.
    Wcurve(CurveArgs),
    /// Plane record and Delta' verdict for each (theta, eta).
    DeltaPrime(RunArgs),
    /// Compare the criterion sign with the brute-force LHS oracle on random records.
    OracleCheck(OracleArgs),
    /// Simulated single-qubit process tomography.
    Tomo(TomoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rho1,
    Rho2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct StateArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Single value or comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    /// Inclusive grid `start:stop:count`.
    #[arg(long)]
    pub theta_grid: Option<String>,
    #[arg(long)]
    pub eta_grid: Option<String>,
}

#[derive(Args, Debug)]
pub struct SamplingArgs {
    /// Counts per measurement setting.
    #[arg(long, conflicts_with = "exact")]
    pub counts: Option<u64>,
    /// Exact probabilities with zero error bars (default).
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Grid points per axis for the LHS witness search; 0 disables it.
    #[arg(long)]
    pub oracle_grid: Option<usize>,
    /// One-sigma uncertainty of the chord angles.
    #[arg(long)]
    pub angle_error: Option<f64>,
    /// Give zero counts the Poisson sigma of one count.
    #[arg(long)]
    pub pseudo_count_floor: bool,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Analyzer angles sampled on [0, 2 pi).
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub oracle_grid: Option<usize>,
    /// Records with |value| at or below this are not compared.
    #[arg(long)]
    pub band: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TomoArgs {
    /// identity, x, y, z, or depolarizing:P
    #[arg(long)]
    pub channel: Option<String>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parsed `key=value` file. Blank lines and `#` comments are ignored.
#[derive(Debug, Default)]
struct ConfigFile(HashMap<String, String>);

impl ConfigFile {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut map = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
            map.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(ConfigFile(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| config_err(format!("{key}={v}: {e}"))))
            .transpose()
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.0.get(key).cloned()
    }

    fn flag(&self, key: &str) -> CliResult<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    fn value_enum<T: ValueEnum>(&self, key: &str) -> CliResult<Option<T>> {
        self.0
            .get(key)
            .map(|v| T::from_str(v, true).map_err(|e| config_err(format!("{key}={v}: {e}"))))
            .transpose()
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// `start:stop:count`, inclusive of both ends.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(config_err(format!("grid '{text}' is not start:stop:count")));
    };
    let a: f64 = a.trim().parse().map_err(|e| config_err(format!("grid start '{a}': {e}")))?;
    let b: f64 = b.trim().parse().map_err(|e| config_err(format!("grid stop '{b}': {e}")))?;
    let n: usize = n.trim().parse().map_err(|e| config_err(format!("grid count '{n}': {e}")))?;
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    })
}

fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| config_err(format!("value '{s}': {e}"))))
        .collect()
}

fn resolve_axis(name: &str, single: Option<String>, grid: Option<String>) -> CliResult<Vec<f64>> {
    let values = match (grid, single) {
        (Some(g), _) => parse_grid(&g)?,
        (None, Some(s)) => parse_list(&s)?,
        (None, None) => return Err(config_err(format!("no {name} given (use --{name} or --{name}-grid)"))),
    };
    if values.is_empty() {
        return Err(config_err(format!("{name} grid is empty")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(config_err(format!("{name} value {v} is not finite")));
    }
    Ok(values)
}

/// Rounds to 12 significant digits; non-finite values become `None`.
pub fn sig12(v: f64) -> Option<f64> {
    v.is_finite()
        .then(|| format!("{v:.11e}").parse().expect("formatted float parses back"))
}

#[derive(Clone, Debug)]
struct StateGrid {
    family: Family,
    points: Vec<(f64, f64)>,
}

fn resolve_states(args: &StateArgs, file: &ConfigFile) -> CliResult<StateGrid> {
    let family = pick(args.family, file.value_enum("family")?)
        .ok_or_else(|| config_err("no --family given (rho1 or rho2)"))?;
    let thetas = resolve_axis("theta", pick(args.theta.clone(), file.raw("theta")), pick(args.theta_grid.clone(), file.raw("theta-grid")))?;
    let etas = resolve_axis("eta", pick(args.eta.clone(), file.raw("eta")), pick(args.eta_grid.clone(), file.raw("eta-grid")))?;
    if let Some(e) = etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(config_err(format!("eta = {e} is outside [0, 1]")));
    }
    let points = thetas.iter().flat_map(|&t| etas.iter().map(move |&e| (t, e))).collect();
    Ok(StateGrid { family, points })
}

fn resolve_sampling(args: &SamplingArgs, file: &ConfigFile) -> CliResult<Sampling> {
    let seed = pick(args.seed, file.get("seed")?).unwrap_or(0);
    if args.exact {
        return Ok(Sampling::Exact);
    }
    let counts = match args.counts {
        Some(n) => Some(n),
        None if file.flag("exact")? => None,
        None => match file.raw("counts").as_deref() {
            None | Some("exact") => None,
            Some(v) => Some(v.parse::<u64>().map_err(|e| config_err(format!("counts={v}: {e}")))?),
        },
    };
    match counts {
        None => Ok(Sampling::Exact),
        Some(0) => Err(config_err("counts must be at least 1")),
        Some(n) => Ok(Sampling::Counts { per_setting: n, seed }),
    }
}

fn state_for(family: Family, theta: f64, eta: f64) -> CliResult<(TwoQubitState, GameSettings)> {
    match family {
        Family::Rho1 => Ok((make_rho1(theta, eta).map_err(|e| config_err(e.to_string()))?, GameSettings::for_rho1(theta))),
        Family::Rho2 => Ok((make_rho2(theta, eta).map_err(|e| config_err(e.to_string()))?, GameSettings::for_rho2())),
    }
}

/// Row `i` of a sampled run uses seed `seed + i`.
fn row_sampling(sampling: Sampling, i: usize) -> Sampling {
    match sampling {
        Sampling::Exact => Sampling::Exact,
        Sampling::Counts { per_setting, seed } => Sampling::Counts {
            per_setting,
            seed: seed.wrapping_add(i as u64),
        },
    }
}

struct Evaluation {
    transcript: GameTranscript,
    record: Option<GeometricRecord>,
    verdict: SteeringVerdict,
}

/// NCS success probabilities, NaN for an outcome that never occurs.
fn partial_ncs(rho: &TwoQubitState, s: &GameSettings) -> NcsProbabilities {
    let success = |o| {
        conditional_state(rho, s.ncs_direction(), o)
            .map(|(_, bob)| bob.overlap(s.expected_ncs(o)).clamp(0.0, 1.0))
            .unwrap_or(f64::NAN)
    };
    let (p_plus, p_minus) = (success(Outcome::Plus), success(Outcome::Minus));
    NcsProbabilities {
        p_plus,
        p_plus_err: 1.0 - p_plus,
        p_minus,
        p_minus_err: 1.0 - p_minus,
    }
}

/// Plays one grid point. A failing step keeps the exact gap and records why.
fn evaluate(rho: &TwoQubitState, s: &GameSettings, sampling: Sampling, noise: &NoiseOptions, opts: &DeltaPrimeOptions) -> Evaluation {
    match noisy_game(rho, s, sampling, noise) {
        Ok(g) => Evaluation {
            verdict: delta_prime_with(&g.record, opts),
            transcript: g.transcript,
            record: Some(g.record),
        },
        Err(e) => Evaluation {
            transcript: GameTranscript::from_parts(partial_ncs(rho, s), steering_gap(rho, s)),
            record: None,
            verdict: SteeringVerdict {
                value: None,
                delta_prime: None,
                steerable: false,
                witness: None,
                reason: e.reason_code(),
            },
        },
    }
}

#[derive(Serialize)]
struct GameRow {
    family: Family,
    theta: Option<f64>,
    eta: Option<f64>,
    p_plus: Option<f64>,
    p_plus_err_prob: Option<f64>,
    p_minus: Option<f64>,
    p_minus_err_prob: Option<f64>,
    w_max: Option<f64>,
    theta_b_star: Option<f64>,
    c_lhs: Option<f64>,
    delta: Option<f64>,
    delta_prime: Option<f64>,
    steerable: bool,
    seed: Option<u64>,
    counts: Option<u64>,
    reason: &'static str,
}

#[derive(Serialize)]
struct VerdictRow {
    family: Family,
    theta: Option<f64>,
    eta: Option<f64>,
    r1: Option<f64>,
    r2: Option<f64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    h3: Option<f64>,
    h4: Option<f64>,
    p_d: Option<f64>,
    err_r1: Option<f64>,
    err_r2: Option<f64>,
    err_h3: Option<f64>,
    err_h4: Option<f64>,
    err_p_d: Option<f64>,
    value: Option<f64>,
    delta_prime: Option<f64>,
    steerable: bool,
    lhs_witness: bool,
    seed: Option<u64>,
    counts: Option<u64>,
    reason: &'static str,
}

fn sampling_echo(s: Sampling) -> (Option<u64>, Option<u64>) {
    match s {
        Sampling::Exact => (None, None),
        Sampling::Counts { per_setting, seed } => (Some(seed), Some(per_setting)),
    }
}

struct RunConfig {
    grid: StateGrid,
    sampling: Sampling,
    noise: NoiseOptions,
    opts: DeltaPrimeOptions,
    format: Format,
    out: Option<PathBuf>,
}

fn resolve_run(args: &RunArgs) -> CliResult<RunConfig> {
    let file = ConfigFile::load(args.output.config.as_deref())?;
    let angle_error = pick(args.angle_error, file.get("angle-error")?).unwrap_or(0.0);
    if !(angle_error >= 0.0 && angle_error.is_finite()) {
        return Err(config_err(format!("angle-error = {angle_error} must be non-negative")));
    }
    Ok(RunConfig {
        grid: resolve_states(&args.state, &file)?,
        sampling: resolve_sampling(&args.sampling, &file)?,
        noise: NoiseOptions {
            pseudo_count_floor: args.pseudo_count_floor || file.flag("pseudo-count-floor")?,
            angle_error,
        },
        opts: DeltaPrimeOptions {
            oracle_grid: pick(args.oracle_grid, file.get("oracle-grid")?).unwrap_or(DEFAULT_ORACLE_GRID),
        },
        format: pick(args.output.format, file.value_enum("format")?).unwrap_or(Format::Json),
        out: pick(args.output.out.clone(), file.get("out")?),
    })
}

fn evaluate_grid(cfg: &RunConfig) -> CliResult<Vec<(f64, f64, Sampling, Evaluation)>> {
    let states = cfg
        .grid
        .points
        .iter()
        .map(|&(t, e)| state_for(cfg.grid.family, t, e))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(cfg
        .grid
        .points
        .par_iter()
        .zip(states.par_iter())
        .enumerate()
        .map(|(i, (&(theta, eta), (rho, s)))| {
            let sampling = row_sampling(cfg.sampling, i);
            (theta, eta, sampling, evaluate(rho, s, sampling, &cfg.noise, &cfg.opts))
        })
        .collect())
}

fn cmd_game(args: &RunArgs) -> CliResult<()> {
    let cfg = resolve_run(args)?;
    let rows: Vec<GameRow> = evaluate_grid(&cfg)?
        .into_iter()
        .map(|(theta, eta, sampling, ev)| {
            let t = &ev.transcript;
            let (seed, counts) = sampling_echo(sampling);
            GameRow {
                family: cfg.grid.family,
                theta: sig12(theta),
                eta: sig12(eta),
                p_plus: sig12(t.p_plus),
                p_plus_err_prob: sig12(t.p_plus_err),
                p_minus: sig12(t.p_minus),
                p_minus_err_prob: sig12(t.p_minus_err),
                w_max: sig12(t.w_max),
                theta_b_star: sig12(t.theta_b_star),
                c_lhs: sig12(t.c_lhs),
                delta: sig12(t.delta),
                delta_prime: ev.verdict.delta_prime.and_then(sig12),
                steerable: ev.verdict.steerable,
                seed,
                counts,
                reason: ev.verdict.reason,
            }
        })
        .collect();
    emit(&rows, cfg.format, cfg.out.as_deref())
}

fn cmd_delta_prime(args: &RunArgs) -> CliResult<()> {
    let cfg = resolve_run(args)?;
    let rows: Vec<VerdictRow> = evaluate_grid(&cfg)?
        .into_iter()
        .map(|(theta, eta, sampling, ev)| {
            let (seed, counts) = sampling_echo(sampling);
            let field = |f: fn(&GeometricRecord) -> f64| ev.record.as_ref().and_then(|r| sig12(f(r)));
            VerdictRow {
                family: cfg.grid.family,
                theta: sig12(theta),
                eta: sig12(eta),
                r1: field(|r| r.r1),
                r2: field(|r| r.r2),
                gamma1: field(|r| r.gamma1),
                gamma2: field(|r| r.gamma2),
                h3: field(|r| r.h3),
                h4: field(|r| r.h4),
                p_d: field(|r| r.p_d),
                err_r1: field(|r| r.err.r1),
                err_r2: field(|r| r.err.r2),
                err_h3: field(|r| r.err.h3),
                err_h4: field(|r| r.err.h4),
                err_p_d: field(|r| r.err.p_d),
                value: ev.verdict.value.and_then(sig12),
                delta_prime: ev.verdict.delta_prime.and_then(sig12),
                steerable: ev.verdict.steerable,
                lhs_witness: ev.verdict.witness.is_some(),
                seed,
                counts,
                reason: ev.verdict.reason,
            }
        })
        .collect();
    emit(&rows, cfg.format, cfg.out.as_deref())
}

#[derive(Serialize)]
struct CurveRow {
    family: Family,
    theta: Option<f64>,
    eta: Option<f64>,
    alice_outcome: Outcome,
    theta_b: Option<f64>,
    w: Option<f64>,
}

fn cmd_wcurve(args: &CurveArgs) -> CliResult<()> {
    let file = ConfigFile::load(args.output.config.as_deref())?;
    let grid = resolve_states(&args.state, &file)?;
    let points = pick(args.points, file.get("points")?).unwrap_or(361);
    if points == 0 {
        return Err(config_err("points must be at least 1"));
    }
    let mut rows = Vec::new();
    for &(theta, eta) in &grid.points {
        let (rho, s) = state_for(grid.family, theta, eta)?;
        for outcome in Outcome::BOTH {
            for k in 0..points {
                let theta_b = TAU * k as f64 / points as f64;
                rows.push(CurveRow {
                    family: grid.family,
                    theta: sig12(theta),
                    eta: sig12(eta),
                    alice_outcome: outcome,
                    theta_b: sig12(theta_b),
                    w: sig12(w_expectation(&rho, &s, outcome, theta_b, 0.0)),
                });
            }
        }
    }
    let format = pick(args.output.format, file.value_enum("format")?).unwrap_or(Format::Csv);
    emit(&rows, format, pick(args.output.out.clone(), file.get("out")?).as_deref())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    pub seed: u64,
    pub oracle_grid: usize,
    pub band: f64,
    pub compared: usize,
    pub agreements: usize,
    pub disagreements: usize,
    pub in_band: usize,
    pub agreement_rate: Option<f64>,
}

/// Random record whose point `B` lies in the unit disk by construction.
pub fn random_symmetrized_record(rng: &mut impl Rng) -> SymmetrizedRecord {
    loop {
        let p_d = rng.random_range(0.05..0.95);
        let h3: f64 = rng.random_range(-1.0..1.0);
        let h4: f64 = rng.random_range(-1.0..1.0);
        let gamma: f64 = rng.random_range(0.05..PI - 0.05);
        let z_b = p_d * h3 + (1.0 - p_d) * h4;
        let half = (1.0 - z_b * z_b).sqrt();
        let x_b = rng.random_range(-half..half);
        let r12 = x_b * gamma.sin() + z_b * gamma.cos();
        if r12 > 0.01 {
            return SymmetrizedRecord::new(r12, gamma, h3, h4, p_d);
        }
    }
}

/// Criterion sign versus oracle feasibility; sample `i` draws from stream `i`.
pub fn oracle_check(samples: usize, seed: u64, grid: usize, band: f64) -> OracleReport {
    let outcomes: Vec<Option<bool>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let sym = random_symmetrized_record(&mut stream_rng(seed, i as u64));
            let value = criterion_value(&sym).expect("sampled records are consistent").value;
            (value.abs() > band).then(|| (value > 0.0) == lhs_oracle(&sym, grid).is_none())
        })
        .collect();
    let compared = outcomes.iter().flatten().count();
    let agreements = outcomes.iter().flatten().filter(|&&ok| ok).count();
    OracleReport {
        samples,
        seed,
        oracle_grid: grid,
        band,
        compared,
        agreements,
        disagreements: compared - agreements,
        in_band: samples - compared,
        agreement_rate: (compared > 0).then(|| agreements as f64 / compared as f64),
    }
}

fn cmd_oracle_check(args: &OracleArgs) -> CliResult<()> {
    let file = ConfigFile::load(args.output.config.as_deref())?;
    let samples = pick(args.samples, file.get("samples")?).unwrap_or(500);
    let seed = pick(args.seed, file.get("seed")?).unwrap_or(0);
    let grid = pick(args.oracle_grid, file.get("oracle-grid")?).unwrap_or(DEFAULT_ORACLE_GRID);
    let band = pick(args.band, file.get("band")?).unwrap_or(1e-3);
    if grid < 2 {
        return Err(config_err("oracle-grid must be at least 2"));
    }
    json_only(args.output.format.or(file.value_enum("format")?))?;
    let report = oracle_check(samples, seed, grid, band);
    emit_one(&report, pick(args.output.out.clone(), file.get("out")?).as_deref())?;
    if report.disagreements > 0 {
        return Err(CliError::Inconsistent(format!(
            "{} of {} records disagree with the LHS oracle",
            report.disagreements, report.compared
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TomoReport {
    channel: String,
    counts: Option<u64>,
    seed: Option<u64>,
    converged: bool,
    iterations: usize,
    fidelity_to_ideal: Option<f64>,
    fidelity_to_true: Option<f64>,
    /// Rows of `[re, im]` pairs.
    chi: Vec<Vec<[Option<f64>; 2]>>,
}

fn parse_channel(text: &str) -> CliResult<(ChiMatrix, ChiMatrix)> {
    let text = text.trim().to_ascii_lowercase();
    let gate = |k| Ok((ChiMatrix::pauli_gate(k), ChiMatrix::pauli_gate(k)));
    match text.as_str() {
        "identity" | "id" => Ok((ChiMatrix::identity(), ChiMatrix::identity())),
        "x" => gate(1),
        "y" => gate(2),
        "z" => gate(3),
        _ => {
            let p = text
                .strip_prefix("depolarizing:")
                .ok_or_else(|| config_err(format!("unknown channel '{text}'")))?;
            let p: f64 = p.parse().map_err(|e| config_err(format!("depolarizing strength '{p}': {e}")))?;
            let chi = ChiMatrix::depolarizing(p).map_err(|e| config_err(e.to_string()))?;
            Ok((chi, ChiMatrix::identity()))
        }
    }
}

fn cmd_tomo(args: &TomoArgs) -> CliResult<()> {
    let file = ConfigFile::load(args.output.config.as_deref())?;
    let channel = pick(args.channel.clone(), file.raw("channel")).unwrap_or_else(|| "identity".into());
    let (truth, ideal) = parse_channel(&channel)?;
    let sampling = resolve_sampling(&args.sampling, &file)?;
    json_only(args.output.format.or(file.value_enum("format")?))?;
    let data = simulate_tomography(&truth, sampling).map_err(|e| config_err(e.to_string()))?;
    let rec = reconstruct_chi(&data).map_err(|e| CliError::Inconsistent(e.to_string()))?;
    let (seed, counts) = sampling_echo(sampling);
    let m = rec.chi.matrix();
    let report = TomoReport {
        channel,
        counts,
        seed,
        converged: rec.converged,
        iterations: rec.iterations,
        fidelity_to_ideal: sig12(process_fidelity(&rec.chi, &ideal)),
        fidelity_to_true: sig12(process_fidelity(&rec.chi, &truth)),
        chi: (0..4).map(|i| (0..4).map(|j| [sig12(m[(i, j)].re), sig12(m[(i, j)].im)]).collect()).collect(),
    };
    emit_one(&report, pick(args.output.out.clone(), file.get("out")?).as_deref())
}

fn json_only(format: Option<Format>) -> CliResult<()> {
    match format {
        Some(Format::Csv) => Err(config_err("this command only writes JSON")),
        _ => Ok(()),
    }
}

fn write_out(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_one<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_out(&text, out)
}

fn emit<T: Serialize>(rows: &[T], format: Format, out: Option<&Path>) -> CliResult<()> {
    match format {
        Format::Json => emit_one(&rows, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            write_out(&String::from_utf8(bytes).expect("csv output is UTF-8"), out)
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Game(a) => cmd_game(a),
        Command::Wcurve(a) => cmd_wcurve(a),
        Command::DeltaPrime(a) => cmd_delta_prime(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
        Command::Tomo(a) => cmd_tomo(a),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("avn-steer: {e}");
            e.exit_code()
        }
    }
}
