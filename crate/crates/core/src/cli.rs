//! The `pdmp` command-line frontend.
//!
//! Effective settings are resolved as command-line flags, then the TOML
//! file given by `--config`, then `PDMP_SEED` (seed only), then defaults.
//! The resolved [`RunConfig`] is embedded in every output.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime or model error,
//! 3 failed statistical validation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundStrategy;
use crate::engine::{simulate_path, SimulationConfig};
use crate::error::PdmpError;
use crate::experiments::{
    compare_first_jump_laws, compare_with_oracle, estimate_acceptance, spiking_times, state_along_path,
    validate_cox, validate_poisson_thinning, HhKind, SpikingReport,
};
use crate::hh::{ChannelModel, HHParams, SubunitModel};
use crate::model::{HybridState, PdmpModel, PulseCurrent};
use crate::report::{
    emit_report, stats_summary, LabeledAcceptance, Metadata, OutputFormat, Tabular, TrajectoryRow, ValidationCheck,
};
use crate::testmodels::{ClockModel, ConstantRateModel, RateProfile};

pub const SEED_ENV: &str = "PDMP_SEED";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_EPSILONS: [f64; 6] = [0.5, 0.1, 0.05, 0.02, 0.01, 0.005];
/// Significance level of every hypothesis test run by `validate`.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] PdmpError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{failed} of {total} validation checks failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(PdmpError::InvalidArgument { .. }) => 1,
            CliError::Runtime(_) | CliError::Io { .. } => 2,
            CliError::ValidationFailed { .. } => 3,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Subunit,
    Channel,
    PoissonTest,
    ConstantTest,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Subunit => "subunit",
            ModelKind::Channel => "channel",
            ModelKind::PoissonTest => "poisson-test",
            ModelKind::ConstantTest => "constant-test",
        }
    }

    fn is_hh(self) -> bool {
        matches!(self, ModelKind::Subunit | ModelKind::Channel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Global,
    Local,
    OptimalP,
    OptimalQ,
    OptimalQAdaptive,
}

impl BoundKind {
    fn needs_epsilon(self) -> bool {
        matches!(self, BoundKind::OptimalP | BoundKind::OptimalQ)
    }

    fn with_epsilon(self, epsilon: f64) -> BoundStrategy {
        match self {
            BoundKind::Global => BoundStrategy::Global,
            BoundKind::Local => BoundStrategy::Local,
            BoundKind::OptimalP => BoundStrategy::OptimalP { epsilon },
            BoundKind::OptimalQ => BoundStrategy::OptimalQ { epsilon },
            BoundKind::OptimalQAdaptive => BoundStrategy::OptimalQAdaptive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Simulate,
    CompareBounds,
    SweepEpsilon,
    SpikingTimes,
    Validate,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::CompareBounds => "compare-bounds",
            CommandKind::SweepEpsilon => "sweep-epsilon",
            CommandKind::SpikingTimes => "spiking-times",
            CommandKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pdmp", version, about = "Thinning simulation of piecewise deterministic Markov processes")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and dump its segments.
    Simulate(Flags),
    /// Acceptance rates of several bound strategies.
    CompareBounds(Flags),
    /// Acceptance rates of an optimal bound over a list of epsilons.
    SweepEpsilon(Flags),
    /// Spiking-time statistics for a list of channel counts.
    SpikingTimes(Flags),
    /// Statistical oracle suite.
    Validate(Flags),
}

impl Command {
    fn split(&self) -> (CommandKind, &Flags) {
        match self {
            Command::Simulate(f) => (CommandKind::Simulate, f),
            Command::CompareBounds(f) => (CommandKind::CompareBounds, f),
            Command::SweepEpsilon(f) => (CommandKind::SweepEpsilon, f),
            Command::SpikingTimes(f) => (CommandKind::SpikingTimes, f),
            Command::Validate(f) => (CommandKind::Validate, f),
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Channel counts, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n_chan: Vec<u32>,
    /// Bound strategies, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1..)]
    pub bound: Vec<BoundKind>,
    /// Partition widths (ms) for optimal-p / optimal-q, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub epsilon: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// Input current `K,t1,t2`: amplitude K on [t1, t2].
    #[arg(long, value_parser = parse_pulse, value_name = "K,T1,T2", allow_hyphen_values = true)]
    pub pulse: Option<[f64; 3]>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Intersect HH flow bounds with the invariant voltage region.
    #[arg(long)]
    pub clamp_invariant: bool,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pulse(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected K,t1,t2, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Contents of a `--config` TOML file.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelKind>,
    pub n_chan: Option<OneOrMany<u32>>,
    pub bound: Option<OneOrMany<BoundKind>>,
    pub epsilon: Option<OneOrMany<f64>>,
    pub horizon: Option<f64>,
    pub pulse: Option<[f64; 3]>,
    pub threshold: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub clamp_invariant: Option<bool>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| usage(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    /// `None` only for `validate`, which then runs every oracle.
    pub model: Option<ModelKind>,
    pub n_chan: Vec<u32>,
    pub strategies: Vec<BoundStrategy>,
    pub horizon: f64,
    pub pulse: PulseCurrent,
    pub threshold: f64,
    pub trials: u64,
    pub seed: u64,
    pub clamp_invariant: bool,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn model(&self) -> ModelKind {
        self.model.unwrap_or(ModelKind::Subunit)
    }

    fn hh_params(&self, n: u32) -> HHParams {
        HHParams::standard(n).with_pulse(self.pulse).with_clamp(self.clamp_invariant)
    }
}

/// Parse arguments, read the config file and the seed variable, and
/// resolve the effective configuration.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| usage(e.to_string()))?;
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let (kind, flags) = cli.command.split();
    resolve(kind, flags, &file, env_seed.as_deref())
}

/// Merge flags over the file over the environment over defaults.
pub fn resolve(kind: CommandKind, flags: &Flags, file: &FileConfig, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
    let model = flags.model.or(file.model);
    let model = match kind {
        CommandKind::Validate => model,
        _ => Some(model.unwrap_or(ModelKind::Subunit)),
    };
    let n_chan: Option<Vec<u32>> = pick_list(&flags.n_chan, &file.n_chan);
    let bounds: Option<Vec<BoundKind>> = pick_list(&flags.bound, &file.bound);
    let epsilons: Option<Vec<f64>> = pick_list(&flags.epsilon, &file.epsilon);

    let env_seed = env_seed
        .map(|s| s.trim().parse::<u64>().map_err(|_| usage(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))))
        .transpose()?;
    let seed = flags.seed.or(file.seed).or(env_seed).unwrap_or(DEFAULT_SEED);
    let [k, t1, t2] = flags.pulse.or(file.pulse).unwrap_or([30.0, 1.0, 2.0]);
    let pulse = PulseCurrent::new(k, t1, t2).map_err(|e| usage(format!("--pulse: {e}")))?;

    let model_is_hh = model.is_none_or(ModelKind::is_hh);
    if !model_is_hh && n_chan.is_some() {
        return Err(usage("--n-chan only applies to the subunit and channel models"));
    }
    let n_chan = n_chan.unwrap_or_else(|| vec![30]);
    if n_chan.is_empty() || n_chan.contains(&0) {
        return Err(usage("--n-chan: channel counts must be >= 1"));
    }

    let strategies = resolve_strategies(kind, bounds, epsilons)?;
    let cfg = RunConfig {
        command: kind,
        model,
        n_chan,
        strategies,
        horizon: flags.horizon.or(file.horizon).unwrap_or(10.0),
        pulse,
        threshold: flags.threshold.or(file.threshold).unwrap_or(60.0),
        trials: flags.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
        seed,
        clamp_invariant: flags.clamp_invariant || file.clamp_invariant.unwrap_or(false),
        format: flags.format.or(file.format).unwrap_or_default(),
        out: flags.out.clone().or_else(|| file.out.clone()),
    };
    validate_config(&cfg)?;
    Ok(cfg)
}

fn pick_list<T: Clone>(flag: &[T], file: &Option<OneOrMany<T>>) -> Option<Vec<T>> {
    if !flag.is_empty() {
        Some(flag.to_vec())
    } else {
        file.clone().map(OneOrMany::into_vec)
    }
}

fn resolve_strategies(
    kind: CommandKind,
    bounds: Option<Vec<BoundKind>>,
    epsilons: Option<Vec<f64>>,
) -> Result<Vec<BoundStrategy>, CliError> {
    if let Some(e) = epsilons.as_ref().and_then(|v| v.iter().find(|e| !(**e > 0.0 && e.is_finite()))) {
        return Err(usage(format!("--epsilon: {e} is not a finite positive width")));
    }
    let bounds = match (kind, bounds) {
        (_, Some(b)) if b.is_empty() => return Err(usage("--bound: empty list")),
        (_, Some(b)) => b,
        (CommandKind::CompareBounds, None) => vec![BoundKind::Global, BoundKind::Local, BoundKind::OptimalQAdaptive],
        (CommandKind::SweepEpsilon, None) => vec![BoundKind::OptimalP],
        (_, None) => vec![BoundKind::OptimalQAdaptive],
    };
    let any_eps = bounds.iter().any(|b| b.needs_epsilon());
    if kind == CommandKind::SweepEpsilon && !bounds.iter().all(|b| b.needs_epsilon()) {
        return Err(usage("sweep-epsilon takes --bound optimal-p or optimal-q"));
    }
    if epsilons.is_some() && !any_eps {
        return Err(usage("--epsilon conflicts with bounds that take no epsilon"));
    }
    let epsilons = match epsilons {
        Some(e) => e,
        None if kind == CommandKind::SweepEpsilon => DEFAULT_EPSILONS.to_vec(),
        None if any_eps => return Err(usage("--bound optimal-p / optimal-q needs --epsilon")),
        None => Vec::new(),
    };
    let mut out = Vec::new();
    for b in bounds {
        if b.needs_epsilon() {
            out.extend(epsilons.iter().map(|&e| b.with_epsilon(e)));
        } else {
            out.push(b.with_epsilon(f64::NAN));
        }
    }
    Ok(out)
}

fn validate_config(cfg: &RunConfig) -> Result<(), CliError> {
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(usage(format!("--horizon: {} is not a finite positive time", cfg.horizon)));
    }
    if !cfg.threshold.is_finite() {
        return Err(usage("--threshold must be finite"));
    }
    let monte_carlo = cfg.command != CommandKind::Simulate;
    if monte_carlo && cfg.trials < 100 {
        return Err(usage(format!("--trials: need at least 100, got {}", cfg.trials)));
    }
    if cfg.command == CommandKind::Simulate && (cfg.n_chan.len() > 1 || cfg.strategies.len() > 1) {
        return Err(usage("simulate takes a single --n-chan and a single --bound"));
    }
    if cfg.command == CommandKind::SpikingTimes && !cfg.model().is_hh() {
        return Err(usage("spiking-times needs --model subunit or channel"));
    }
    if cfg.command == CommandKind::SpikingTimes && cfg.strategies.len() > 1 {
        return Err(usage("spiking-times takes a single --bound"));
    }
    if cfg.command == CommandKind::Validate && cfg.model.is_some_and(|m| !m.is_hh()) && cfg.n_chan != [30] {
        return Err(usage("--n-chan only applies to the subunit and channel models"));
    }
    Ok(())
}

/// Parse `args`, run the command and map the outcome to an exit code.
/// Messages go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Err(e) = Cli::try_parse_from(&args) {
        use clap::error::ErrorKind;
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
            _ => 1,
        };
        let _ = e.print();
        return code;
    }
    match parse_config(&args).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pdmp: {e}");
            e.exit_code()
        }
    }
}

/// Execute a resolved configuration and write its output.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let config = serde_json::to_value(cfg).map_err(|e| CliError::Runtime(PdmpError::Inconsistent(e.to_string())))?;
    let meta = Metadata::new(cfg.command.name(), cfg.seed, config);
    match cfg.command {
        CommandKind::Simulate => cmd_simulate(cfg, meta),
        CommandKind::CompareBounds | CommandKind::SweepEpsilon => {
            let rows = acceptance_rows(cfg)?;
            write(cfg, &meta, &rows)
        }
        CommandKind::SpikingTimes => {
            let rows = spiking_rows(cfg)?;
            write(cfg, &meta, &rows)
        }
        CommandKind::Validate => {
            let checks = validation_checks(cfg)?;
            write(cfg, &meta, &checks)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in checks.iter().filter(|c| !c.passed) {
                eprintln!("FAILED {}: statistic {} vs threshold {} ({})", c.name, c.statistic, c.threshold, c.detail);
            }
            if failed > 0 {
                return Err(CliError::ValidationFailed {
                    failed,
                    total: checks.len(),
                });
            }
            Ok(())
        }
    }
}

fn write<T: Tabular + Serialize>(cfg: &RunConfig, meta: &Metadata, rows: &[T]) -> Result<(), CliError> {
    emit_report(meta, rows, cfg.format, cfg.out.as_deref()).map_err(|source| CliError::Io {
        path: cfg.out.as_ref().map_or("<stdout>".into(), |p| p.display().to_string()),
        source,
    })
}

fn cmd_simulate(cfg: &RunConfig, mut meta: Metadata) -> Result<(), CliError> {
    fn go<P: PdmpModel>(
        m: &P,
        init: HybridState<P::Mode>,
        cfg: &RunConfig,
        meta: &mut Metadata,
    ) -> Result<Vec<TrajectoryRow>, CliError> {
        let sim = SimulationConfig::new(init, cfg.horizon, cfg.strategies[0]).with_stream(cfg.seed, 0);
        let (traj, stats) = simulate_path(m, &sim)?;
        if let Some(obj) = meta.config.as_object_mut() {
            obj.insert("path_stats".into(), stats_summary(&stats));
        }
        Ok(TrajectoryRow::from_trajectory(m, &traj))
    }
    let n = cfg.n_chan[0];
    let rows = match cfg.model() {
        ModelKind::Subunit => {
            let m = SubunitModel::new(cfg.hh_params(n))?;
            go(&m, m.initial_state(), cfg, &mut meta)?
        }
        ModelKind::Channel => {
            let m = ChannelModel::new(cfg.hh_params(n))?;
            go(&m, m.initial_state(), cfg, &mut meta)?
        }
        ModelKind::PoissonTest => {
            let m = poisson_model();
            go(&m, m.initial_state(), cfg, &mut meta)?
        }
        ModelKind::ConstantTest => {
            let m = constant_model()?;
            go(&m, m.initial_state(), cfg, &mut meta)?
        }
    };
    write(cfg, &meta, &rows)
}

fn poisson_model() -> ClockModel {
    ClockModel::new(RateProfile::SinSquared, Some(2.0))
}

fn constant_model() -> Result<ConstantRateModel, CliError> {
    Ok(ConstantRateModel::new(1.0, 3.0)?)
}

fn acceptance_rows(cfg: &RunConfig) -> Result<Vec<LabeledAcceptance>, CliError> {
    fn go<P: PdmpModel>(
        m: &P,
        init: HybridState<P::Mode>,
        label: &str,
        n_chan: Option<u32>,
        cfg: &RunConfig,
        out: &mut Vec<LabeledAcceptance>,
    ) -> Result<(), CliError> {
        for &s in &cfg.strategies {
            let clock = Instant::now();
            let report = estimate_acceptance(m, init, s, cfg.horizon, cfg.trials, cfg.seed)?;
            let per_path = clock.elapsed().as_secs_f64() / cfg.trials as f64;
            eprintln!(
                "{label} n_chan={} {s}: acceptance {:.4} ({:.1e}), {per_path:.3e} s per path",
                n_chan.map_or("-".into(), |n| n.to_string()),
                report.mean_acceptance,
                report.std_error
            );
            out.push(LabeledAcceptance {
                model: label.into(),
                n_chan,
                report,
            });
        }
        Ok(())
    }
    let mut out = Vec::new();
    let model = cfg.model();
    match model {
        ModelKind::Subunit | ModelKind::Channel => {
            for &n in &cfg.n_chan {
                let p = cfg.hh_params(n);
                if model == ModelKind::Subunit {
                    let m = SubunitModel::new(p)?;
                    go(&m, m.initial_state(), model.name(), Some(n), cfg, &mut out)?;
                } else {
                    let m = ChannelModel::new(p)?;
                    go(&m, m.initial_state(), model.name(), Some(n), cfg, &mut out)?;
                }
            }
        }
        ModelKind::PoissonTest => {
            let m = poisson_model();
            go(&m, m.initial_state(), model.name(), None, cfg, &mut out)?;
        }
        ModelKind::ConstantTest => {
            let m = constant_model()?;
            go(&m, m.initial_state(), model.name(), None, cfg, &mut out)?;
        }
    }
    Ok(out)
}

fn spiking_rows(cfg: &RunConfig) -> Result<Vec<SpikingReport>, CliError> {
    let strategy = cfg.strategies[0];
    cfg.n_chan
        .iter()
        .map(|&n| {
            let p = cfg.hh_params(n);
            let (kind, times) = match cfg.model() {
                ModelKind::Channel => {
                    let m = ChannelModel::new(p)?;
                    let t = spiking_times(&m, m.initial_state(), strategy, cfg.threshold, cfg.horizon, cfg.trials, cfg.seed)?;
                    (HhKind::Channel, t)
                }
                _ => {
                    let m = SubunitModel::new(p)?;
                    let t = spiking_times(&m, m.initial_state(), strategy, cfg.threshold, cfg.horizon, cfg.trials, cfg.seed)?;
                    (HhKind::Subunit, t)
                }
            };
            Ok(SpikingReport::from_times(kind, n, cfg.threshold, cfg.horizon, &times))
        })
        .collect()
}

fn validation_checks(cfg: &RunConfig) -> Result<Vec<ValidationCheck>, CliError> {
    let models = match cfg.model {
        Some(m) => vec![m],
        None => vec![ModelKind::PoissonTest, ModelKind::ConstantTest, ModelKind::Subunit],
    };
    let mut checks = Vec::new();
    for m in models {
        match m {
            ModelKind::PoissonTest => {
                let r = validate_poisson_thinning(cfg.horizon, 3.0, &[3, 4, 5, 6, 7, 8], cfg.trials, cfg.seed)?;
                checks.push(ValidationCheck::at_most(
                    "poisson acceptance |mean - exact|",
                    (r.mean_acceptance - r.expected_acceptance).abs(),
                    0.01,
                    format!("mean {} exact {} se {}", r.mean_acceptance, r.expected_acceptance, r.std_error),
                ));
                for b in &r.binomial {
                    checks.push(ValidationCheck::p_value(
                        format!("accepted count given {} proposals is binomial", b.n),
                        b.p_value,
                        ALPHA,
                        format!("{} paths, p = {}", b.samples, b.p_success),
                    ));
                }
            }
            ModelKind::ConstantTest => {
                let r = validate_cox(1.0, 3.0, cfg.horizon, cfg.trials, cfg.seed)?;
                checks.push(ValidationCheck::p_value(
                    "rejected count is Poisson",
                    r.p_value,
                    ALPHA,
                    format!("mean {} expected {}", r.mean_rejected, r.expected_rejected),
                ));
                checks.push(ValidationCheck::at_most(
                    "rejected counts on disjoint halves uncorrelated (|cov| / se)",
                    r.covariance.abs() / r.covariance_se.max(f64::MIN_POSITIVE),
                    3.0,
                    format!("cov {} se {}", r.covariance, r.covariance_se),
                ));
            }
            ModelKind::Subunit => {
                let m = SubunitModel::new(cfg.hh_params(cfg.n_chan[0]))?;
                hh_checks(&m, m.initial_state(), cfg, &mut checks)?;
            }
            ModelKind::Channel => {
                let m = ChannelModel::new(cfg.hh_params(cfg.n_chan[0]))?;
                hh_checks(&m, m.initial_state(), cfg, &mut checks)?;
            }
        }
    }
    Ok(checks)
}

fn hh_checks<P: PdmpModel>(
    m: &P,
    init: HybridState<P::Mode>,
    cfg: &RunConfig,
    checks: &mut Vec<ValidationCheck>,
) -> Result<(), CliError> {
    let ks = compare_first_jump_laws(m, init, BoundStrategy::Global, BoundStrategy::OptimalQAdaptive, cfg.trials, cfg.seed)?;
    checks.push(ValidationCheck::from_ks(&ks, ALPHA));
    // A state inside the stimulation window, where the rate varies along the flow.
    let at = 0.5 * (cfg.pulse.start + cfg.pulse.end).min(cfg.horizon);
    let frozen = state_along_path(m, init, at.max(1e-3), cfg.seed)?;
    let oracle_trials = cfg.trials.min(DEFAULT_TRIALS);
    let ks = compare_with_oracle(m, frozen, BoundStrategy::OptimalQAdaptive, oracle_trials, cfg.seed)?;
    checks.push(ValidationCheck::from_ks(&ks, ALPHA));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> (CommandKind, Flags) {
        let mut full = vec!["pdmp"];
        full.extend_from_slice(args);
        let c = Cli::try_parse_from(full).unwrap();
        let (k, _) = c.command.split();
        let flags = match c.command {
            Command::Simulate(f)
            | Command::CompareBounds(f)
            | Command::SweepEpsilon(f)
            | Command::SpikingTimes(f)
            | Command::Validate(f) => f,
        };
        (k, flags)
    }

    fn resolve_args(args: &[&str], file: &FileConfig, env: Option<&str>) -> Result<RunConfig, CliError> {
        let (k, f) = cli(args);
        resolve(k, &f, file, env)
    }

    #[test]
    fn spiking_defaults() {
        let cfg = resolve_args(&["spiking-times"], &FileConfig::default(), None).unwrap();
        assert_eq!(cfg.horizon, 10.0);
        assert_eq!(cfg.threshold, 60.0);
        assert_eq!(cfg.pulse, PulseCurrent::new(30.0, 1.0, 2.0).unwrap());
        assert_eq!(cfg.trials, DEFAULT_TRIALS);
        assert_eq!(cfg.n_chan, vec![30]);
        assert_eq!(cfg.strategies, vec![BoundStrategy::OptimalQAdaptive]);
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn zero_trials_is_rejected() {
        let e = resolve_args(&["compare-bounds", "--trials", "0"], &FileConfig::default(), None).unwrap_err();
        assert!(matches!(e, CliError::Usage(ref m) if m.contains("trials")), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn seed_precedence() {
        let file = FileConfig::from_toml("seed = 1").unwrap();
        assert_eq!(resolve_args(&["validate", "--seed", "2"], &file, Some("3")).unwrap().seed, 2);
        assert_eq!(resolve_args(&["validate"], &file, Some("3")).unwrap().seed, 1);
        assert_eq!(resolve_args(&["validate"], &FileConfig::default(), Some("3")).unwrap().seed, 3);
        assert!(resolve_args(&["validate"], &FileConfig::default(), Some("x")).is_err());
    }

    #[test]
    fn file_values_apply_under_flags() {
        let file = FileConfig::from_toml(
            "model = \"channel\"\nn_chan = [30, 300]\nbound = \"optimal-p\"\nepsilon = [0.1, 0.01]\nhorizon = 5.0\npulse = [20.0, 0.5, 1.5]\nformat = \"json\"",
        )
        .unwrap();
        let cfg = resolve_args(&["compare-bounds", "--horizon", "4"], &file, None).unwrap();
        assert_eq!(cfg.model, Some(ModelKind::Channel));
        assert_eq!(cfg.n_chan, vec![30, 300]);
        assert_eq!(cfg.horizon, 4.0);
        assert_eq!(cfg.pulse.amplitude, 20.0);
        assert_eq!(cfg.format, OutputFormat::Json);
        assert_eq!(
            cfg.strategies,
            vec![BoundStrategy::OptimalP { epsilon: 0.1 }, BoundStrategy::OptimalP { epsilon: 0.01 }]
        );
        let single = FileConfig::from_toml("n_chan = 300").unwrap();
        assert_eq!(resolve_args(&["compare-bounds"], &single, None).unwrap().n_chan, vec![300]);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(FileConfig::from_toml("sede = 3").is_err());
    }

    #[test]
    fn conflicting_flags_are_rejected() {
        let none = FileConfig::default();
        for args in [
            &["compare-bounds", "--bound", "global", "--epsilon", "0.1"][..],
            &["compare-bounds", "--bound", "optimal-p"][..],
            &["sweep-epsilon", "--bound", "local"][..],
            &["simulate", "--n-chan", "30,300"][..],
            &["spiking-times", "--model", "poisson-test"][..],
            &["compare-bounds", "--model", "constant-test", "--n-chan", "30"][..],
            &["compare-bounds", "--pulse", "30,2,1"][..],
            &["compare-bounds", "--epsilon", "-1", "--bound", "optimal-q"][..],
        ] {
            let e = resolve_args(args, &none, None).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{args:?}: {e}");
        }
    }

    #[test]
    fn sweep_defaults_to_optimal_p_grid() {
        let cfg = resolve_args(&["sweep-epsilon"], &FileConfig::default(), None).unwrap();
        assert_eq!(cfg.strategies.len(), DEFAULT_EPSILONS.len());
        assert!(matches!(cfg.strategies[0], BoundStrategy::OptimalP { epsilon } if epsilon == 0.5));
    }

    #[test]
    fn malformed_pulse_is_a_usage_error() {
        assert!(Cli::try_parse_from(["pdmp", "simulate", "--pulse", "30,1"]).is_err());
        assert_eq!(main_with_args(["pdmp", "simulate", "--pulse", "a,b,c"]), 1);
        assert_eq!(main_with_args(["pdmp", "frobnicate"]), 1);
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let run_to = || {
            let code = main_with_args([
                "pdmp",
                "compare-bounds",
                "--model",
                "constant-test",
                "--trials",
                "200",
                "--seed",
                "5",
                "--out",
                p.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
            std::fs::read(&p).unwrap()
        };
        let (a, b) = (run_to(), run_to());
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("# config={"));
        assert!(text.contains("\"seed\":5"));
    }

    #[test]
    fn simulate_writes_json_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.json");
        let code = main_with_args([
            "pdmp",
            "simulate",
            "--model",
            "subunit",
            "--n-chan",
            "5",
            "--horizon",
            "3",
            "--format",
            "json",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let doc: crate::report::ParsedDocument<TrajectoryRow> =
            crate::report::parse_json_report(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert!(doc.records.len() > 1);
        assert!(doc.records.windows(2).all(|w| w[0].t < w[1].t && w[0].segment_end == w[1].t));
        assert!(doc.metadata.config["path_stats"]["total_accepted"].as_u64().unwrap() as usize == doc.records.len() - 1);
    }

    #[test]
    fn unwritable_output_is_a_runtime_error() {
        let code = main_with_args([
            "pdmp",
            "compare-bounds",
            "--model",
            "constant-test",
            "--trials",
            "100",
            "--out",
            "/nonexistent-dir/x.csv",
        ]);
        assert_eq!(code, 2);
    }
}
