use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use bidcraft::environments::{variation_for_alpha, BudgetRegime, EnvKind, EnvironmentSpec, Pattern};
use bidcraft::harness::{
    dp_minimax_oracle_exact, empirical_lower_bound, lemma_bound_exact, pacing_study, read_results_csv, run_episode,
    run_sweep, slope_reports, write_pacing_csv, write_results_csv, write_slopes_csv, HarnessError, LowerBoundInstance,
    PacingConfig, PolicyKind, PolicySpec, Ratio, SlopeMode, SweepConfig,
};

const SEED_VAR: &str = "BIDCRAFT_SEED";

#[derive(Parser)]
#[command(name = "bidcraft", version, about = "Repeated first-price auction simulator")]
struct Cli {
    /// Suppress progress output on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,

    /// More detail on standard error (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its regret trace.
    Simulate(SimulateArgs),
    /// Run a slope-experiment sweep and write the results CSV.
    Sweep(SweepArgs),
    /// Fit log-log regret slopes from a results CSV.
    Slopes(SlopesArgs),
    /// Check the minimax oracle against 1/2 - 1/(2H), optionally with empirical runs.
    Lowerbound(LowerboundArgs),
    /// Compare policies against budget-pacing opponents.
    Pacing(PacingArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with optional `policy`, `environment`, `alpha` and `output_path`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Policy name (hedge, restart_hedge, ar_prod, ar_omd, bobw, fixed, oracle).
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Environment kind (constant, exponential, linear, multi_segment,
    /// sinusoidal, lower_bound_vt, lower_bound_lt, budget_pacing).
    #[arg(long)]
    env: Option<String>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Sets the variation target to T^alpha / 4.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Variation target V_T; overrides --alpha.
    #[arg(long, allow_hyphen_values = true)]
    variation: Option<f64>,
    /// Switch target L_T for lower_bound_lt.
    #[arg(long)]
    switches: Option<usize>,
    /// Block pattern (multi_segment) or opponent value pattern (budget_pacing).
    #[arg(long)]
    pattern: Option<Pattern>,
    /// Opponent budget regime for budget_pacing (sufficient or insufficient).
    #[arg(long)]
    regime: Option<BudgetRegime>,
    /// Maximum block length as a fraction of the segment length.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Environment seed; falls back to the config, then BIDCRAFT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace CSV path [default: trace.csv].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Runs per (pattern, alpha, T).
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    workers: Option<usize>,
    /// Results CSV path [default: config output_path, else results.csv].
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Base seed for the replications.
    #[arg(long)]
    seed: Option<u64>,
    /// Write wall_ms as 0 so the output is byte-identical across executions.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    MeanThenLog,
    LogThenMean,
}

#[derive(Args)]
struct SlopesArgs {
    /// Results CSV written by `sweep`.
    results: PathBuf,
    /// Slopes CSV path [default: standard output].
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// How runs are aggregated before fitting.
    #[arg(long, value_enum, default_value = "mean-then-log")]
    mode: ModeArg,
}

#[derive(Args)]
struct LowerboundArgs {
    /// Horizon range for the oracle table, `a..b` (inclusive) or a single H.
    #[arg(long = "H", default_value = "2..10")]
    h: String,
    /// Also run the empirical lower-bound checks.
    #[arg(long)]
    empirical: bool,
    /// Policies for the empirical checks (comma separated) [default: hedge,restart_hedge,ar_prod,ar_omd,bobw].
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    /// Runs per empirical check.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Base seed for the empirical checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    workers: Option<usize>,
    /// Also write the oracle table as CSV.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RegimeArg {
    Sufficient,
    Insufficient,
    Both,
}

#[derive(Args)]
struct PacingArgs {
    /// Pacing config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Opponent budget regime.
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// Opponent value patterns (comma separated).
    #[arg(long, value_delimiter = ',')]
    pattern: Vec<Pattern>,
    /// Variation exponents (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
    /// Policies (comma separated).
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    /// Runs per (regime, pattern, alpha, policy).
    #[arg(long)]
    runs: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Number of pacing opponents.
    #[arg(long)]
    opponents: Option<usize>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    workers: Option<usize>,
    /// Summary CSV path.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid config field `{field}`: {reason}"))
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

struct Ui {
    quiet: bool,
    verbose: u8,
}

impl Ui {
    fn progress(&self, label: &str) -> impl Fn(usize, usize) + Sync + '_ {
        let label = label.to_owned();
        move |done, total| {
            if !self.quiet {
                eprint!("\r{label}: {done}/{total}");
                if done == total {
                    eprintln!();
                }
            }
        }
    }

    fn detail(&self, msg: impl FnOnce() -> String) {
        if self.verbose > 0 && !self.quiet {
            eprintln!("{}", msg());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ui = Ui {
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, &ui),
        Command::Sweep(a) => sweep(a, &ui),
        Command::Slopes(a) => slopes(a),
        Command::Lowerbound(a) => lowerbound(a, &ui),
        Command::Pacing(a) => pacing(a, &ui),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Parses `path` into `T`, also returning the raw JSON so callers can tell
/// which fields were present.
fn load_config<T: DeserializeOwned>(path: &Path) -> Result<(T, Value), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
    let parsed = serde_json::from_value(raw.clone())
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    Ok((parsed, raw))
}

/// Flag, then config, then `BIDCRAFT_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| config_error(SEED_VAR, format!("expected an unsigned integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match workers {
        Some(0) => Err(config_error("workers", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}"))),
        None => Ok(f()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn check_alpha(field: &str, alpha: f64) -> Result<(), CliError> {
    if alpha.is_finite() && (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(config_error(field, format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    policy: Option<PolicySpec>,
    environment: Option<EnvironmentSpec>,
    alpha: Option<f64>,
    output_path: Option<PathBuf>,
}

fn parse_env_kind(name: &str) -> Result<EnvKind, CliError> {
    serde_json::from_value(Value::String(name.to_owned()))
        .map_err(|_| config_error("env", format!("unknown environment `{name}`")))
}

fn simulate(args: SimulateArgs, ui: &Ui) -> Result<(), CliError> {
    let (config, raw) = match &args.config {
        Some(p) => load_config::<SimulateConfig>(p)?,
        None => (SimulateConfig::default(), Value::Null),
    };
    let config_seed = raw
        .pointer("/environment/seed")
        .and_then(Value::as_u64);
    let seed = resolve_seed(args.seed, config_seed)?;

    let policy = match (args.policy, config.policy) {
        (Some(kind), _) => PolicySpec::new(kind),
        (None, Some(spec)) => spec,
        (None, None) => PolicySpec::new(PolicyKind::ArProd),
    };
    policy.validate()?;

    let mut env = config
        .environment
        .unwrap_or_else(|| EnvironmentSpec::new(EnvKind::Sinusoidal, 1000, seed));
    env.seed = seed;
    if let Some(name) = &args.env {
        env.kind = parse_env_kind(name)?;
    }
    if let Some(t) = args.horizon {
        env.horizon = t;
    }
    let from_config = args.config.is_some() && raw.pointer("/environment/variation_target").is_some();
    let alpha = match (args.alpha, config.alpha) {
        (Some(a), _) | (None, Some(a)) => Some(a),
        (None, None) if !from_config => Some(0.5),
        _ => None,
    };
    if let Some(a) = alpha {
        check_alpha("alpha", a)?;
        env.variation_target = variation_for_alpha(env.horizon, a);
    }
    if let Some(v) = args.variation {
        env.variation_target = v;
    }
    if let Some(l) = args.switches {
        env.switch_target = l;
    }
    if let Some(b) = args.beta {
        env.beta = b;
    }
    if let Some(p) = args.pattern {
        env.pattern = Some(p);
    }
    if matches!(env.kind, EnvKind::MultiSegment | EnvKind::BudgetPacing) && env.pattern.is_none() {
        env.pattern = Some(Pattern::Constant);
    }
    if let Some(regime) = args.regime {
        if env.kind != EnvKind::BudgetPacing {
            return Err(config_error("regime", "only applies to --env budget_pacing"));
        }
        env.budgets = vec![regime.budget(env.horizon); env.opponents];
    }
    env.validate().map_err(HarnessError::from)?;
    ui.detail(|| format!("environment: {}", serde_json::to_string(&env).unwrap_or_default()));

    let trace = run_episode(&policy, &env)?;
    let output = args
        .output
        .or(config.output_path)
        .unwrap_or_else(|| PathBuf::from("trace.csv"));
    trace.save_csv(&output)?;
    ui.detail(|| format!("wrote {}", output.display()));
    println!(
        "final_regret={} V_T={} L_T={}",
        trace.final_regret_expected(),
        trace.measured_variation(),
        trace.measured_switches()
    );
    Ok(())
}

fn sweep(args: SweepArgs, ui: &Ui) -> Result<(), CliError> {
    let (mut config, raw) = load_config::<SweepConfig>(&args.config)?;
    config.base_seed = resolve_seed(args.seed, raw.get("base_seed").and_then(Value::as_u64))?;
    if let Some(r) = args.runs {
        config.runs = r;
    }
    if args.no_timing {
        config.timing = false;
    }
    if args.workers == Some(0) {
        return Err(config_error("workers", "must be at least 1"));
    }
    config.validate()?;
    let output = args
        .output
        .or_else(|| config.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let progress = ui.progress("sweep");
    let outcome = run_sweep(&config, args.workers, Some(&progress))?;
    write_results_csv(&outcome.rows, create(&output)?)?;
    println!("rows={} output={}", outcome.rows.len(), output.display());
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        for f in &outcome.failures {
            eprintln!("failed: {f}");
        }
        Err(CliError::Runtime(format!("{} sweep cells failed", outcome.failures.len())))
    }
}

fn slopes(args: SlopesArgs) -> Result<(), CliError> {
    let file = File::open(&args.results)
        .map_err(|e| CliError::Config(format!("cannot read results {}: {e}", args.results.display())))?;
    let rows = read_results_csv(file)?;
    let mode = match args.mode {
        ModeArg::MeanThenLog => SlopeMode::MeanThenLog,
        ModeArg::LogThenMean => SlopeMode::LogThenMean,
    };
    let fits = slope_reports(&rows, mode);
    match &args.output {
        Some(path) => write_slopes_csv(&fits, create(path)?)?,
        None => write_slopes_csv(&fits, io::stdout().lock())?,
    }
    Ok(())
}

fn parse_h_range(spec: &str) -> Result<(usize, usize), CliError> {
    let bad = || config_error("H", format!("expected `a..b` or a single horizon, got `{spec}`"));
    let (lo, hi) = match spec.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let h = spec.trim().parse().map_err(|_| bad())?;
            (h, h)
        }
    };
    if lo < 2 || hi < lo {
        return Err(config_error("H", format!("need 2 <= a <= b, got {lo}..{hi}")));
    }
    Ok((lo, hi))
}

fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn lowerbound(args: LowerboundArgs, ui: &Ui) -> Result<(), CliError> {
    let (lo, hi) = parse_h_range(&args.h)?;
    if args.runs < 2 {
        return Err(config_error("runs", "need at least 2 runs"));
    }
    let seed = resolve_seed(args.seed, None)?;
    let mut failed = 0;
    let mut table = Vec::new();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let w = |e: io::Error| CliError::Runtime(e.to_string());
    writeln!(out, "{:>4}  {:>20}  {:>20}  pass", "H", "oracle", "bound").map_err(w)?;
    for h in lo..=hi {
        let value = dp_minimax_oracle_exact(h, Ratio::new(1, h as i128))?;
        let bound = lemma_bound_exact(h);
        let pass = value >= bound;
        failed += usize::from(!pass);
        let (value, bound) = (ratio_to_f64(value), ratio_to_f64(bound));
        writeln!(out, "{h:>4}  {value:>20.15}  {bound:>20.15}  {pass}").map_err(w)?;
        table.push((h, value, bound, pass));
    }
    if let Some(path) = &args.output {
        let mut f = create(path)?;
        let w = |e: io::Error| io_error(path, e);
        writeln!(f, "H,oracle,bound,pass").map_err(w)?;
        for (h, v, b, p) in &table {
            writeln!(f, "{h},{v},{b},{p}").map_err(w)?;
        }
        f.flush().map_err(w)?;
    }

    if args.empirical {
        let policies: Vec<PolicySpec> = if args.policy.is_empty() {
            [
                PolicyKind::Hedge,
                PolicyKind::RestartHedge,
                PolicyKind::ArProd,
                PolicyKind::ArOmd,
                PolicyKind::Bobw,
            ]
            .into_iter()
            .map(PolicySpec::new)
            .collect()
        } else {
            args.policy.iter().copied().map(PolicySpec::new).collect()
        };
        if policies.iter().any(|p| p.name == PolicyKind::Oracle) {
            return Err(config_error("policy", "the oracle knows the rival bid and has no lower bound"));
        }
        let instances = [
            LowerBoundInstance::Variation {
                horizon: 10_000,
                variation: 100.0,
            },
            LowerBoundInstance::Switching {
                horizon: 9_000,
                switches: 300,
            },
        ];
        writeln!(out).map_err(w)?;
        writeln!(out, "{:<14} {:<10} {:>10} {:>10} {:>10}  pass", "policy", "instance", "mean", "3se", "bound")
            .map_err(w)?;
        for instance in instances {
            let name = match instance {
                LowerBoundInstance::Variation { .. } => "variation",
                LowerBoundInstance::Switching { .. } => "switching",
            };
            for policy in &policies {
                ui.detail(|| format!("running {} on {name}", policy.label()));
                let check = with_workers(args.workers, || empirical_lower_bound(policy, instance, args.runs, seed))??;
                failed += usize::from(!check.passed);
                writeln!(
                    out,
                    "{:<14} {:<10} {:>10.3} {:>10.3} {:>10.3}  {}",
                    check.policy, name, check.mean, check.slack, check.bound, check.passed
                )
                .map_err(w)?;
            }
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{failed} lower-bound checks failed")))
    }
}

fn pacing(args: PacingArgs, ui: &Ui) -> Result<(), CliError> {
    let (mut config, raw) = match &args.config {
        Some(p) => load_config::<PacingConfig>(p)?,
        None => (PacingConfig::default(), Value::Null),
    };
    config.base_seed = resolve_seed(args.seed, raw.get("base_seed").and_then(Value::as_u64))?;
    match args.regime {
        Some(RegimeArg::Sufficient) => config.regimes = vec![BudgetRegime::Sufficient],
        Some(RegimeArg::Insufficient) => config.regimes = vec![BudgetRegime::Insufficient],
        Some(RegimeArg::Both) => config.regimes = vec![BudgetRegime::Insufficient, BudgetRegime::Sufficient],
        None => {}
    }
    if !args.pattern.is_empty() {
        config.patterns = args.pattern.clone();
    }
    if !args.alpha.is_empty() {
        for (i, &a) in args.alpha.iter().enumerate() {
            check_alpha(&format!("alpha[{i}]"), a)?;
        }
        config.alphas = args.alpha.clone();
    }
    if !args.policy.is_empty() {
        config.policies = args.policy.iter().copied().map(PolicySpec::new).collect();
    }
    if let Some(r) = args.runs {
        config.runs = r;
    }
    if let Some(t) = args.horizon {
        config.horizon = t;
    }
    if let Some(n) = args.opponents {
        config.opponents = n;
    }
    config.validate()?;
    let progress = ui.progress("pacing");
    let rows = with_workers(args.workers, || pacing_study(&config, Some(&progress)))??;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let w = |e: io::Error| CliError::Runtime(e.to_string());
    writeln!(
        out,
        "{:<13} {:<12} {:>5} {:<14} {:>14} {:>10}",
        "regime", "pattern", "alpha", "policy", "mean_reward", "std"
    )
    .map_err(w)?;
    for r in &rows {
        writeln!(
            out,
            "{:<13} {:<12} {:>5} {:<14} {:>14.3} {:>10.3}",
            r.regime.as_str(),
            r.pattern.as_str(),
            r.alpha,
            r.policy,
            r.mean_reward,
            r.std
        )
        .map_err(w)?;
    }
    if let Some(path) = args.output.as_ref().or(config.output_path.as_ref()) {
        write_pacing_csv(&rows, create(path)?)?;
    }
    if let Some(r) = rows.iter().find(|r| !r.budget_conserved) {
        return Err(CliError::Runtime(format!(
            "budget conservation violated for {} in the {} regime",
            r.policy,
            r.regime.as_str()
        )));
    }
    Ok(())
}
