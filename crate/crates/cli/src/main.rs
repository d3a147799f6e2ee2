//! Command-line runner: benchmark experiments, the classical Kraus oracle,
//! the property suite, and ε sweeps, with plot-ready TSV/JSON output.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical/validation failure,
//! 4 I/O failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unidyn_core::channels::{
    benchmark_initial_state, kraus_evolve_oracle, ChannelFamily, DensityMatrix,
};
use unidyn_core::experiment::{
    linspace, run_trace, Averaging, CircuitForm, ExperimentConfig, Mode, RichardsonSpec,
    DEFAULT_GAMMA, DEFAULT_SEED, DEFAULT_SHOTS,
};
use unidyn_core::linalg::ComplexMatrix;
use unidyn_core::trace::compare_to_oracle;
use unidyn_core::validation;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "UNIDYN_OUT_DIR";

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "unidyn",
    version,
    about = "Non-unitary operator dynamics via a four-unitary decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a population-dynamics experiment and compare to the Kraus oracle.
    Run(RunArgs),
    /// Emit the classical Kraus-oracle reference curves only.
    Oracle(OracleArgs),
    /// Run the numerical property suite.
    Validate(ValidateArgs),
    /// Sweep ε values and tabulate errors against the oracle.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Full4,
    Reduced2,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Json,
}

impl FormatArg {
    fn extension(self) -> &'static str {
        match self {
            FormatArg::Tsv => "tsv",
            FormatArg::Json => "json",
        }
    }
}

#[derive(Args, Clone)]
struct ChannelArgs {
    /// Channel preset: amp-damp-zero-T, amp-damp-infinite-T, amp-damp(beta=…)
    #[arg(long, default_value = "amp-damp-zero-T")]
    channel: String,
    /// Dimensionless inverse temperature; overrides --channel.
    #[arg(long, conflicts_with = "channel")]
    beta: Option<f64>,
    /// Decay rate, s⁻¹.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Initial density matrix: "benchmark" or a JSON matrix file.
    #[arg(long, default_value = "benchmark")]
    rho0: String,
    /// Time grid start:stop:points, in ns.
    #[arg(long, default_value = "0:3:13", value_name = "START:STOP:POINTS")]
    time_grid: String,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output file (defaults to $UNIDYN_OUT_DIR or the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
    format: FormatArg,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Comma-separated ε list (one value, or a decreasing list with --richardson).
    #[arg(long, default_value = "0.2")]
    epsilon: String,
    /// Richardson-extrapolate over the ε list.
    #[arg(long)]
    richardson: bool,
    /// Comma-separated even extrapolation orders (default 2,4,…).
    #[arg(long, requires = "richardson")]
    order_schedule: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Shots per circuit (sampled mode only).
    #[arg(long)]
    shots: Option<u64>,
    /// Sampling repetitions to average (sampled mode only).
    #[arg(long)]
    repetitions: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormArg::Reduced2)]
    circuit_form: FormArg,
    /// Rescale estimated populations to unit sum.
    #[arg(long)]
    renormalize: bool,
    /// Average the per-ε estimates over repetitions before extrapolating.
    #[arg(long, requires = "richardson")]
    average_then_extrapolate: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Comma-separated ε list to sweep.
    #[arg(long, default_value = "0.4,0.2,0.1")]
    epsilon: String,
    /// Append a row extrapolated over the (decreasing) ε list.
    #[arg(long)]
    richardson: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormArg::Reduced2)]
    circuit_form: FormArg,
    #[arg(long)]
    renormalize: bool,
    #[command(flatten)]
    output: OutputArgs,
}

enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Print a line to stdout, tolerating a closed pipe (e.g. `unidyn run | head`).
fn emit(text: impl AsRef<str>) {
    use std::io::Write;
    let mut out = std::io::stdout();
    let _ = out.write_all(text.as_ref().as_bytes());
    let _ = out.write_all(b"\n");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn parse_f64_list(text: &str, name: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("invalid {name} entry `{s}`")))
        })
        .collect()
}

fn parse_time_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!(
            "time grid must be START:STOP:POINTS in ns, got `{text}`"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| usage("invalid time-grid start"))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| usage("invalid time-grid stop"))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| usage("invalid time-grid point count"))?;
    let grid =
        linspace(start * 1e-9, stop * 1e-9, points).map_err(|e| usage(e.to_string()))?;
    Ok(grid)
}

fn resolve_channel(args: &ChannelArgs) -> Result<ChannelFamily, CliError> {
    match args.beta {
        Some(beta) => ChannelFamily::from_beta(beta).map_err(|e| usage(e.to_string())),
        None => ChannelFamily::parse(&args.channel).map_err(|e| usage(e.to_string())),
    }
}

fn resolve_rho0(spec: &str) -> Result<DensityMatrix, CliError> {
    if spec == "benchmark" {
        return Ok(benchmark_initial_state());
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| CliError::Io(format!("cannot read rho0 file `{spec}`: {e}")))?;
    let matrix: ComplexMatrix = serde_json::from_str(&text)
        .map_err(|e| usage(format!("cannot parse rho0 file `{spec}`: {e}")))?;
    DensityMatrix::new(matrix).map_err(|e| usage(e.to_string()))
}

fn output_path(args: &OutputArgs, default_name: &str) -> PathBuf {
    match &args.out {
        Some(path) => path.clone(),
        None => {
            let dir = std::env::var(OUT_DIR_ENV).unwrap_or_else(|_| ".".into());
            PathBuf::from(dir).join(format!("{default_name}.{}", args.format.extension()))
        }
    }
}

fn write_output(path: &PathBuf, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write `{}`: {e}", path.display())))?;
    emit(format!("wrote {}", path.display()));
    Ok(())
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mode = match args.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Sampled => Mode::Sampled,
    };
    if mode == Mode::Exact {
        if args.shots.is_some() {
            return Err(usage("--shots requires --mode sampled"));
        }
        if args.repetitions.is_some() {
            return Err(usage("--repetitions requires --mode sampled"));
        }
    }
    let epsilons = parse_f64_list(&args.epsilon, "epsilon")?;
    if epsilons.len() > 1 && !args.richardson {
        return Err(usage(
            "multiple ε values need --richardson (use `sweep` for independent runs)",
        ));
    }
    let richardson = if args.richardson {
        let orders = match &args.order_schedule {
            Some(text) => text
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u32>()
                        .map_err(|_| usage(format!("invalid order `{s}`")))
                })
                .collect::<Result<Vec<u32>, CliError>>()?,
            None => RichardsonSpec::standard(epsilons.len().saturating_sub(1)).orders,
        };
        Some(RichardsonSpec { orders })
    } else {
        None
    };

    let config = ExperimentConfig {
        channel: resolve_channel(&args.channel)?,
        gamma: args.channel.gamma,
        rho0: resolve_rho0(&args.channel.rho0)?,
        ensemble: None,
        time_grid: parse_time_grid(&args.channel.time_grid)?,
        epsilons,
        mode,
        shots: args.shots.unwrap_or(DEFAULT_SHOTS),
        repetitions: args.repetitions.unwrap_or(1),
        master_seed: args.seed,
        circuit_form: match args.circuit_form {
            FormArg::Full4 => CircuitForm::Full4,
            FormArg::Reduced2 => CircuitForm::Reduced2,
        },
        richardson,
        renormalize: args.renormalize,
        averaging: if args.average_then_extrapolate {
            Averaging::AverageThenExtrapolate
        } else {
            Averaging::ExtrapolateThenAverage
        },
        parallel: true,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = build_config(&args)?;
    let trace = run_trace(&config).map_err(|e| CliError::Numerical(e.to_string()))?;
    let metrics = compare_to_oracle(&trace);
    emit(format!("mae {:.6e}", metrics.mae));
    emit(format!("max_abs_err {:.6e}", metrics.max_abs_err));
    let contents = match args.output.format {
        FormatArg::Tsv => trace.to_tsv(),
        FormatArg::Json => trace
            .to_json()
            .map_err(|e| CliError::Numerical(e.to_string()))?,
    };
    write_output(&output_path(&args.output, "run-trace"), &contents)
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let family = resolve_channel(&args.channel)?;
    let rho0 = resolve_rho0(&args.channel.rho0)?;
    let grid = parse_time_grid(&args.channel.time_grid)?;

    let mut rows = Vec::new();
    for &t in &grid {
        let channel = family
            .kraus_at(args.channel.gamma, t)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let pops = kraus_evolve_oracle(&rho0, &channel)
            .map_err(|e| CliError::Numerical(e.to_string()))?
            .populations();
        rows.push((t, pops));
    }

    let contents = match args.output.format {
        FormatArg::Tsv => {
            let mut out = String::from("t_ns\tbasis_index\tpop_oracle\n");
            for (t, pops) in &rows {
                for (j, p) in pops.iter().enumerate() {
                    out.push_str(&format!("{:.16e}\t{}\t{:.16e}\n", t * 1e9, j, p));
                }
            }
            out
        }
        FormatArg::Json => {
            let doc: Vec<serde_json::Value> = rows
                .iter()
                .map(|(t, pops)| {
                    serde_json::json!({ "t_ns": t * 1e9, "populations": pops })
                })
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "channel": family.label(),
                "gamma": args.channel.gamma,
                "rows": doc,
            }))
            .map_err(|e| CliError::Numerical(e.to_string()))?
        }
    };
    write_output(&output_path(&args.output, "oracle-trace"), &contents)
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let reports = validation::run_all(args.seed);
    let mut failed = 0;
    for report in &reports {
        let status = if report.passed { "PASS" } else { "FAIL" };
        emit(format!("{status} {} - {}", report.name, report.detail));
        if !report.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} of {} properties failed",
            reports.len()
        )));
    }
    emit(format!("all {} properties passed", reports.len()));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let epsilons = parse_f64_list(&args.epsilon, "epsilon")?;
    if epsilons.is_empty() {
        return Err(usage("need at least one ε"));
    }
    let mode = match args.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Sampled => Mode::Sampled,
    };
    if mode == Mode::Exact && args.shots.is_some() {
        return Err(usage("--shots requires --mode sampled"));
    }

    let base = |eps_list: Vec<f64>, richardson: Option<RichardsonSpec>| -> Result<ExperimentConfig, CliError> {
        let config = ExperimentConfig {
            channel: resolve_channel(&args.channel)?,
            gamma: args.channel.gamma,
            rho0: resolve_rho0(&args.channel.rho0)?,
            ensemble: None,
            time_grid: parse_time_grid(&args.channel.time_grid)?,
            epsilons: eps_list,
            mode,
            shots: args.shots.unwrap_or(DEFAULT_SHOTS),
            repetitions: 1,
            master_seed: args.seed,
            circuit_form: match args.circuit_form {
                FormArg::Full4 => CircuitForm::Full4,
                FormArg::Reduced2 => CircuitForm::Reduced2,
            },
            richardson,
            renormalize: args.renormalize,
            averaging: Averaging::ExtrapolateThenAverage,
            parallel: true,
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        Ok(config)
    };

    let mut lines = vec![("epsilon".to_string(), None::<(f64, f64)>)];
    for &eps in &epsilons {
        let config = base(vec![eps], None)?;
        let trace = run_trace(&config).map_err(|e| CliError::Numerical(e.to_string()))?;
        let metrics = compare_to_oracle(&trace);
        lines.push((format!("{eps}"), Some((metrics.mae, metrics.max_abs_err))));
    }
    if args.richardson {
        if epsilons.len() < 2 {
            return Err(usage("--richardson needs at least two ε values"));
        }
        let spec = RichardsonSpec::standard(epsilons.len() - 1);
        let config = base(epsilons.clone(), Some(spec))?;
        let trace = run_trace(&config).map_err(|e| CliError::Numerical(e.to_string()))?;
        let metrics = compare_to_oracle(&trace);
        lines.push((
            format!("rich({})", config.epsilon_label()),
            Some((metrics.mae, metrics.max_abs_err)),
        ));
    }

    let mut table = String::from("epsilon\tmae\tmax_abs_err\n");
    for (label, metrics) in lines.iter().skip(1) {
        let (mae, max_abs) = metrics.unwrap();
        table.push_str(&format!("{label}\t{mae:.16e}\t{max_abs:.16e}\n"));
    }
    emit(table.trim_end());
    write_output(&output_path(&args.output, "sweep"), &table)
}
