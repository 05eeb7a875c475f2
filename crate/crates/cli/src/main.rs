use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use clustersim::config::eval;
use clustersim::{
    parse_config, run_simulation, run_sweep, write_results, RunResult, SimParams, SweepAxis,
    SweepSpec,
};

/// Cluster reliability simulator for a single large training job.
#[derive(Parser)]
#[command(name = "clustersim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration once and print the run summary.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one or two parameters and write summary and raw CSVs.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Parameter file (`key = expression` lines); defaults apply without it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed; overrides `base_seed` from the config.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Parameter to sweep; give twice for a two-way sweep.
    #[arg(long = "param", value_name = "KEY", required = true)]
    params: Vec<String>,
    /// Comma-separated values for the matching --param.
    #[arg(long = "values", value_name = "V1,V2,...", required = true, allow_hyphen_values = true)]
    values: Vec<String>,
    /// Replications per cell; defaults to `replications` from the config.
    #[arg(long, value_name = "N")]
    replications: Option<u32>,
    /// Summary CSV path; the raw sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Label recorded with the sweep.
    #[arg(long, default_value = "sweep")]
    name: String,
}

fn load_params(common: &Common) -> Result<SimParams> {
    let mut params = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config `{}`", path.display()))?;
            parse_config(&text).with_context(|| format!("in config `{}`", path.display()))?
        }
        None => SimParams::default(),
    };
    if let Some(seed) = common.seed {
        params.base_seed = seed;
    }
    Ok(params)
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| eval(v).map_err(|e| anyhow::anyhow!("bad sweep value `{}`: {}", v.trim(), e.message)))
        .collect()
}

fn render_run(params: &SimParams, run: &RunResult) -> String {
    let rows: [(&str, String); 15] = [
        ("seed", params.base_seed.to_string()),
        ("total_time", run.total_time.to_string()),
        ("failures_total", run.failures_total.to_string()),
        ("failures_random", run.failures_random.to_string()),
        ("failures_systematic", run.failures_systematic.to_string()),
        ("preemptions", run.preemptions.to_string()),
        ("preemption_cost", run.preemption_cost.to_string()),
        ("auto_repairs", run.auto_repairs.to_string()),
        ("manual_repairs", run.manual_repairs.to_string()),
        ("avg_run_duration", run.avg_run_duration.to_string()),
        ("stalls", run.stalls.to_string()),
        ("standby_swaps", run.standby_swaps.to_string()),
        ("host_selections", run.host_selections.to_string()),
        ("misdiagnoses", run.misdiagnoses.to_string()),
        ("removed_servers", run.removed_servers.to_string()),
    ];
    rows.iter().map(|(k, v)| format!("{k:<22}{v}\n")).collect()
}

fn sweep(args: &SweepArgs) -> Result<()> {
    if args.params.len() != args.values.len() {
        bail!("each --param needs exactly one --values");
    }
    if args.params.len() > 2 {
        bail!("at most two --param/--values pairs are supported");
    }
    let base = load_params(&args.common)?;
    let mut axes = args
        .params
        .iter()
        .zip(&args.values)
        .map(|(key, values)| Ok(SweepAxis::parse(key, parse_values(values)?)?))
        .collect::<Result<Vec<_>>>()?;
    let replications = args.replications.unwrap_or(base.replications);
    let primary = axes.remove(0);
    let spec = match axes.pop() {
        Some(secondary) => SweepSpec::two_way(&args.name, primary, secondary, replications, base.base_seed),
        None => SweepSpec::one_way(&args.name, primary, replications, base.base_seed),
    };
    let result = run_sweep(&spec, &base)?;
    write_results(&result, &args.out)?;
    eprintln!(
        "wrote {} cells to {} and {}",
        result.cells.len(),
        args.out.display(),
        clustersim::output::raw_path(Path::new(&args.out)).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common } => load_params(common).and_then(|params| {
            let run = run_simulation(&params, params.base_seed, 0)?;
            std::io::stdout().write_all(render_run(&params, &run).as_bytes())?;
            Ok(())
        }),
        Command::Sweep(args) => sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
