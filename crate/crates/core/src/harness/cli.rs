//! Command line entry point: `run`, `sweep` and `check`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use super::check::run_invariant_suite;
use super::{
    emit_csv, emit_plot, format_g17, run_on_instance, seed_output_path, Algo, ExperimentConfig,
    Instance, PlotOptions, RegretTrace,
};
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "aml",
    about = "Adversarial tabular MDP policy optimization benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write one CSV per seed.
    Run(RunArgs),
    /// Run a grid over T values (and algorithms), one CSV per cell and seed plus a summary.
    Sweep(SweepArgs),
    /// Run the invariant suite on a small instance.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "S")]
    states: Option<usize>,
    #[arg(long = "A")]
    actions: Option<usize>,
    #[arg(long = "H")]
    horizon: Option<usize>,
    /// Run seed of the first repetition.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_seeds: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long = "T")]
    episodes: Option<u64>,
    #[arg(long)]
    algo: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG regret plot here.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    loglog: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated episode counts.
    #[arg(long = "T", value_delimiter = ',', default_values_t = [1024u64, 4096, 16384])]
    episodes: Vec<u64>,
    /// Comma-separated algorithms; defaults to the config's algo.
    #[arg(long, value_delimiter = ',')]
    algos: Vec<String>,
    #[arg(long, default_value = "sweep")]
    out_dir: PathBuf,
    /// Write one SVG per T value comparing the algorithms.
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    loglog: bool,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long = "T", default_value_t = 256)]
    episodes: u64,
}

fn base_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut config = match &o.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = o.states {
        config.states = s;
    }
    if let Some(a) = o.actions {
        config.actions = a;
    }
    if let Some(h) = o.horizon {
        config.horizon = h;
    }
    if let Some(seed) = o.seed {
        config.run_seed = seed;
    }
    if let Some(n) = o.num_seeds {
        config.num_seeds = n;
    }
    Ok(config)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn write_traces(traces: &[RegretTrace], path: &Path, num_seeds: usize) -> Result<()> {
    ensure_parent(path)?;
    for trace in traces {
        emit_csv(trace, &seed_output_path(path, trace.seed, num_seeds))?;
    }
    Ok(())
}

fn print_summary(out: &mut impl Write, traces: &[RegretTrace]) {
    for tr in traces {
        let optimism = match tr.summary.optimism_held {
            Some(true) => " optimism=held",
            Some(false) => " optimism=violated",
            None => "",
        };
        let _ = writeln!(
            out,
            "{} seed={} T={} R_T={} epochs={} wall_time_s={:.3}{optimism}",
            tr.algo,
            tr.seed,
            tr.rows.len(),
            format_g17(tr.summary.final_regret),
            tr.summary.epochs,
            tr.summary.wall_time_s,
        );
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = base_config(&args.common)?;
    if let Some(t) = args.episodes {
        config.episodes = t;
    }
    if let Some(a) = &args.algo {
        config.algo = a.parse()?;
    }
    if let Some(out) = args.out {
        config.output_path = out;
    }
    config.validate()?;
    let instance = Instance::from_config(&config)?;
    let traces = run_on_instance(&config, &instance)?;
    write_traces(&traces, &config.output_path, config.num_seeds)?;
    if let Some(plot) = &args.plot {
        ensure_parent(plot)?;
        emit_plot(
            &traces,
            plot,
            PlotOptions {
                log_log: args.loglog,
            },
        )?;
    }
    print_summary(&mut std::io::stdout().lock(), &traces);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let base = base_config(&args.common)?;
    let algos: Vec<Algo> = if args.algos.is_empty() {
        vec![base.algo]
    } else {
        args.algos
            .iter()
            .map(|a| a.parse())
            .collect::<Result<_>>()?
    };
    if args.episodes.is_empty() {
        return Err(Error::invalid("sweep needs at least one T value"));
    }
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record([
        "algo",
        "T",
        "num_seeds",
        "mean_regret",
        "min_regret",
        "max_regret",
        "mean_epochs",
        "mean_wall_time_s",
    ])?;
    let stdout = &mut std::io::stdout().lock();
    for &t in &args.episodes {
        let mut per_t = Vec::new();
        let cell_base = ExperimentConfig {
            episodes: t,
            ..base.clone()
        };
        cell_base.validate()?;
        let instance = Instance::from_config(&cell_base)?;
        for &algo in &algos {
            let config = ExperimentConfig {
                algo,
                output_path: args.out_dir.join(format!("{algo}_T{t}.csv")),
                ..cell_base.clone()
            };
            let traces = run_on_instance(&config, &instance)?;
            for tr in &traces {
                let path = args
                    .out_dir
                    .join(format!("{algo}_T{t}_seed{}.csv", tr.seed));
                emit_csv(tr, &path)?;
            }
            let n = traces.len() as f64;
            let regrets: Vec<f64> = traces.iter().map(|tr| tr.summary.final_regret).collect();
            summary.write_record([
                algo.to_string(),
                t.to_string(),
                traces.len().to_string(),
                format_g17(regrets.iter().sum::<f64>() / n),
                format_g17(regrets.iter().copied().fold(f64::INFINITY, f64::min)),
                format_g17(regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                format_g17(
                    traces
                        .iter()
                        .map(|tr| tr.summary.epochs as f64)
                        .sum::<f64>()
                        / n,
                ),
                format_g17(traces.iter().map(|tr| tr.summary.wall_time_s).sum::<f64>() / n),
            ])?;
            print_summary(stdout, &traces);
            per_t.extend(traces);
        }
        if args.plot {
            let path = args.out_dir.join(format!("regret_T{t}.svg"));
            emit_plot(
                &per_t,
                &path,
                PlotOptions {
                    log_log: args.loglog,
                },
            )?;
        }
    }
    let bytes = summary
        .into_inner()
        .map_err(|e| Error::invalid(format!("summary buffer: {e}")))?;
    let path = args.out_dir.join("summary.csv");
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn cmd_check(args: CheckArgs) -> Result<bool> {
    let mut config = base_config(&args.common)?;
    config.episodes = args.episodes;
    config.validate()?;
    let outcomes = run_invariant_suite(&config)?;
    let stdout = &mut std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "invariant suite: S={} A={} H={} T={} seed={}",
        config.states, config.actions, config.horizon, config.episodes, config.run_seed
    );
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        if o.detail.is_empty() {
            let _ = writeln!(stdout, "{status} {}", o.name);
        } else {
            let _ = writeln!(stdout, "{status} {}: {}", o.name, o.detail);
        }
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_INVALID,
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args).map(|()| true),
        Command::Sweep(args) => cmd_sweep(args).map(|()| true),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_INVARIANT,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
