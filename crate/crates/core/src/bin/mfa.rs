use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfa_core::commands;
use mfa_core::config::{parse_matrix, parse_resolution, RunConfig};
use mfa_core::formats;
use mfa_core::Error;

/// Matrix Fisher attitude estimation: simulation, filtering and export.
#[derive(Parser, Debug)]
#[command(name = "mfa", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (JSON). Defaults to the case1 preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in configuration, used when --config is absent.
    #[arg(long, global = true, value_name = "NAME", value_parser = ["case1", "case2"])]
    preset: Option<String>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Grid resolution, e.g. 100x200.
    #[arg(long, global = true, value_name = "LATxLON")]
    resolution: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the pendulum and write truth and measurement files.
    Simulate,
    /// Run the filter on a measurement directory.
    Filter {
        /// Directory written by `simulate` (default: the output directory).
        #[arg(long, value_name = "DIR")]
        measurements: Option<PathBuf>,
    },
    /// Export marginal density grids of the three body axes.
    Gridexport {
        /// F as 9 comma-separated numbers, row-major.
        #[arg(long, value_name = "F", allow_hyphen_values = true, conflicts_with = "history")]
        f: Option<String>,
        /// Filter history CSV; exports the estimate at each of --times.
        #[arg(long, value_name = "PATH")]
        history: Option<PathBuf>,
        /// Comma-separated times (default: the configured grid times).
        #[arg(long, value_name = "T,..", value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Draw samples from M(F).
    Sample {
        /// F as 9 comma-separated numbers, row-major (default: the initial F).
        #[arg(long, value_name = "F", allow_hyphen_values = true)]
        f: Option<String>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Run the built-in invariant suites.
    Selftest,
}

fn load_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::case1(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(r) = &c.resolution {
        cfg.grid_resolution = parse_resolution(r)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    if let Command::Selftest = cli.command {
        let report = commands::selftest()?;
        print!("{}", report.render());
        return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
    }
    let cfg = load_config(&cli.common)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Simulate => {
            let m = commands::simulate(&cfg, &out)?;
            println!(
                "wrote {} truth, {} gyro and {} attitude rows to {} (seed {})",
                m.rows.truth,
                m.rows.gyro,
                m.rows.attitude,
                out.display(),
                m.seed
            );
        }
        Command::Filter { measurements } => {
            let dir = measurements.unwrap_or_else(|| out.clone());
            let (_, s) = commands::filter(&cfg, &dir, &out)?;
            let fmt = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
            println!(
                "{} records, {} updates; convergence time {} s, steady-state error {} deg",
                s.records,
                s.updates,
                fmt(s.convergence_time),
                fmt(s.steady_state_error_deg)
            );
        }
        Command::Gridexport { f, history, times } => {
            let metas = if let Some(path) = history {
                let h = formats::read_history(&path)?;
                let times = if times.is_empty() { cfg.grid_times.clone() } else { times };
                commands::gridexport_history(&h, &times, cfg.grid_resolution, cfg.sigma, &out)?
            } else {
                let f = match f {
                    Some(s) => parse_matrix(&s)?,
                    None => cfg.initial_f(),
                };
                vec![commands::gridexport_f(&f, cfg.grid_resolution, cfg.sigma, &out)?]
            };
            for m in metas {
                println!("wrote {} (log c = {:.6})", m.files.join(", "), m.log_c);
            }
        }
        Command::Sample { f, n } => {
            let f = match f {
                Some(s) => parse_matrix(&s)?,
                None => cfg.initial_f(),
            };
            let m = commands::sample(&f, n, cfg.seed, &out)?;
            println!(
                "wrote {n} samples to {} (acceptance {:.3}, mean angle from mode {:.3} deg)",
                out.join(formats::SAMPLES_FILE).display(),
                m.acceptance_rate,
                m.mean_error_deg
            );
        }
        Command::Selftest => unreachable!(),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
