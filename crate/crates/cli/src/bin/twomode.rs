use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use twomode::TrajectoryConfig;
use twomode_cli::report::{
    evolve_csv_line, evolve_header, run_evolve, steady_report, trajectory_report, EvolveOptions,
    InitialState,
};
use twomode_cli::verify::{run_verify, VerifyOptions};
use twomode_cli::{Layer, Preset, Settings, SweepSpec};

#[derive(Parser)]
#[command(
    name = "twomode",
    version,
    about = "Steady-state covariance and entropy production of a driven two-mode system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format (default depends on the subcommand).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parameter preset, applied beneath the config file.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Extra `key=value` setting; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Δ/√(Ωω), alternative to --delta.
    #[arg(long, global = true)]
    delta_ratio: Option<f64>,
    #[arg(long, global = true)]
    omega0: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Λ/ω with ω = ω₀ − 2Λ, alternative to --lambda.
    #[arg(long, global = true)]
    lambda_ratio: Option<f64>,
    /// Coupling g.
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Coupling G = 2g, alternative to --g.
    #[arg(long, global = true)]
    big_g: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    nbar1: Option<f64>,
    #[arg(long, global = true)]
    nbar2: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state covariance, stability and full entropy budget.
    Steady,
    /// Two-dimensional grid of budget quantities.
    Sweep {
        /// Axis parameter (delta_ratio, lambda_ratio, delta, lambda, g, big_g, kappa, gamma, nbar1, nbar2, omega0).
        #[arg(long)]
        x_axis: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        x_max: Option<f64>,
        #[arg(long)]
        x_points: Option<usize>,
        #[arg(long)]
        y_axis: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        y_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y_max: Option<f64>,
        #[arg(long)]
        y_points: Option<usize>,
        /// Comma-separated quantity list; an empty list writes only the header.
        #[arg(long)]
        quantities: Option<String>,
    },
    /// Time series of the covariance from an initial state.
    Evolve {
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        record_every: Option<usize>,
        #[arg(long, value_enum)]
        initial: Option<InitialState>,
    },
    /// Randomized property suite; exit code 0 iff every property passes.
    Verify {
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        trajectory_samples: Option<usize>,
    },
    /// Stochastic (Euler–Maruyama) estimate of the steady covariance.
    Trajectory {
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long)]
        sample_time: Option<f64>,
        #[arg(long)]
        n_trajectories: Option<usize>,
        #[arg(long)]
        batches: Option<usize>,
    },
}

fn flag<T: ToString>(s: &mut Settings, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        s.set(key, &v.to_string(), Layer::Flag);
    }
}

fn f64_bits(v: &Option<f64>) -> Option<String> {
    // `{:?}` keeps full precision for the round trip through the settings map.
    v.map(|x| format!("{x:?}"))
}

fn build_settings(cli: &Cli) -> Result<Settings> {
    let c = &cli.common;
    let mut s = Settings::new();
    if let Some(p) = c.preset {
        s.apply_preset(p);
    }
    if let Some(path) = &c.config {
        s.load_file(path)?;
    }
    for (key, v) in [
        ("delta", &c.delta),
        ("delta_ratio", &c.delta_ratio),
        ("omega0", &c.omega0),
        ("lambda", &c.lambda),
        ("lambda_ratio", &c.lambda_ratio),
        ("g", &c.g),
        ("big_g", &c.big_g),
        ("kappa", &c.kappa),
        ("gamma", &c.gamma),
        ("nbar1", &c.nbar1),
        ("nbar2", &c.nbar2),
    ] {
        flag(&mut s, key, &f64_bits(v));
    }
    flag(&mut s, "seed", &c.seed);
    for kv in &c.set {
        s.load_str(kv, Layer::Flag)
            .with_context(|| format!("--set {kv}"))?;
    }
    match &cli.command {
        Command::Steady => {}
        Command::Sweep {
            x_axis,
            x_min,
            x_max,
            x_points,
            y_axis,
            y_min,
            y_max,
            y_points,
            quantities,
        } => {
            flag(&mut s, "x_axis", x_axis);
            flag(&mut s, "x_min", &f64_bits(x_min));
            flag(&mut s, "x_max", &f64_bits(x_max));
            flag(&mut s, "x_points", x_points);
            flag(&mut s, "y_axis", y_axis);
            flag(&mut s, "y_min", &f64_bits(y_min));
            flag(&mut s, "y_max", &f64_bits(y_max));
            flag(&mut s, "y_points", y_points);
            flag(&mut s, "quantities", quantities);
        }
        Command::Evolve {
            t_final,
            dt,
            record_every,
            initial,
        } => {
            flag(&mut s, "t_final", &f64_bits(t_final));
            flag(&mut s, "dt", &f64_bits(dt));
            flag(&mut s, "record_every", record_every);
            if let Some(i) = initial {
                let name = i.to_possible_value().expect("no skipped variants");
                s.set("initial", name.get_name(), Layer::Flag);
            }
        }
        Command::Verify {
            n_samples,
            tol,
            trajectory_samples,
        } => {
            flag(&mut s, "n_samples", n_samples);
            flag(&mut s, "tol", &f64_bits(tol));
            flag(&mut s, "trajectory_samples", trajectory_samples);
        }
        Command::Trajectory {
            dt,
            burn_in,
            sample_time,
            n_trajectories,
            batches,
        } => {
            flag(&mut s, "dt", &f64_bits(dt));
            flag(&mut s, "burn_in", &f64_bits(burn_in));
            flag(&mut s, "sample_time", &f64_bits(sample_time));
            flag(&mut s, "n_trajectories", n_trajectories);
            flag(&mut s, "batches", batches);
        }
    }
    Ok(s)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Runs the command; `Ok(false)` means it completed but reports failure.
fn run(cli: &Cli) -> Result<bool> {
    let s = build_settings(cli)?;
    let format = cli.common.format;
    match &cli.command {
        Command::Steady => {
            let report = steady_report(&s.params()?)?;
            let mut out = open_out(&cli.common.out)?;
            match format.unwrap_or(Format::Json) {
                Format::Json => write_json(&mut out, &report)?,
                Format::Csv => report.write_csv(&mut out)?,
            }
            out.flush()?;
            if !report.checks.all_pass() {
                log::warn!("some cross-formula checks failed; see `checks`");
            }
            Ok(true)
        }
        Command::Sweep { .. } => {
            let spec = SweepSpec::from_settings(&s)?;
            let mut out = open_out(&cli.common.out)?;
            match format.unwrap_or(Format::Csv) {
                Format::Csv => spec.write_csv(&mut out)?,
                Format::Json => spec.write_json(&mut out)?,
            }
            out.flush()?;
            Ok(true)
        }
        Command::Evolve { .. } => {
            let params = s.params()?;
            let d = EvolveOptions::defaults_for(&params);
            let initial = match s.get("initial") {
                Some(name) => InitialState::from_str(name, true)
                    .map_err(|e| anyhow::anyhow!("initial: {e}"))?,
                None => d.initial,
            };
            let opts = EvolveOptions {
                t_final: s.f64("t_final")?.unwrap_or(d.t_final),
                dt: s.f64("dt")?.unwrap_or(d.dt),
                record_every: s.usize("record_every")?.unwrap_or(d.record_every),
                initial,
            };
            let mut out = open_out(&cli.common.out)?;
            let result = match format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    writeln!(out, "{}", evolve_header())?;
                    run_evolve(&params, &opts, |row| {
                        writeln!(out, "{}", evolve_csv_line(row))?;
                        Ok(())
                    })
                }
                Format::Json => {
                    let mut rows = Vec::new();
                    let r = run_evolve(&params, &opts, |row| {
                        rows.push(row.clone());
                        Ok(())
                    });
                    write_json(&mut out, &rows)?;
                    r
                }
            };
            out.flush()?;
            result.map(|_| true)
        }
        Command::Verify { .. } => {
            let d = VerifyOptions::default();
            let opts = VerifyOptions {
                n_samples: s.usize("n_samples")?.unwrap_or(d.n_samples),
                seed: s.u64("seed")?.unwrap_or(d.seed),
                tol: s.f64("tol")?.unwrap_or(d.tol),
                trajectory_samples: s
                    .usize("trajectory_samples")?
                    .unwrap_or(d.trajectory_samples),
            };
            let report = run_verify(&opts);
            let mut out = open_out(&cli.common.out)?;
            match format.unwrap_or(Format::Csv) {
                Format::Csv => report.write_csv(&mut out)?,
                Format::Json => write_json(&mut out, &report)?,
            }
            out.flush()?;
            Ok(report.all_pass())
        }
        Command::Trajectory { .. } => {
            let d = TrajectoryConfig::default();
            let cfg = TrajectoryConfig {
                dt: s.f64("dt")?.unwrap_or(d.dt),
                burn_in: s.f64("burn_in")?.unwrap_or(d.burn_in),
                sample_time: s.f64("sample_time")?.unwrap_or(d.sample_time),
                n_trajectories: s.usize("n_trajectories")?.unwrap_or(d.n_trajectories),
                seed: s.u64("seed")?.unwrap_or(d.seed),
                batches_per_trajectory: s.usize("batches")?.unwrap_or(d.batches_per_trajectory),
            };
            let report = trajectory_report(&s.params()?, &cfg)?;
            let mut out = open_out(&cli.common.out)?;
            match format.unwrap_or(Format::Json) {
                Format::Json => write_json(&mut out, &report)?,
                Format::Csv => report.write_csv(&mut out)?,
            }
            out.flush()?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
