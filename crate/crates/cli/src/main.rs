use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tonks_core::analysis::CollapseRegime;

use tonks_cli::{checks, output, postprocess, runner, scan, RunConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "tonks", version, about = "Kicked Tonks-Girardeau gas at finite temperature")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Keep finished scan points found in the output directory.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and write its time series and snapshots.
    Run { config: PathBuf },
    /// Sweep the `[scan]` grid of kick strengths and anisotropies.
    PhaseScan { config: PathBuf },
    /// Compare the fast pipeline with the exact oracle (n_sites ≤ 10).
    OracleCheck { config: PathBuf },
    /// Scaling collapse of the snapshots in a run directory.
    Collapse {
        dir: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum)]
        regime: Regime,
        #[arg(long, value_enum, default_value_t = FlavorArg::Fermion)]
        flavor: FlavorArg,
        /// Rescaled abscissa range `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
    },
    /// Fit an effective temperature and chemical potential to an `n(k)` file.
    FitThermo {
        nk_file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    Moderate,
    Tail,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Fermion,
    Boson,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn out_dir(cli_out: &Option<PathBuf>, config: &RunConfig) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| config.run.output_dir.clone())
}

fn print_json<S: serde::Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    tonks_cli::init_threads(cli.threads)?;
    match &cli.command {
        Command::Run { config } => {
            let config = RunConfig::load(config)?;
            let dir = out_dir(&cli.out, &config);
            let result = runner::run(&config, Some(&dir)).context("run")?;
            log::info!("wrote {}", dir.display());
            print_json(&result.summary.gamma)?;
        }
        Command::PhaseScan { config } => {
            let config = RunConfig::load(config)?;
            let grid = config.scan.clone().context("config has no [scan] section")?;
            let dir = out_dir(&cli.out, &config);
            let rows = scan::phase_scan(&config, &grid, &dir, cli.resume).context("phase scan")?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            log::info!("{} points, {failed} failed, written to {}", rows.len(), dir.display());
        }
        Command::OracleCheck { config } => {
            let config = RunConfig::load(config)?;
            let report = checks::oracle_check(&config).context("oracle check")?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                output::write_json(&dir.join("oracle_check.json"), &report)?;
            }
            print_json(&report)?;
            if !report.passed {
                eprintln!(
                    "oracle check failed: discrepancy {:e}, continuity {:e}",
                    report.max_discrepancy, report.continuity
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::Collapse { dir, alpha, regime, flavor, window } => {
            let regime = match regime {
                Regime::Moderate => CollapseRegime::Moderate,
                Regime::Tail => CollapseRegime::Tail,
            };
            let flavor = match flavor {
                FlavorArg::Fermion => "fermion",
                FlavorArg::Boson => "boson",
            };
            let window = window.as_ref().map(|w| (w[0], w[1]));
            let result = postprocess::collapse_dir(dir, flavor, *alpha, regime, window)?;
            let times: Vec<usize> = postprocess::snapshot_files(dir, flavor)?.into_iter().map(|p| p.0).filter(|&t| t > 0).collect();
            let target = cli.out.clone().unwrap_or_else(|| dir.clone());
            std::fs::create_dir_all(&target)?;
            let regime_name = if regime == CollapseRegime::Moderate { "moderate" } else { "tail" };
            let file = target.join(format!("collapse_{flavor}_{regime_name}.csv"));
            postprocess::write_collapse(&file, &times, &result)?;
            print_json(&serde_json::json!({ "alpha": result.alpha, "regime": regime_name, "flavor": flavor, "metric": result.metric, "file": file }))?;
        }
        Command::FitThermo { nk_file, hbar } => {
            let fit = postprocess::fit_thermo_file(Path::new(nk_file), *hbar)?;
            print_json(&fit)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
