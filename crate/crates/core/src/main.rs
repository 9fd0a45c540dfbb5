use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ris_vlc::cli::{self, ComparisonDocument, SweepDocument};
use ris_vlc::error::exit;
use ris_vlc::experiment::{calibrate, power_sweep, run_scenario, CalibrationGrid, SchemeName, SweepSpec};
use ris_vlc::{Error, Quantity, Result};

const THREADS_VAR: &str = "RIS_VLC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ris-vlc", version, about = "Indoor VLC transmitter-layout simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QuantityArg {
    Illuminance,
    Rate,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Field maps and report for every configured scheme.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Limit map output to one quantity.
        #[arg(long, value_enum)]
        quantity: Option<QuantityArg>,
    },
    /// Compare a list of schemes against a baseline.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated: centralized,distributed,adt,ris
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimum rate and illuminance against transmit power.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "power_w")]
        param: String,
        #[arg(long = "from")]
        start: Option<f64>,
        #[arg(long = "to")]
        stop: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a config without simulating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the default scenario as JSON.
    Defaults,
    /// Search concentrator index and receiver noise density (plus geometry with --wide).
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        wide: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::invalid(THREADS_VAR, format!("expected a thread count, got `{raw}`")))?;
    // a pool may already exist when embedded; the cap is best effort then
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn scheme_arg(s: &str) -> Result<SchemeName> {
    SchemeName::parse(s).ok_or_else(|| Error::invalid("schemes", format!("unknown scheme `{s}`")))
}

fn emit_comparison(scenario: &ris_vlc::Scenario, out: &Path, only: Option<Quantity>) -> Result<()> {
    let report = run_scenario(scenario)?;
    create_out_dir(out)?;
    for r in &report.results {
        for q in [Quantity::Illuminance, Quantity::DataRate] {
            if only.is_some_and(|o| o != q) {
                continue;
            }
            let map = r.map(q);
            let stem = cli::output_stem(map);
            if scenario.output.csv {
                cli::write_field_csv(map, &out.join(format!("{stem}.csv")))?;
            }
            if scenario.output.heatmap {
                cli::render_heatmap(map, &out.join(format!("{stem}.ppm")))?;
            }
        }
    }
    cli::write_report(&ComparisonDocument::new(&report), &out.join("report.json"))?;
    for r in &report.results {
        println!(
            "{:<12} illuminance U={:.4} min={:.2} lux   rate U={:.4} min={:.4e} bit/s",
            r.scheme.as_str(),
            r.illuminance_stats.uniformity,
            r.illuminance_stats.min,
            r.rate_stats.uniformity,
            r.rate_stats.min
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { config, out, quantity } => {
            let scenario = cli::parse_config(&config)?;
            let only = quantity.map(|q| match q {
                QuantityArg::Illuminance => Quantity::Illuminance,
                QuantityArg::Rate => Quantity::DataRate,
            });
            emit_comparison(&scenario, &out, only)
        }
        Command::Compare { config, schemes, baseline, out } => {
            let mut scenario = cli::parse_config(&config)?;
            if !schemes.is_empty() {
                scenario.schemes = schemes.iter().map(|s| scheme_arg(s)).collect::<Result<_>>()?;
            }
            if let Some(b) = baseline {
                scenario.baseline = Some(scheme_arg(&b).map_err(|_| Error::invalid("baseline", format!("unknown scheme `{b}`")))?);
            }
            scenario.validate()?;
            emit_comparison(&scenario, &out, None)
        }
        Command::Sweep { config, param, start, stop, step, out } => {
            let scenario = cli::parse_config(&config)?;
            let spec = SweepSpec {
                param,
                start: start.unwrap_or(scenario.sweep.start),
                stop: stop.unwrap_or(scenario.sweep.stop),
                step: step.unwrap_or(scenario.sweep.step),
            };
            let table = power_sweep(&scenario, &spec)?;
            create_out_dir(&out)?;
            let doc = SweepDocument::new(&table);
            cli::write_report(&doc, &out.join("report.json"))?;
            for c in &doc.rate_crossovers {
                println!("min-rate crossover {} vs {} at {:?} W", c.a, c.b, c.power_w);
            }
            println!("{} sweep rows written", table.rows.len());
            Ok(())
        }
        Command::Validate { config } => {
            cli::parse_config(&config)?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Defaults => {
            println!("{}", cli::config_to_string(&ris_vlc::Scenario::default()));
            Ok(())
        }
        Command::Calibrate { config, wide, out } => {
            let scenario = match config {
                Some(path) => cli::parse_config(&path)?,
                None => ris_vlc::Scenario::default(),
            };
            let grid = if wide { CalibrationGrid::wide() } else { CalibrationGrid::receiver(&scenario) };
            let outcome = calibrate(&scenario, &grid)?;
            create_out_dir(&out)?;
            cli::write_report(&outcome, &out.join("report.json"))?;
            let b = &outcome.best;
            println!(
                "best of {}: semi-angle {}°, wedge {} rad, f {}, N0 {:e} ({} of 4 checks, rms {:.4})",
                outcome.evaluated,
                b.semi_angle_deg,
                b.wedge_angle_rad,
                b.refr_index_f,
                b.noise_psd,
                b.checks.passed(),
                b.rms_error
            );
            println!("closest max-abs error {:.4}", outcome.closest.max_abs_error);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
