//! `cablecal`: design, check and replay cable-length autocalibration layouts.
//!
//! Exit codes: 0 ok, 1 usage/parse/I/O error, 2 condition failure or
//! infeasible design, 3 identification mismatch, 4 still ambiguous.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cablecal::config::DesignConfig;
use cablecal::events::{delta_stats, enumerate_events, rectify, stroke_profile};
use cablecal::identifier::{run_trace, Status};
use cablecal::model::validate_design_with;
use cablecal::optimizer::search;
use cablecal::simulator::{simulate, EncoderModel, ObservationTrace};
use cablecal::Error;

const CONFIG_DIR_VAR: &str = "CABLECAL_CONFIG_DIR";

const EXIT_USAGE: u8 = 1;
const EXIT_CONDITION: u8 = 2;
const EXIT_NO_MATCH: u8 = 3;
const EXIT_AMBIGUOUS: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cablecal",
    version,
    about = "Cable-length autocalibration toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check design conditions C1-C7.
    Validate { config: PathBuf },
    /// Build a design (from a recipe) and print it as an explicit layout.
    Design {
        config: PathBuf,
        /// Write the layout config here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the detection event table as CSV.
    Events {
        config: PathBuf,
        /// All (i, j) events, including simultaneous ones.
        #[arg(long, conflicts_with = "rectified")]
        raw: bool,
        /// Simultaneous events removed (default).
        #[arg(long)]
        rectified: bool,
        /// Output file; stdout if omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Decimal places, or `full` for shortest round-trip floats.
        #[arg(long, default_value = "2", value_parser = parse_precision)]
        precision: Precision,
    },
    /// Print n_e, Δρ statistics and the calibration-stroke profile.
    Profile {
        config: PathBuf,
        /// Matching tolerance for gap runs.
        #[arg(long, default_value_t = cablecal::events::DEFAULT_STROKE_TOLERANCE)]
        tolerance: f64,
    },
    /// Wind the cable and record detections read through an encoder.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        offset: f64,
        /// Per-reading jitter standard deviation.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output trace CSV; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify the cable length from a detection trace.
    Calibrate {
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Gap matching tolerance; defaults to the config's `tolerances.gap`.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Search pool orderings of a recipe for the best layout.
    Optimize {
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Winning design config; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score trail CSV (iteration,mean,std,worst_stroke).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug)]
struct Precision(Option<usize>);

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    if s == "full" {
        return Ok(Precision(None));
    }
    s.parse::<usize>()
        .map(|p| Precision(Some(p)))
        .map_err(|_| format!("expected a digit count or `full`, got `{s}`"))
}

/// Relative paths missing from the working directory are looked up in
/// `$CABLECAL_CONFIG_DIR`.
fn resolve_config(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn load(path: &Path) -> Result<DesignConfig> {
    Ok(DesignConfig::load(&resolve_config(path))?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let design = cfg.design()?;
            let report = validate_design_with(&design, cfg.tolerances.geom);
            println!("{report}");
            if !report.is_conforming() {
                return Ok(EXIT_CONDITION);
            }
            if !report.warnings().is_empty() {
                eprintln!("warning: advisory conditions not met");
            }
            Ok(0)
        }
        Command::Design { config, out } => {
            let cfg = load(&config)?;
            let resolved = cfg.resolve()?;
            let report = validate_design_with(&resolved.design, cfg.tolerances.geom);
            if let Some(built) = &resolved.built {
                let s = built.summary;
                eprintln!(
                    "d0 = {}, os1 = {}, dn = {}, sensors = {}, marks = {} (estimate {:.3})",
                    s.d0,
                    s.os1,
                    s.dn,
                    resolved.design.sensor_count(),
                    resolved.design.mark_count(),
                    s.mark_count_estimate.value
                );
            }
            eprintln!("{report}");
            let text =
                DesignConfig::from_design(&resolved.design, cfg.tolerances).to_toml_string()?;
            output(out.as_deref())?.write_all(text.as_bytes())?;
            Ok(if report.is_conforming() {
                0
            } else {
                EXIT_CONDITION
            })
        }
        Command::Events {
            config,
            raw,
            rectified: _,
            csv,
            precision,
        } => {
            let cfg = load(&config)?;
            let design = cfg.design()?;
            let table = cablecal::events::enumerate_events_with(&design, cfg.tolerances.geom);
            let table = if raw {
                table
            } else {
                cablecal::events::rectify_with(&table, cfg.tolerances.geom)
            };
            let mut out = output(csv.as_deref())?;
            table.write_csv(&mut out, precision.0)?;
            out.flush()?;
            Ok(0)
        }
        Command::Profile { config, tolerance } => {
            let design = load(&config)?.design()?;
            let table = rectify(&enumerate_events(&design));
            println!("n_e: {}", table.len());
            match delta_stats(&table) {
                Ok(st) => println!("mean_delta_rho: {}\nstd_delta_rho: {}", st.mean, st.std),
                Err(e) => println!("stats: {e}"),
            }
            let profile = stroke_profile(&table, tolerance)?;
            println!("worst_stroke: {}", profile.worst_stroke);
            println!("mean_stroke: {}", profile.mean_stroke);
            println!("unidentifiable_starts: {}", profile.unidentifiable);
            println!("start,rho,detections,stroke");
            for (e, ev) in profile.entries.iter().zip(table.events()) {
                let d = e
                    .detections
                    .map(|d| d.to_string())
                    .unwrap_or_else(|| "-".into());
                let s = e
                    .stroke
                    .map(|s| format!("{s:.2}"))
                    .unwrap_or_else(|| "-".into());
                println!("{},{:.2},{d},{s}", e.start, ev.rho);
            }
            Ok(0)
        }
        Command::Simulate {
            config,
            start,
            stop,
            scale,
            offset,
            noise,
            seed,
            out,
        } => {
            let design = load(&config)?.design()?;
            let encoder = EncoderModel::new(scale, offset, noise, seed)?;
            let trace = simulate(&design, &encoder, start, stop)?;
            let mut w = output(out.as_deref())?;
            trace.write_csv(&mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Calibrate {
            config,
            trace,
            tolerance,
        } => {
            let cfg = load(&config)?;
            let design = cfg.design()?;
            let table = cablecal::events::rectify_with(
                &cablecal::events::enumerate_events_with(&design, cfg.tolerances.geom),
                cfg.tolerances.geom,
            );
            let file =
                File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let obs = ObservationTrace::read_csv(file)?;
            let result = run_trace(
                &design,
                &table,
                &obs,
                tolerance.unwrap_or(cfg.tolerances.gap),
            )?;
            println!("{result}");
            Ok(match result.status {
                Status::Identified { .. } | Status::Exhausted { .. } => 0,
                Status::NoMatch => EXIT_NO_MATCH,
                Status::Ambiguous { .. } | Status::AwaitingFirst => EXIT_AMBIGUOUS,
            })
        }
        Command::Optimize {
            config,
            budget,
            seed,
            out,
            report,
        } => {
            let cfg = load(&config)?;
            let recipe = cfg.recipe().context("optimize needs a [recipe] section")?;
            let result = match search(&recipe, budget, seed) {
                Err(Error::EmptyFeasibleSet) => {
                    eprintln!("error: no pool ordering yields a conforming design");
                    return Ok(EXIT_CONDITION);
                }
                other => other?,
            };
            let s = result.score;
            eprintln!(
                "{} evaluations ({}); best: unidentifiable {}, worst_stroke {}, mean {}, std {}",
                result.evaluations,
                if result.exhaustive {
                    "exhaustive"
                } else {
                    "hill climb"
                },
                s.unidentifiable_starts,
                s.worst_stroke,
                s.mean_gap,
                s.std_gap
            );
            let report_text = validate_design_with(&result.design, cfg.tolerances.geom);
            for c in report_text.warnings() {
                eprintln!("warning: {c:?} not met ({})", c.title());
            }
            let winner = DesignConfig::from_design(&result.design, cfg.tolerances);
            output(out.as_deref())?.write_all(winner.to_toml_string()?.as_bytes())?;
            if let Some(p) = report {
                let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                result.write_report(BufWriter::new(f))?;
            }
            Ok(if report_text.is_conforming() {
                0
            } else {
                EXIT_CONDITION
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
