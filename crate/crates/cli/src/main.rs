use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use atp_core::analysis::{detect_peaks, fit_ladder};
use atp_core::config::{echo, parse_config, RunConfig};
use atp_core::io::{format_ladder, format_spectrum, read_spectrum, write_shift_series, PlotKind};
use atp_core::scan::{analyze, format_report, load_scan, run_scan, write_outputs, write_report};
use clap::{Parser, Subcommand};

/// Above-threshold photoemission from nanotips: simulate, scan and analyse
/// electron spectra.
#[derive(Parser)]
#[command(name = "atp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and print the derived quantities.
    Validate { config: PathBuf },
    /// Run the base point of a config, ignoring any scan.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scan value and the downstream analyses.
    Scan {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the analyses on a scan directory.
    Analyze {
        dir: PathBuf,
        /// Analysis settings taken from this config instead of the stored one.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write plot-ready tables: spectrum or ladder from a spectrum file,
    /// shift from a scan directory.
    Plotdata {
        kind: String,
        artifact: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Analysis settings for ladder and shift tables.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn execute(mut config: RunConfig, out: Option<PathBuf>) -> Result<bool> {
    if let Some(out) = out {
        config.output = out;
    }
    let outcome = run_scan(&config);
    write_outputs(&config, &outcome, &config.output)
        .with_context(|| format!("writing {}", config.output.display()))?;
    for r in &outcome.runs {
        match &r.outcome {
            Ok(_) => log::info!("run {} ({:e}) ok", r.index, r.value),
            Err(e) => log::error!("run {} ({:e}) failed: {e}", r.index, r.value),
        }
    }
    print!("{}", format_report(&outcome.report));
    println!("output written to {}", config.output.display());
    Ok(outcome.failures() == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { config } => {
            let c = load(&config)?;
            print!("{}", echo(&c));
            println!("# engine = {}", c.engine.name());
            if let Some(s) = &c.scan {
                println!("# scan = {} x {}", s.parameter.name(), s.values.len());
            }
            Ok(true)
        }
        Command::Run { config, out } => {
            let mut c = load(&config)?;
            c.scan = None;
            execute(c, out)
        }
        Command::Scan { config, out } => execute(load(&config)?, out),
        Command::Analyze { dir, config } => {
            let mut loaded = load_scan(&dir)?;
            let settings = match config {
                Some(p) => load(&p)?,
                None => loaded.config.clone(),
            };
            let report = analyze(&settings, loaded.parameter, &loaded.runs, &loaded.kinks);
            loaded.manifest.entries.retain(|k, _| !(k.starts_with("file.ladder_") || k.starts_with("file.shift_")));
            write_report(&report, &dir, &mut loaded.manifest)?;
            loaded.manifest.write(&dir.join("manifest.txt"))?;
            print!("{}", format_report(&report));
            Ok(true)
        }
        Command::Plotdata { kind, artifact, out, config } => {
            let kind: PlotKind = kind.parse()?;
            fs::create_dir_all(&out)?;
            let stem = artifact.file_stem().and_then(|s| s.to_str()).unwrap_or("artifact").to_string();
            match kind {
                PlotKind::Spectrum => {
                    let s = read_spectrum(&artifact)?;
                    let path = out.join(format!("{stem}_spectrum.tsv"));
                    fs::write(&path, format_spectrum(&s))?;
                    println!("{}", path.display());
                }
                PlotKind::Ladder => {
                    let s = read_spectrum(&artifact)?;
                    let c = match config {
                        Some(p) => load(&p)?,
                        None => parse_config("[engine]\nkind = synthetic\n[synthetic]\n")?,
                    };
                    let peaks = detect_peaks(&s, &c.analysis.peaks);
                    let fit = fit_ladder(&peaks, c.threshold_order(), c.analysis.exclude_lowest)?;
                    let path = out.join(format!("{stem}_ladder.tsv"));
                    fs::write(&path, format_ladder(&fit))?;
                    println!("{}", path.display());
                }
                PlotKind::Shift => {
                    if !artifact.is_dir() {
                        bail!("shift tables need a scan directory, got {}", artifact.display());
                    }
                    let loaded = load_scan(&artifact)?;
                    let settings = match config {
                        Some(p) => load(&p)?,
                        None => loaded.config.clone(),
                    };
                    let report = analyze(&settings, loaded.parameter, &loaded.runs, &loaded.kinks);
                    match report.shift {
                        Some(Ok(fit)) => {
                            for p in write_shift_series(&out, &fit)? {
                                println!("{}", p.display());
                            }
                        }
                        Some(Err(e)) => bail!("shift fit failed: {e}"),
                        None => bail!("{}", report.notices.join("; ")),
                    }
                }
            }
            Ok(true)
        }
    }
}
