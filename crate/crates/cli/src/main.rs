use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gbbkit_cli::fidelity::{self, Corpus};
use gbbkit_cli::scatter::{self, ScatterMode};
use gbbkit_cli::shapes::{Representation, ShapeSpec};
use gbbkit_cli::{coco, regress, score, CliError, CliResult};

/// Gaussian bounding box experiments.
#[derive(Debug, Parser)]
#[command(name = "gbbkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a JSON shape to another representation.
    Convert {
        /// Shape JSON; read from stdin when omitted.
        shape: Option<String>,
        /// Target: hbb, obb, gbb, ellipse or polygon.
        #[arg(long)]
        to: Representation,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score shape pairs from a JSON-lines file.
    Score {
        /// Input file; stdin when omitted.
        input: Option<PathBuf>,
        /// Raster cell size for pairs without a closed-form IoU.
        #[arg(long)]
        cell_size: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// IoU against ProbIoU for random box pairs.
    Scatter {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// gbb or uniform_mask.
        #[arg(long, default_value = "gbb")]
        mode: ScatterMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median IoU of HBB, OBB and ellipse fits to polygon masks.
    Fidelity {
        /// COCO-style annotation file; a synthetic corpus when omitted.
        annotations: Option<PathBuf>,
        /// Synthetic corpus: ellipses, rectangles or mixed.
        #[arg(long, default_value = "ellipses")]
        mode: Corpus,
        /// Shapes per synthetic category.
        #[arg(long, default_value_t = fidelity::DEFAULT_PER_CATEGORY)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        cell_size: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a GBB with the two-stage loss schedule.
    Regress {
        #[arg(long)]
        config: PathBuf,
        /// Trajectory CSV path; the summary then goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn input(path: Option<&Path>) -> CliResult<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(
            File::open(p).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdin().lock()),
    })
}

fn check_cell_size(cell_size: Option<f64>) -> CliResult<()> {
    match cell_size {
        Some(c) if !(c > 0.0 && c.is_finite()) => Err(CliError::Usage(format!("--cell-size must be positive, got {c}"))),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Convert { shape, to, out } => {
            let text = match shape {
                Some(s) => s,
                None => {
                    let mut s = String::new();
                    io::stdin().read_to_string(&mut s)?;
                    s
                }
            };
            let spec: ShapeSpec = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("shape: {e}")))?;
            let converted = spec.convert(to).map_err(|e| CliError::Usage(format!("shape: {e}")))?;
            let mut w = output(out.as_deref())?;
            serde_json::to_writer(&mut w, &converted).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
        }
        Command::Score { input: path, cell_size, out } => {
            check_cell_size(cell_size)?;
            let reader = input(path.as_deref())?;
            let mut w = output(out.as_deref())?;
            let summary = score::run_score(reader, &mut w, cell_size)?;
            w.flush()?;
            eprintln!("scored {} pairs, skipped {}", summary.scored, summary.skipped);
        }
        Command::Scatter { n, seed, mode, out } => {
            if n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let mut w = output(out.as_deref())?;
            scatter::run_scatter(n, seed, mode, &mut w)?;
            w.flush()?;
        }
        Command::Fidelity { annotations, mode, n, seed, cell_size, out } => {
            check_cell_size(cell_size)?;
            let records = match annotations {
                Some(p) => {
                    let ing = coco::ingest_annotations(&p)?;
                    eprintln!(
                        "read {} annotations; skipped {} multi-part, {} malformed",
                        ing.records.len(),
                        ing.skipped_multipart,
                        ing.skipped_malformed
                    );
                    ing.records
                }
                None => fidelity::synthetic_corpus(mode, n, seed),
            };
            let rows = fidelity::fidelity_rows(&records, cell_size)?;
            let mut w = output(out.as_deref())?;
            fidelity::write_rows(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Regress { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", config.display())))?;
            let config = regress::parse_config(&text)?;
            let mut csv = output(out.as_deref())?;
            let result = regress::run_regress(&config, &mut csv);
            csv.flush()?;
            let summary = serde_json::to_string_pretty(&result?).map_err(|e| CliError::Runtime(e.to_string()))?;
            if out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gbbkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
