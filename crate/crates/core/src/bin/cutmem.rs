use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use cutfem_membrane::analysis::config::{self, BeamConfig, ConditioningConfig, CylinderConfig, OblateConfig};
use cutfem_membrane::analysis::convergence::format_table;
use cutfem_membrane::analysis::output::{self, RunLog};
use cutfem_membrane::analysis::{self, Study};
use cutfem_membrane::Result;

#[derive(Parser)]
#[command(name = "cutmem", version, about = "Cut finite element membrane benchmarks")]
struct Cli {
    /// TOML file overriding the benchmark defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run on a single thread.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stress convergence of a pulled cylinder.
    Cylinder,
    /// Stress convergence of an oblate spheroid with a manufactured solution.
    Oblate,
    /// Beam in tension reinforced by plane membranes.
    StiffenedBeam,
    /// Cantilever in bending reinforced by a tube membrane.
    BendingBeam,
    /// Condition numbers under vanishing cuts, with and without stabilisation.
    Conditioning,
}

fn load<T: Serialize + serde::de::DeserializeOwned>(defaults: T, path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => config::load(&defaults, p),
        None => Ok(defaults),
    }
}

fn finish<C: Serialize, R: Serialize>(
    out: &Path,
    name: &str,
    start: Instant,
    config: &C,
    results: R,
    notes: Vec<String>,
    mut files: Vec<PathBuf>,
) -> Result<()> {
    let log = RunLog {
        benchmark: name,
        version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        seconds: start.elapsed().as_secs_f64(),
        config,
        results,
        notes,
    };
    let path = out.join(format!("{name}.json"));
    output::write_json(&path, &log)?;
    files.push(path);
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn study_notes(study: &Study) -> Vec<String> {
    study
        .failures
        .iter()
        .map(|f| format!("refinement {} failed: {}", f.refinement, f.message))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    let start = Instant::now();
    match cli.command {
        Command::Cylinder => {
            let cfg = load(CylinderConfig::default(), &cli.config)?;
            let study = analysis::cylinder(&cfg)?;
            print!("{}", format_table(&study.rows));
            let files = output::write_study(&cli.out, "cylinder", &study)?;
            finish(&cli.out, "cylinder", start, &cfg, &study.rows, study_notes(&study), files)
        }
        Command::Oblate => {
            let cfg = load(OblateConfig::default(), &cli.config)?;
            let study = analysis::oblate(&cfg)?;
            print!("{}", format_table(&study.rows));
            let files = output::write_study(&cli.out, "oblate", &study)?;
            finish(&cli.out, "oblate", start, &cfg, &study.rows, study_notes(&study), files)
        }
        Command::StiffenedBeam | Command::BendingBeam => {
            let stiffened = matches!(cli.command, Command::StiffenedBeam);
            let (name, defaults) = if stiffened {
                ("stiffened-beam", BeamConfig::stiffened())
            } else {
                ("bending-beam", BeamConfig::bending())
            };
            let cfg = load(defaults, &cli.config)?;
            let outcome = if stiffened {
                analysis::stiffened_beam(&cfg)?
            } else {
                analysis::bending_beam(&cfg)?
            };
            let r = &outcome.report;
            println!("loaded-face mean displacement: {:.6e} without membranes, {:.6e} with {}", r.baseline, r.stiffened, r.n_membranes);
            let files = output::write_beam(&cli.out, name, &outcome)?;
            let notes = vec![
                format!("bulk nu = {} (0.5 would make the bulk Lame parameter infinite)", r.bulk_nu),
                format!("support: {}", r.support),
                format!("load: {}", r.load),
            ];
            finish(&cli.out, name, start, &cfg, r, notes, files)
        }
        Command::Conditioning => {
            let cfg = load(ConditioningConfig::default(), &cli.config)?;
            let rows = analysis::conditioning_sweep(&cfg)?;
            let csv = output::conditioning_csv(&rows);
            print!("{csv}");
            let path = cli.out.join("conditioning.csv");
            std::fs::write(&path, csv)?;
            finish(&cli.out, "conditioning", start, &cfg, &rows, Vec::new(), vec![path])
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.deterministic {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(1).build_global() {
            log::warn!("could not restrict the thread pool: {e}");
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
