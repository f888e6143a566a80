use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use segwall_core::scene::{self, RunOptions, SceneConfig};
use segwall_core::{validation, Error};

/// Segmental retaining wall simulator: SPH soil against rigid blocks.
#[derive(Parser)]
#[command(name = "segwall", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Settle a scene, remove the stopper and run it to `t_end`.
    Run {
        /// Scene file, or the name of a bundled scene.
        #[arg(long)]
        scene: String,
        #[arg(long)]
        out: PathBuf,
        /// End time in seconds (overrides the scene).
        #[arg(long)]
        t_end: Option<f64>,
        /// Snapshot interval in seconds (overrides the scene).
        #[arg(long)]
        snapshot_every: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Progress lines on stderr.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Write `metrics.csv` for a finished run directory.
    Metrics {
        #[arg(long)]
        run: PathBuf,
    },
    /// Run a named analytic check and print pass/fail.
    Validate {
        /// Case name, or `all`. `--case list` prints the names.
        #[arg(long)]
        case: String,
    },
}

fn load_scene(arg: &str) -> Result<SceneConfig, Error> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = scene::bundled(arg) {
            return Ok(SceneConfig::parse(text)?);
        }
        return Err(Error::InvalidInput(format!(
            "no scene file `{arg}` and no bundled scene of that name"
        )));
    }
    SceneConfig::load(path)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run {
            scene,
            out,
            t_end,
            snapshot_every,
            threads,
            verbose,
        } => {
            if threads == Some(0) {
                return Err(Error::InvalidInput("--threads must be at least 1".into()));
            }
            let cfg = load_scene(&scene)?;
            let mut opts = RunOptions::new(out);
            opts.t_end = t_end;
            opts.snapshot_interval = snapshot_every;
            opts.verbose = verbose;
            let summary = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
                    .install(|| scene::run(&cfg, &opts))?,
                None => scene::run(&cfg, &opts)?,
            };
            print!("{}", summary.to_csv());
            Ok(true)
        }
        Command::Metrics { run } => {
            let m = scene::run_metrics(&run, None)?;
            println!("snapshots,{}", m.rows.len());
            if let Some(r) = m.rows.last().and_then(|r| r.runout) {
                println!("runout,{r:.9e}");
            }
            if let Some(c) = m.collapse {
                println!("collapsed,{}", c.collapsed);
                println!("max_block_displacement,{:.9e}", c.max_displacement);
            }
            println!("metrics,{}", run.join("metrics.csv").display());
            Ok(true)
        }
        Command::Validate { case } => {
            if case == "list" {
                for name in validation::CASES {
                    println!("{name}");
                }
                return Ok(true);
            }
            let names: Vec<&str> = if case == "all" {
                validation::CASES.to_vec()
            } else {
                vec![case.as_str()]
            };
            let mut ok = true;
            for name in names {
                let report = validation::run_case(name)?;
                println!("{report}");
                ok &= report.passed;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
