use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use genmix::data::Dataset;
use genmix::rng::{stream, Purpose};
use genmix::trainer::{load_checkpoint, sample_components};
use genmix_cli::compare::{compare, to_csv, to_table};
use genmix_cli::config::{preset, preset_names, ExperimentConfig};
use genmix_cli::run_experiment;

#[derive(Parser)]
#[command(name = "genmix", version, about = "Competitive training of generative mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file or a preset name (e.g. 3modes_kvae).
    Run {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Validate the configuration and exit without writing anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Compare the final KDE log-likelihood of finished runs.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Also write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the built-in presets, or write each as `<name>.json` into a directory.
    Presets {
        #[arg(long)]
        write_dir: Option<PathBuf>,
    },
    /// Draw samples from a checkpoint directory (`.../checkpoints/round_<t>`).
    Sample {
        checkpoint: PathBuf,
        #[arg(short, default_value_t = 1000)]
        n: usize,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            dry_run,
        } => run(&config, seed, out, dry_run),
        Command::Compare { dirs, csv } => {
            let rows = compare(&dirs);
            print!("{}", to_table(&rows));
            if let Some(path) = csv {
                if let Err(e) = std::fs::write(&path, to_csv(&rows)) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::FAILURE;
                }
            }
            if rows.is_empty() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Command::Presets { write_dir } => presets(write_dir),
        Command::Sample {
            checkpoint,
            n,
            output,
            seed,
        } => {
            let result = load_checkpoint(&checkpoint).and_then(|(models, weights)| {
                let (x, comps) = sample_components(&models, &weights, n, &mut stream(seed, Purpose::Plot, 0, 0))?;
                Dataset::new(x, Some(comps), "samples")?.save_csv(&output)
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

fn run(config: &str, seed: Option<u64>, out: Option<PathBuf>, dry_run: bool) -> ExitCode {
    let loaded = match preset(config) {
        Some(c) if !std::path::Path::new(config).exists() => Ok(c),
        _ => ExperimentConfig::load(config),
    };
    let mut config = match loaded {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config {config}: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        config = config.with_seed(s);
    }
    if out.is_some() {
        config.output_dir = out;
    }
    if let Err(e) = config.validate() {
        eprintln!("invalid config: {e}");
        return ExitCode::from(2);
    }
    if dry_run {
        println!("config ok: {} -> {}", config.run_id(), config.output_dir().display());
        return ExitCode::SUCCESS;
    }
    match run_experiment(&config) {
        Ok(s) => {
            print!("{}: kde_loglik {:.4} (bandwidth {:.4})", s.run_id, s.kde_loglik, s.kde_bandwidth);
            if let Some(p) = s.purity {
                print!(", purity {p:.3}");
            }
            println!(" -> {}", s.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::FAILURE
        }
    }
}

fn presets(write_dir: Option<PathBuf>) -> ExitCode {
    for name in preset_names() {
        let Some(dir) = &write_dir else {
            println!("{name}");
            continue;
        };
        let config = preset(&name).expect("listed presets exist");
        let written = std::fs::create_dir_all(dir).and_then(|()| {
            let json = serde_json::to_string_pretty(&config).expect("config serializes");
            std::fs::write(dir.join(format!("{name}.json")), json + "\n")
        });
        if let Err(e) = written {
            eprintln!("error: cannot write {name}: {e}");
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}
