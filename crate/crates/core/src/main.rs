use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use pcebm::energy::{load_model, save_model, EnergyModel};
use pcebm::harness::io::{read_points, read_sequences, write_atomic};
use pcebm::harness::{improve_seeds, run_sweep, train, ExperimentConfig, TrainConfig};
use pcebm::metrics::{hypervolume_exact, hypervolume_mc, summarize_edist, ReferencePoint};
use pcebm::domain::Alphabet;
use pcebm::Error;

/// Multi-objective sampling with compositional energy-based models.
#[derive(Debug, Parser)]
#[command(name = "pcebm", version)]
struct Cli {
    /// Overrides the seed of the config (or of Monte-Carlo hypervolume).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run (or resume) the sweep described by a config file.
    Sweep {
        config: PathBuf,
        /// Worker threads; overrides the config. Results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Improve seed sequences against a scorer model.
    Improve {
        config: PathBuf,
        seeds: PathBuf,
        model: PathBuf,
        /// Report path; defaults to the config's improve.output or <output_dir>/improve.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a sequence energy by contrastive divergence.
    Train {
        data: PathBuf,
        config: PathBuf,
        output: PathBuf,
    },
    /// Hypervolume of a point file.
    Hv {
        points: PathBuf,
        /// Reference point, comma separated; defaults to all ones.
        #[arg(long = "ref", value_delimiter = ',', allow_negative_numbers = true)]
        reference: Option<Vec<f64>>,
        /// Monte-Carlo samples, used above three objectives.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Edit distance from each sequence in `samples` to its nearest sequence in `reference`.
    Edist {
        samples: PathBuf,
        reference: PathBuf,
        /// Symbols of the sequence files; defaults to the 20 amino acids.
        #[arg(long)]
        alphabet: Option<String>,
    },
}

fn trim(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').map_or_else(|| s.to_string(), |t| format!("{t}.0"))
}

fn load_config(path: &Path, seed: Option<u64>) -> pcebm::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> pcebm::Result<()> {
    match cli.command {
        Command::Sweep { config, workers } => {
            let mut cfg = load_config(&config, cli.seed)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let out = run_sweep(&cfg)?;
            for c in &out.summary.cells {
                let hv = c.hv_all.map(trim).unwrap_or_else(|| "-".into());
                println!("{:<40} hv_all {hv:<16} {}", c.cell, c.status);
            }
            println!("report bundle: {}", out.output_dir.display());
        }
        Command::Improve {
            config,
            seeds,
            model,
            out,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            let opts = cfg.improve_options()?;
            let seqs = read_sequences(&seeds, &cfg.alphabet()?)?;
            let scorer: Arc<dyn EnergyModel> = Arc::new(load_model(&model)?);
            let report = improve_seeds(&cfg, &seqs, scorer)?;
            let path = out
                .or_else(|| opts.output.clone())
                .unwrap_or_else(|| cfg.output_dir.join("improve.json"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            let mut bytes = serde_json::to_vec_pretty(&report)
                .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
            bytes.push(b'\n');
            write_atomic(&path, &bytes)?;
            for m in &report.methods {
                println!(
                    "{:<8} improved {}/{} seeds",
                    m.method,
                    m.improved_seeds,
                    m.before.len()
                );
            }
            println!("report: {}", path.display());
        }
        Command::Train {
            data,
            config,
            output,
        } => {
            let mut cfg = TrainConfig::load(&config)?;
            if let Some(s) = cli.seed {
                cfg.cd.seed = s;
            }
            let seqs = read_sequences(&data, &cfg.alphabet()?)?;
            let outcome = train(&seqs, &cfg)?;
            save_model(&outcome.model, &output)?;
            println!(
                "{}",
                json!({
                    "model": output.display().to_string(),
                    "kind": outcome.model.kind_name(),
                    "loss_history": outcome.loss_history,
                })
            );
        }
        Command::Hv {
            points,
            reference,
            samples,
        } => {
            let pts = read_points(&points)?;
            let m = match (&reference, pts.first()) {
                (Some(r), _) => r.len(),
                (None, Some(p)) => p.len(),
                (None, None) => 2,
            };
            let r = match reference {
                Some(r) => ReferencePoint::new(r)?,
                None => ReferencePoint::ones(m),
            };
            if m <= 3 {
                println!("{}", trim(hypervolume_exact(&pts, &r)?));
            } else {
                let (est, se) = hypervolume_mc(&pts, &r, samples, cli.seed.unwrap_or(0))?;
                println!("{} +- {}", trim(est), trim(se));
            }
        }
        Command::Edist {
            samples,
            reference,
            alphabet,
        } => {
            let alphabet = match alphabet {
                Some(s) => Alphabet::new(&s)?,
                None => Alphabet::default(),
            };
            let a = read_sequences(&samples, &alphabet)?;
            let b = read_sequences(&reference, &alphabet)?;
            let (mean, std) = summarize_edist(&a, &b)?;
            println!("{}", json!({ "mean": mean, "std": std, "samples": a.len() }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut body = json!({ "error": e.kind(), "message": e.to_string() });
            if let Error::Parse { location, .. } = &e {
                body["location"] = json!(location);
            }
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
