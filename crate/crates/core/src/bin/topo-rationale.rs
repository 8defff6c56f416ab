use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topo_rationale::harness::runs::{self, Ablation};
use topo_rationale::model::Config;
use topo_rationale::Result;

#[derive(Parser)]
#[command(version, about = "Persistent rationale filtration learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a JSON spec.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes checkpoint, history, metrics and manifest.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Consecutive seeds starting at the config seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Evaluate a checkpoint on the validation and test splits.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to `eval/` next to the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write persistence barcodes of every split as CSV.
    ExportBarcodes {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustively test the unique-optimum claim on small graphs.
    CheckTheorem {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the full model against an ablated one on matched seeds.
    Ablate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        no_topo: bool,
        #[arg(long)]
        no_prior: bool,
        /// Defaults to a fresh 1000-graph BA-2Motifs per seed.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value = "ablation")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// `key = value` file; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Config> {
        self.config.as_deref().map_or_else(|| Ok(Config::default()), runs::load_config)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out } => {
            let m = runs::generate_dataset(&runs::load_dataset_spec(&spec)?, &out)?;
            println!("{} graphs (train/val/test {:?}), checksum {}", m.counts.iter().sum::<usize>(), m.counts, m.checksum);
        }
        Command::Train { config, data, out, seeds } => {
            let m = runs::train_seeds(&config.load()?, &data, &out, seeds)?;
            print_metrics(&m.metrics);
        }
        Command::Eval { checkpoint, data, out } => {
            print_metrics(&runs::eval_run(&checkpoint, &data, out.as_deref())?.metrics);
        }
        Command::ExportBarcodes { checkpoint, data, out } => {
            let m = runs::export_barcodes_run(&checkpoint, &data, &out)?;
            println!("{} bars -> {}", m.metrics["rows"], out.display());
        }
        Command::CheckTheorem { config, out } => {
            let (report, _) = runs::check_theorem_run(&config.load()?, out.as_deref())?;
            for (convention, unique, total) in report.unique_counts() {
                println!("{convention}: indicator is the unique minimiser in {unique}/{total} instances");
            }
        }
        Command::Ablate { config, no_topo, no_prior, data, seeds, out } => {
            let rows = runs::ablate_run(&config.load()?, Ablation { no_topo, no_prior }, data.as_deref(), seeds, &out)?;
            println!("variant,seed,test_accuracy,test_auc");
            for r in rows {
                let auc = r.test_auc.map_or("-".into(), |a| format!("{a:.4}"));
                println!("{},{},{:.4},{auc}", r.variant, r.seed, r.test_accuracy);
            }
        }
    }
    Ok(())
}

fn print_metrics(metrics: &runs::Metrics) {
    for (k, v) in metrics {
        println!("{k} = {v:.6}");
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = runs::configure_threads().and_then(|()| run(cli)) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
