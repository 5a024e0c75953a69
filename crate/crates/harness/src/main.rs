use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrobust::{default_data_dir, ConfigOverrides, Experiment, ExperimentConfig, HarnessError};
use qrobust_core::{AnsatzKind, AttackKind};

/// Adversarial robustness of quanvolutional and classical MNIST classifiers.
///
/// The MNIST directory is taken from QROBUST_DATA_DIR, defaulting to the
/// bundled data/mnist.
#[derive(Parser)]
#[command(name = "qrobust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every head and write checkpoints
    Train(Flags),
    /// White-box FGSM/PGD/MIM sweeps against the checkpoints
    Attack(Flags),
    /// FGSM transfer between the CNN and each QuNN
    Transfer(Flags),
    /// Meyer-Wallach entanglement and expressibility of the filters
    Metrics(Flags),
    /// Write the manifest for a finished run
    Report(Flags),
    /// train, attack, transfer, metrics, report
    All(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Ansatz kind; repeat or comma-separate
    #[arg(long, value_delimiter = ',')]
    ansatz: Vec<AnsatzKind>,
    /// Attack kind (fgsm, pgd, mim); repeat or comma-separate
    #[arg(long, value_delimiter = ',')]
    attack: Vec<AttackKind>,
    /// Comma-separated epsilons, starting at 0
    #[arg(long, value_delimiter = ',')]
    eps_grid: Vec<f64>,
    #[arg(long)]
    train_count: Option<usize>,
    #[arg(long)]
    test_count: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            seed: self.seed,
            ansatz_kinds: non_empty(&self.ansatz),
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            attacks: non_empty(&self.attack),
            eps_grid: non_empty(&self.eps_grid),
            train_count: self.train_count,
            test_count: self.test_count,
            out_dir: self.out.clone(),
            ..ConfigOverrides::default()
        }
    }

    fn resolve(&self) -> qrobust::Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => ConfigOverrides::from_file(path)?,
            None => ConfigOverrides::default(),
        };
        ExperimentConfig::resolve(file, self.overrides())
    }
}

fn non_empty<T: Clone>(v: &[T]) -> Option<Vec<T>> {
    (!v.is_empty()).then(|| v.to_vec())
}

fn run(command: Command) -> qrobust::Result<()> {
    let (flags, stage): (Flags, fn(&Experiment) -> qrobust::Result<()>) = match command {
        Command::Train(f) => (f, |e| e.train_all().map(drop)),
        Command::Attack(f) => (f, |e| e.attack_stage().map(drop)),
        Command::Transfer(f) => (f, |e| e.transfer_stage().map(drop)),
        Command::Metrics(f) => (f, |e| e.metrics_stage().map(drop)),
        Command::Report(f) => (f, |e| e.report_stage().map(drop)),
        Command::All(f) => (f, |e| e.run_all().map(drop)),
    };
    let config = flags.resolve()?;
    let experiment = Experiment::load(config, &default_data_dir())?;
    stage(&experiment)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            let code = e.exit_code();
            if let HarnessError::Config(_) = e {
                eprintln!("error: {e}");
            }
            ExitCode::from(code as u8)
        }
    }
}
