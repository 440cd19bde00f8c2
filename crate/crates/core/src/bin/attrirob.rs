use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use attrirob::attacks::PgdObjective;
use attrirob::config::ExperimentConfig;
use attrirob::experiment::{
    run_attack_command, run_consistency_command, run_eval_command, run_simulate_command, run_theorem_command, run_train,
};
use attrirob::{par, Error, Result};

/// Attribution robustness experiments for small ReLU networks.
#[derive(Parser)]
#[command(name = "attrirob", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the top-level and training seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackFlags {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// `topk` for IFIA, or a PGD objective: `ce`, `kl`, `igr`.
    #[arg(long, default_value = "topk")]
    objective: String,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes checkpoint.json and train_log.csv.
    Train(Common),
    /// Attack each test sample; writes attack.csv.
    Attack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: AttackFlags,
    },
    /// Evaluate robustness; writes eval.csv and summary.json.
    Eval(Common),
    /// Cosine/τ scatter for random vectors.
    Simulate(Common),
    /// Natural vs PGD activation consistency.
    Consistency(Common),
    /// Ordering statistics, sequence search and the Pearson demo.
    Theorem(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let (_, log) = run_train(&load(&c)?)?;
            if let Some(r) = log.records.last() {
                println!("epoch {} loss {:.6} nat {:.4} adv {:.4}", r.epoch, r.loss, r.natural_accuracy, r.adversarial_accuracy);
            }
        }
        Command::Attack { common, flags } => {
            let mut cfg = load(&common)?;
            let a = &mut cfg.attack;
            a.epsilon = flags.eps.unwrap_or(a.epsilon);
            a.alpha = flags.alpha.or(a.alpha);
            a.steps = flags.steps.unwrap_or(a.steps);
            a.restarts = flags.restarts.unwrap_or(a.restarts);
            a.k = flags.k.unwrap_or(a.k);
            cfg.validate()?;
            let objective = match flags.objective.as_str() {
                "topk" => None,
                o => Some(o.parse::<PgdObjective>()?),
            };
            print!("{}", run_attack_command(&cfg, objective)?);
        }
        Command::Eval(c) => println!("{}", serde_json::to_string_pretty(&run_eval_command(&load(&c)?)?)?),
        Command::Simulate(c) => println!("{}", serde_json::to_string_pretty(&run_simulate_command(&load(&c)?)?)?),
        Command::Consistency(c) => print!("{}", run_consistency_command(&load(&c)?)?),
        Command::Theorem(c) => println!("{}", serde_json::to_string_pretty(&run_theorem_command(&load(&c)?)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    par::init_from_env();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Divergence(_) => 3,
                _ => 1,
            })
        }
    }
}
