//! Thin command-line front end: argument parsing and config layering only,
//! with all behavior in the library's harness module.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use trajgraph::harness::{
    cmd_ablate, cmd_eval, cmd_sample, cmd_synth, cmd_train, render_metrics_table, AblateAxis,
    RunConfig,
};
use trajgraph::synth::SynthKind;
use trajgraph::Result;

#[derive(Parser)]
#[command(
    name = "trajgraph",
    about = "Train, evaluate, and probe spatio-temporal graph trajectory models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with a leave-one-out scene split and write log + checkpoints
    Train(TrainArgs),
    /// Score a checkpoint with best-of-K sampling
    Eval(EvalArgs),
    /// Sweep one setting (desk-scale) and tabulate the resulting metrics
    Ablate(AblateArgs),
    /// Export observed, ground-truth, and K sampled paths for one window
    Sample(SampleArgs),
    /// Generate synthetic scenes with known dynamics
    Synth(SynthArgs),
}

/// Settings shared by the training-style commands. Precedence: built-in
/// defaults, then `--profile`, then the `--config` file, then explicit
/// flags.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named settings bundle (desk|paper)
    #[arg(long, value_name = "NAME")]
    profile: Option<String>,
    #[arg(long, value_name = "DIR")]
    dataset_dir: Option<PathBuf>,
    /// Scene held out of training and used for evaluation
    #[arg(long, value_name = "NAME")]
    test_scene: Option<String>,
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Samples accumulated per optimizer step
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    #[arg(long, value_name = "F")]
    lr_initial: Option<f64>,
    #[arg(long, value_name = "F")]
    lr_after: Option<f64>,
    /// Last epoch trained at the initial learning rate
    #[arg(long, value_name = "N")]
    lr_switch_epoch: Option<usize>,
    /// Distribution-loss weight
    #[arg(long, value_name = "F")]
    alpha: Option<f64>,
    /// Graph axes to train: S, T, or ST
    #[arg(long, value_name = "S|T|ST")]
    variant: Option<String>,
    /// Samples per window at evaluation time
    #[arg(long, value_name = "N")]
    k: Option<usize>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fraction of training windows held out for checkpoint selection
    #[arg(long, value_name = "F")]
    val_fraction: Option<f64>,
    /// Checkpoint to continue training from
    #[arg(long, value_name = "PATH")]
    resume: Option<PathBuf>,
}

impl ConfigArgs {
    fn build(&self, base: RunConfig) -> Result<RunConfig> {
        let mut config = base;
        if let Some(profile) = &self.profile {
            config.apply_profile(profile)?;
        }
        if let Some(path) = &self.config {
            config.load_file(path)?;
        }
        if let Some(v) = &self.dataset_dir {
            config.dataset_dir = v.clone();
        }
        if let Some(v) = &self.test_scene {
            config.test_scene = Some(v.clone());
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.lr_initial {
            config.lr_initial = v;
        }
        if let Some(v) = self.lr_after {
            config.lr_after = v;
        }
        if let Some(v) = self.lr_switch_epoch {
            config.lr_switch_epoch = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = &self.variant {
            config.variant = v.parse()?;
        }
        if let Some(v) = self.k {
            config.eval_k = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = &self.out {
            config.output_dir = v.clone();
        }
        if let Some(v) = self.val_fraction {
            config.val_fraction = v;
        }
        if let Some(v) = &self.resume {
            config.resume = Some(v.clone());
        }
        Ok(config)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to score
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "data")]
    dataset_dir: PathBuf,
    /// Score only this scene (default: every scene in the directory)
    #[arg(long, value_name = "NAME")]
    test_scene: Option<String>,
    /// Samples per window
    #[arg(long, value_name = "N", default_value_t = 20)]
    k: usize,
    #[arg(long, value_name = "N", default_value_t = 1)]
    seed: u64,
    /// Also write metrics.csv here
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Setting to sweep: alpha or variant
    #[arg(long, value_name = "AXIS")]
    axis: AblateAxis,
    /// Comma-separated values for the axis, e.g. 0,0.1,0.3,0.5 or S,T,ST
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    values: Vec<String>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "data")]
    dataset_dir: PathBuf,
    /// Scene to draw the window from
    #[arg(long, value_name = "NAME")]
    scene: String,
    /// Which sliding window of the scene to export
    #[arg(long, value_name = "N", default_value_t = 0)]
    window: usize,
    /// Number of sampled trajectories
    #[arg(long, value_name = "N", default_value_t = 300)]
    k: usize,
    #[arg(long, value_name = "N", default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene dynamics: linear, crossing, or group
    #[arg(long, value_name = "KIND")]
    kind: SynthKind,
    #[arg(long, value_name = "N", default_value_t = 5)]
    scenes: usize,
    #[arg(long, value_name = "N", default_value_t = 3)]
    peds: usize,
    #[arg(long, value_name = "N", default_value_t = 40)]
    frames: usize,
    #[arg(long, value_name = "N", default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = "data")]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let config = args.config.build(RunConfig::default())?;
            let report = cmd_train(&config)?;
            let last = report.rows.last().expect("training ran at least one epoch");
            println!(
                "trained {} epochs against held-out scene {} (final total loss {:.6})",
                report.rows.len(),
                report.test_scene,
                last.total
            );
            println!("log:        {}", report.log_path.display());
            println!("final ckpt: {}", report.final_path.display());
            println!("best ckpt:  {}", report.best_path.display());
        }
        Command::Eval(args) => {
            let report = cmd_eval(
                &args.checkpoint,
                &args.dataset_dir,
                args.test_scene.as_deref(),
                args.k,
                args.seed,
                args.out.as_deref(),
            )?;
            print!("{}", render_metrics_table(&report));
            if let Some(out) = &args.out {
                println!("wrote {}", out.join("metrics.csv").display());
            }
        }
        Command::Ablate(args) => {
            // Ablations sweep several full training runs, so they start
            // from desk-scale settings unless overridden.
            let mut base = RunConfig::default();
            base.apply_profile("desk")?;
            let config = args.config.build(base)?;
            let rows = cmd_ablate(&config, args.axis, &args.values)?;
            println!("{:<10} {:>10} {:>10} {:>10}", args.axis, "ade", "fde", "var_ade");
            for row in &rows {
                match row.dead_params {
                    None => println!(
                        "{:<10} {:>10.4} {:>10.4} {:>10.4}",
                        row.label, row.metrics.ade, row.metrics.fde, row.metrics.var_ade
                    ),
                    Some(d) => println!(
                        "{:<10} {:>10.4} {:>10.4} {:>10.4}  ({d} gradient-free tensors)",
                        row.label, row.metrics.ade, row.metrics.fde, row.metrics.var_ade
                    ),
                }
            }
            println!(
                "wrote {}",
                config
                    .output_dir
                    .join(format!("ablate_{}.csv", args.axis))
                    .display()
            );
        }
        Command::Sample(args) => {
            let path = cmd_sample(
                &args.checkpoint,
                &args.dataset_dir,
                &args.scene,
                args.window,
                args.k,
                args.seed,
                &args.out,
            )?;
            println!("wrote {}", path.display());
        }
        Command::Synth(args) => {
            let files = cmd_synth(
                &args.out,
                args.kind,
                args.scenes,
                args.peds,
                args.frames,
                args.seed,
            )?;
            for f in &files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
