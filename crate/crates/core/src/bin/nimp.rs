//! `nimp`: train, implode, compare against scratch baselines, evaluate
//! bounds and inspect checkpoints.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use network_implosion::app::{
    inspect_table, load_checkpoint, model_bound_inputs, run_baseline, run_bounds, run_eval,
    run_implode, run_train, BoundsRequest, MarginSettings, RunConfig,
};
use network_implosion::bounds::ArchitectureSignature;
use network_implosion::{Error, Result};

#[derive(Parser)]
#[command(
    name = "nimp",
    version,
    about = "Layer pruning for fully-connected ResNets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: `desk` or `full`.
    #[arg(long)]
    preset: Option<String>,
    /// Run seed (model initialization and shuffling).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Units erased per round.
    #[arg(long)]
    k: Option<usize>,
    /// Stop once this many weighted units remain.
    #[arg(long)]
    target: Option<usize>,
}

impl RunArgs {
    fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => {
                return Err(Error::Config(
                    "one of --config or --preset is required".into(),
                ))
            }
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(k) = self.k {
            cfg.implosion.k = k;
        }
        if let Some(t) = self.target {
            cfg.implosion.target_remaining = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
}

#[derive(Args)]
struct MarginArgs {
    /// Margin coefficient, in (0, 1].
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    /// Failure probability, in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Constant of the Rademacher bound.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

#[derive(Args)]
struct BoundsArgs {
    /// Trained checkpoint; needs --config or --preset for its data.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// JSON request: {"signature": {...}, "factors": [...], ...}.
    #[arg(long)]
    signature: Option<PathBuf>,
    /// Input width n0.
    #[arg(long)]
    n0: Option<usize>,
    /// Layer widths n1..nL, comma separated.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    /// Per-layer factors; all 1 when absent.
    #[arg(long, value_delimiter = ',')]
    factors: Option<Vec<f64>>,
    /// Input bound N for --n0/--widths.
    #[arg(long, default_value_t = 1.0)]
    input_bound: f64,
    /// Sample count m for --n0/--widths.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Class count M for --n0/--widths.
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// 1-based index of the erased layer.
    #[arg(long)]
    erase_index: Option<usize>,
    #[command(flatten)]
    margin: MarginArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved run configuration as JSON.
    Config {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train a model from scratch.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train (or load) a model, then erase and retrain until the target depth.
    Implode {
        #[command(flatten)]
        run: RunArgs,
        /// Start from this trained checkpoint instead of training.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Scratch-train shallower models with matched epoch budgets.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        /// Weighted-unit counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<usize>>,
    },
    /// Evaluate region, Rademacher and generalization bounds.
    ///
    /// Sources, in order of precedence: --checkpoint with a run config (bounds
    /// of a trained model on its training split), --signature FILE (JSON), or
    /// --n0 with --widths.
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        args: BoundsArgs,
    },
    /// Accuracy of a checkpoint on a split of the configured dataset.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "val")]
        split: Split,
    },
    /// Per-unit cost table of a checkpoint; with a config, also val accuracy.
    Inspect {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("nimp: stdout: {e}");
        std::process::exit(4);
    }
}

macro_rules! say {
    ($($arg:tt)*) => { emit(&format!("{}\n", format_args!($($arg)*))) };
}

fn print_json<T: serde::Serialize>(v: &T) {
    say!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn bounds(run: &RunArgs, args: BoundsArgs) -> Result<()> {
    let BoundsArgs {
        checkpoint,
        signature,
        n0,
        widths,
        factors,
        input_bound,
        samples,
        classes,
        erase_index,
        margin,
    } = args;
    let quick = match (n0, widths) {
        (Some(n0), Some(w)) => Some((n0, w)),
        (None, None) => None,
        _ => return Err(Error::Config("--n0 and --widths go together".into())),
    };
    let settings = MarginSettings {
        rho: margin.rho,
        delta: margin.delta,
        c: margin.c,
    };
    let inputs = if let Some(ckpt) = checkpoint.as_deref() {
        let cfg = run.load()?;
        let (train_set, _) = cfg.dataset.load()?;
        let model = load_checkpoint(ckpt)?;
        let inputs = model_bound_inputs(&model, &train_set, settings, erase_index)?;
        network_implosion::bounds::BoundReport::evaluate(&inputs)
            .map_err(|e| Error::Config(e.to_string()))?;
        inputs
    } else if let Some(path) = signature.as_deref() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut req: BoundsRequest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(l) = erase_index {
            req.erase_index = l;
        }
        req.inputs()?
    } else if let Some((n0, widths)) = quick {
        BoundsRequest {
            signature: ArchitectureSignature {
                input_width: n0,
                widths,
                input_bound,
                c: margin.c,
                samples,
                classes,
                delta: margin.delta,
                rho: margin.rho,
            },
            factors,
            emp_error: 0.0,
            emp_error_erased: 0.0,
            erase_index: erase_index.unwrap_or(1),
        }
        .inputs()?
    } else {
        return Err(Error::Config(
            "bounds needs --checkpoint, --signature, or --n0 with --widths".into(),
        ));
    };
    let report = run_bounds(&inputs, run.out.as_deref())?;
    print_json(&report);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Config { run } => say!("{}", run.load()?.to_json()),
        Command::Train { run } => {
            let out = run_train(&run.load()?)?;
            say!(
                "val accuracy {} loss {} -> {}",
                out.val.accuracy,
                out.val.loss,
                out.checkpoint.display()
            );
        }
        Command::Implode { run, from } => {
            let out = run_implode(&run.load()?, from.as_deref())?;
            for p in &out.curve {
                say!(
                    "units {:>3} layers {:>4} val accuracy {} macs {} params {}",
                    p.remaining_units,
                    p.remaining_layers,
                    p.val_accuracy.map_or("-".into(), |a| a.to_string()),
                    p.macs,
                    p.params
                );
            }
        }
        Command::Baseline { run, depths } => {
            for p in run_baseline(&run.load()?, depths.as_deref())? {
                say!(
                    "units {:>3} layers {:>4} val accuracy {}",
                    p.remaining_units,
                    p.remaining_layers,
                    p.val_accuracy.map_or("-".into(), |a| a.to_string())
                );
            }
        }
        Command::Bounds { run, args } => bounds(&run, args)?,
        Command::Eval {
            run,
            checkpoint,
            split,
        } => {
            let cfg = run.load()?;
            let model = load_checkpoint(&checkpoint)?;
            let (train_set, val) = cfg.dataset.load()?;
            let data = match split {
                Split::Train => train_set,
                Split::Val => val,
            };
            let e = run_eval(&model, &data)?;
            say!(
                "accuracy {} loss {} samples {}",
                e.accuracy,
                e.loss,
                data.len()
            );
        }
        Command::Inspect { run, checkpoint } => {
            let model = load_checkpoint(&checkpoint)?;
            let val = if run.given() {
                let (_, val) = run.load()?.dataset.load()?;
                Some(run_eval(&model, &val)?)
            } else {
                None
            };
            emit(&inspect_table(&model, val.as_ref()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nimp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
