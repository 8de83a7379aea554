//! Command-line entry point.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use siren_core::data::{ancestral_sample, project_observed, Dataset, Provenance};
use siren_core::experiment::ComparisonConfig;
use siren_core::flow::{Grf, DEFAULT_MAX_ITER};
use siren_core::graph::BayesNet;
use siren_core::math;
use siren_core::model::{iwae_logp, reconstruction_error, sample, Model, Variant};
use siren_core::rng::{init_rng, normal_tensor, seeded};
use siren_core::train::{TrainConfig, Trainer};
use siren_core::Tensor;

use crate::checkpoint::Checkpoint;
use crate::compare::{results_tsv, run_comparison, summary_text};
use crate::hexfloat::{format_hex, parse_float};
use crate::{config, gbn, tsv};

#[derive(Debug, Parser)]
#[command(name = "siren", version, about = "Graphical residual flow VAEs on linear-Gaussian Bayesian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a dataset of observed nodes from a network with CPDs.
    MakeData {
        #[arg(long)]
        gbn: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write a checkpoint.
    Train {
        #[arg(long)]
        gbn: PathBuf,
        #[arg(long, value_parser = parse_variant)]
        structure: Variant,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint instead of a fresh model.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Importance-weighted NLL and reconstruction error on a dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 500)]
        iwae_samples: usize,
        #[arg(long, default_value_t = 10)]
        re_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Refuse to evaluate unless the checkpoint was trained on this network.
        #[arg(long)]
        gbn: Option<PathBuf>,
    },
    /// Draw samples from a trained model.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Round-trip base draws through every flow and report the worst error.
    InvertCheck {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1e-6, value_parser = parse_f64)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the structure comparison experiment.
    Compare {
        #[arg(long)]
        gbn: PathBuf,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Training sizes as multiples of the node count.
        #[arg(long, value_delimiter = ',', default_values_t = [2, 100])]
        regimes: Vec<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_values = ["vanilla", "ind", "fc", "true"])]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',', value_parser = parse_f64, default_values = ["1e-1", "1e-2", "1e-3"])]
        lrs: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        n_test: usize,
        #[arg(long, default_value_t = 500)]
        iwae_samples: usize,
        #[arg(long, default_value_t = 10)]
        re_samples: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
}

/// Training options; names match the configuration keys.
#[derive(Debug, Args)]
struct TrainFlags {
    /// File of `key value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_f64)]
    initial_lr: Option<f64>,
    #[arg(long)]
    lr_patience: Option<usize>,
    #[arg(long, value_parser = parse_f64)]
    lr_factor: Option<f64>,
    #[arg(long, value_parser = parse_f64)]
    lr_floor: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    hidden_multiplier: Option<usize>,
    #[arg(long, value_parser = parse_f64)]
    lip_coeff: Option<f64>,
    #[arg(long)]
    stop_patience: Option<usize>,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    parse_float(s).map_err(|e| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

/// A runtime failure with a short machine-readable kind.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl Display) -> Self {
        Self { kind, message: message.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn load_gbn(path: &Path) -> Result<BayesNet, Failure> {
    gbn::parse_gbn(&read(path)?).map_err(|e| Failure::new("gbn", format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path, g: &BayesNet) -> Result<Dataset, Failure> {
    let d = tsv::read_dataset(&read(path)?).map_err(|e| Failure::new("data", format!("{}: {e}", path.display())))?;
    let expected: Vec<&str> = g.observed().iter().map(|&o| g.id(o)).collect();
    if d.columns.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Failure::new("data", format!("{}: columns do not match the observed nodes of `{}`", path.display(), g.name())));
    }
    Ok(d)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| Failure::new("checkpoint", format!("{}: {e}", path.display())))
}

/// The checkpoint's model holding its best parameters.
fn best_model(ck: &Checkpoint) -> Model {
    let mut model = ck.model.clone();
    ck.trainer.restore_best(&mut model);
    model
}

impl TrainFlags {
    fn resolve(&self) -> Result<TrainConfig, Failure> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            config::apply_text(&mut cfg, &read(path)?).map_err(|e| Failure::new("config", format!("{}: {e}", path.display())))?;
        }
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        take!(initial_lr, lr_patience, lr_factor, lr_floor, epochs, seed, blocks, hidden_multiplier, lip_coeff, stop_patience);
        if let Some(b) = self.batch_size {
            cfg.batch_size = Some(b);
        }
        cfg.validate().map_err(|e| Failure::new("config", e))?;
        Ok(cfg)
    }
}

fn make_data(gbn_path: &Path, n: usize, seed: u64, out: &Path) -> Outcome {
    let g = load_gbn(gbn_path)?;
    let table = ancestral_sample(&g, n, seed).map_err(|e| Failure::new("data", e))?;
    write(out, tsv::write_dataset(&project_observed(&table, &g, seed)))?;
    println!("wrote {n} rows to {}", out.display());
    Ok(())
}

fn train(gbn_path: &Path, variant: Variant, data: &Path, out: &Path, resume: Option<&Path>, flags: &TrainFlags) -> Outcome {
    let g = load_gbn(gbn_path)?;
    let d = load_dataset(data, &g)?;
    let (mut model, mut trainer) = match resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            ck.check_graph(&g).map_err(|e| Failure::new("checkpoint", e))?;
            if ck.variant() != variant {
                return Err(Failure::new("checkpoint", format!("checkpoint holds a `{}` model", ck.variant())));
            }
            let mut trainer = ck.trainer;
            if let Some(e) = flags.epochs {
                trainer.config.epochs = e;
            }
            (ck.model, trainer)
        }
        None => {
            let cfg = flags.resolve()?;
            let model = Model::new(variant, &g, &cfg.model_config(), &mut init_rng(cfg.seed)).map_err(|e| Failure::new("model", e))?;
            let trainer = Trainer::new(&model, cfg).map_err(|e| Failure::new("config", e))?;
            (model, trainer)
        }
    };
    let stop = trainer.run(&mut model, &d.rows, |_| true).map_err(|e| Failure::new("train", e))?;
    let ck = Checkpoint::new(g, model, trainer);
    write(out, ck.to_bytes())?;
    println!("epochs\t{}", ck.trainer.epoch);
    println!("best_loss\t{:.6}\t{}", ck.trainer.best_loss, format_hex(ck.trainer.best_loss));
    println!("stop\t{stop:?}");
    Ok(())
}

fn eval(ckpt: &Path, data: &Path, iwae_samples: usize, re_samples: usize, seed: u64, gbn_path: Option<&Path>) -> Outcome {
    let ck = load_checkpoint(ckpt)?;
    if let Some(p) = gbn_path {
        ck.check_graph(&load_gbn(p)?).map_err(|e| Failure::new("checkpoint", e))?;
    }
    let d = load_dataset(data, &ck.graph)?;
    let model = best_model(&ck);
    let mut rng = seeded(seed);
    let nll = -math::mean(&iwae_logp(&model, &d.rows, iwae_samples, &mut rng).map_err(|e| Failure::new("model", e))?);
    let re = math::mean(&reconstruction_error(&model, &d.rows, re_samples, &mut rng).map_err(|e| Failure::new("model", e))?);
    println!("nll\t{nll:.6}\t{}", format_hex(nll));
    println!("re\t{re:.6}\t{}", format_hex(re));
    Ok(())
}

fn sample_cmd(ckpt: &Path, n: usize, seed: u64, out: &Path) -> Outcome {
    let ck = load_checkpoint(ckpt)?;
    let model = best_model(&ck);
    let rows = sample(&model, n, &mut seeded(seed)).map_err(|e| Failure::new("model", e))?;
    let columns = ck.graph.observed().iter().map(|&o| ck.graph.id(o).to_string()).collect();
    let d = Dataset { columns, rows, provenance: Provenance { gbn: ck.graph.name().to_string(), seed, n } };
    write(out, tsv::write_dataset(&d))?;
    println!("wrote {n} rows to {}", out.display());
    Ok(())
}

/// Worst `‖f⁻¹(f(u)) − u‖∞` over the rows of `u`.
fn round_trip(flow: &Grf, u: &Tensor, cond: Option<&Tensor>, tol: f64, max_iter: usize) -> Result<f64, Failure> {
    let y = flow.forward(u, cond).map_err(|e| Failure::new("flow", e))?;
    // the solver's residual tolerance, tight enough that the round trip
    // error stays below `tol`
    let back = flow.invert(&y, cond, tol * 1e-2, max_iter).map_err(|e| Failure::new("inversion", e))?;
    Ok(back.sub(u).max_abs())
}

fn invert_check(ckpt: &Path, n: usize, tol: f64, max_iter: usize, seed: u64) -> Outcome {
    let ck = load_checkpoint(ckpt)?;
    let Model::Siren(m) = best_model(&ck) else {
        return Err(Failure::new("unsupported", "the vanilla model has no flows to invert"));
    };
    let mut rng = seeded(seed);
    let k = m.latent_dim();
    let prior = round_trip(&m.prior, &normal_tensor(&mut rng, n, k), None, tol, max_iter)?;
    let x = sample(&Model::Siren(m.clone()), n, &mut rng).map_err(|e| Failure::new("model", e))?;
    let encoder = round_trip(&m.encoder, &normal_tensor(&mut rng, n, k), Some(&x), tol, max_iter)?;
    let worst = prior.max(encoder);
    println!("prior\t{prior:e}");
    println!("encoder\t{encoder:e}");
    println!("max_error\t{worst:e}");
    if worst > tol {
        return Err(Failure::new("tolerance", format!("round-trip error {worst:e} exceeds {tol:e}")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn compare(
    gbn_path: &Path,
    runs: usize,
    regimes: &[usize],
    variants: &[Variant],
    lrs: &[f64],
    n_test: usize,
    iwae_samples: usize,
    re_samples: usize,
    jobs: usize,
    out: &Path,
    summary: Option<&Path>,
    flags: &TrainFlags,
) -> Outcome {
    let g = load_gbn(gbn_path)?;
    let train = flags.resolve()?;
    let cfg = ComparisonConfig {
        regimes: regimes.to_vec(),
        variants: variants.to_vec(),
        runs,
        lrs: lrs.to_vec(),
        n_test,
        iwae_samples,
        re_samples,
        seed: train.seed,
        train,
        ..Default::default()
    };
    let cells = run_comparison(&g, &cfg, jobs).map_err(|e| Failure::new("experiment", e))?;
    write(out, results_tsv(&g, &cfg, &cells))?;
    let text = summary_text(&g, &siren_core::experiment::summarize(&cfg, &cells));
    if let Some(p) = summary {
        write(p, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::MakeData { gbn, n, seed, out } => make_data(&gbn, n, seed, &out),
        Command::Train { gbn, structure, data, out, resume, train: flags } => train(&gbn, structure, &data, &out, resume.as_deref(), &flags),
        Command::Eval { ckpt, data, iwae_samples, re_samples, seed, gbn } => eval(&ckpt, &data, iwae_samples, re_samples, seed, gbn.as_deref()),
        Command::Sample { ckpt, n, seed, out } => sample_cmd(&ckpt, n, seed, &out),
        Command::InvertCheck { ckpt, n, tol, max_iter, seed } => invert_check(&ckpt, n, tol, max_iter, seed),
        Command::Compare { gbn, runs, regimes, variants, lrs, n_test, iwae_samples, re_samples, jobs, out, summary, train: flags } => {
            compare(&gbn, runs, &regimes, &variants, &lrs, n_test, iwae_samples, re_samples, jobs, &out, summary.as_deref(), &flags)
        }
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a usage error, 2 on a runtime failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error\t{}\t{}", f.kind, f.message.replace(['\n', '\t'], " "));
            2
        }
    }
}
