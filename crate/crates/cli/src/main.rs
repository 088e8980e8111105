//! `jamwatch`: generate constellation datasets, train the detectors, evaluate
//! them and run the likelihood-equivalence check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use jamwatch::dataset::{self, Split};
use jamwatch::detector::{Scorer, Toy, DEFAULT_TARGET_RATE};
use jamwatch::manifest::Manifest;
use jamwatch::neural::{Arch, TrainConfig};
use jamwatch::pipeline::{self, GenerateRequest, RunManifest};
use jamwatch::raster::{self, RasterSpec};
use jamwatch::sim;

#[derive(Parser)]
#[command(name = "jamwatch", version, about = "Jamming detection on IQ constellation bitmaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate recordings and write the train/val/test bitmap dataset.
    Generate(GenerateArgs),
    /// Train the CNN or the autoencoder on a dataset.
    Train(TrainArgs),
    /// Score the test split and write FA/MD reports.
    Eval(EvalArgs),
    /// Compare a two-class MLP with the exact likelihood on a 2-D toy.
    Theorem1(Theorem1Args),
    /// Write one bitmap as a plain PGM image.
    ExportPgm(ExportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// key=value settings applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// IQ samples per bitmap.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: Option<u64>,
    /// Bitmap side in pixels.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    resolution: Option<u64>,
    /// Fraction of the reference split sizes (4000/600/800).
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Binary,
    Count,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Cnn,
    Cae,
}

impl Model {
    fn arch(self) -> Arch {
        match self {
            Model::Cnn => Arch::Cnn,
            Model::Cae => Arch::Cae,
        }
    }
}

#[derive(Args)]
struct Optimizer {
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_epochs: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    patience: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Optimizer {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size as usize,
            max_epochs: self.max_epochs as usize,
            patience: self.patience as usize,
            rng_seed: self.seed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opt: Optimizer,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    cnn: Option<PathBuf>,
    #[arg(long)]
    cae: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Only the test split can be scored.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = DEFAULT_TARGET_RATE)]
    target_rate: f64,
}

#[derive(Args)]
struct Theorem1Args {
    /// gauss, mixture or ring.
    #[arg(long, value_parser = parse_toy)]
    toy: Toy,
    #[arg(long, default_value_t = 10_000)]
    n_train: usize,
    /// Score with the likelihood itself instead of a trained MLP.
    #[arg(long)]
    glrt_vs_glrt: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opt: Optimizer,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, conflicts_with = "recording", requires = "index")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    index: Option<usize>,
    /// IQ recording file; its first window is rasterized.
    #[arg(long, required_unless_present = "dataset")]
    recording: Option<PathBuf>,
    /// Bitmap side used for recordings.
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(2..))]
    resolution: u64,
    /// Samples per window used for recordings; defaults to the whole file.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_toy(s: &str) -> std::result::Result<Toy, String> {
    s.parse().map_err(|e: jamwatch::Error| e.to_string())
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn finish(mut run: RunManifest, path: &Path, started: Instant) -> Result<()> {
    run.command = command_line();
    run.duration = started.elapsed();
    run.write(path)?;
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let started = Instant::now();
    let mut req = GenerateRequest::default();
    if let Some(path) = &a.config {
        req.apply_manifest(&Manifest::read(path)?)
            .with_context(|| format!("in config file {}", path.display()))?;
    }
    if let Some(n) = a.n {
        req.sim.n_samples_per_window = n as usize;
    }
    if let Some(r) = a.resolution {
        req.raster.height = r as usize;
        req.raster.width = r as usize;
    }
    if let Some(s) = a.scale {
        req.scale = s;
    }
    if let Some(s) = a.seed {
        req.sim.rng_seed = s;
    }
    match a.mode {
        Some(Mode::Binary) => req.raster.mode = raster::RasterMode::Binary,
        Some(Mode::Count) => req.raster.mode = raster::RasterMode::CountNormalized,
        None => {}
    }
    let (ds, run) = pipeline::generate(&req, &a.out)?;
    println!(
        "wrote {} bitmaps ({} train, {} val, {} test) to {}",
        ds.items.len(),
        ds.split_len(Split::Train),
        ds.split_len(Split::Val),
        ds.split_len(Split::Test),
        a.out.join(pipeline::DATASET_FILE).display()
    );
    finish(run, &a.out.join("generate.manifest"), started)
}

fn train(a: &TrainArgs) -> Result<()> {
    let started = Instant::now();
    let arch = a.model.arch();
    let (net, history, run) = pipeline::train_file(&a.dataset, arch, &a.opt.config(), &a.out)?;
    let last = history.epochs.last().expect("at least one epoch");
    println!(
        "{}: {} parameters, {} epochs (best {}), final train {:.4e} val {:.4e}",
        arch.name(),
        net.param_count(),
        history.epochs.len(),
        history.best_epoch,
        last.train_loss,
        last.val_loss
    );
    finish(run, &a.out.join(format!("train-{}.manifest", arch.name())), started)
}

fn eval(a: &EvalArgs) -> Result<()> {
    let started = Instant::now();
    if a.split != "test" {
        return Err(jamwatch::Error::Usage(format!(
            "--split {:?}: evaluation only scores the test split",
            a.split
        ))
        .into());
    }
    let (evals, run) = pipeline::eval_files(&a.dataset, a.cnn.as_deref(), a.cae.as_deref(), a.target_rate, &a.out)?;
    for e in &evals {
        for (kind, r) in &e.reports {
            println!(
                "{} {:8} separation {:.3} auc {:.4}",
                e.arch.name(),
                kind.name(),
                r.separation,
                r.auc
            );
        }
    }
    finish(run, &a.out.join("eval.manifest"), started)
}

fn theorem1(a: &Theorem1Args) -> Result<()> {
    let started = Instant::now();
    let scorer = if a.glrt_vs_glrt { Scorer::Glrt } else { Scorer::Mlp };
    let (r, run) = pipeline::theorem1_file(a.toy, a.n_train, &a.opt.config(), scorer, &a.out)?;
    let rho = r.spearman.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
    println!(
        "{}: spearman {rho}, auc gap {:.4} ({})",
        a.toy.name(),
        r.auc_gap,
        if r.passed() { "equivalent" } else { "not equivalent" }
    );
    finish(run, &a.out.join(format!("theorem1-{}.manifest", a.toy.name())), started)
}

fn export_pgm(a: &ExportArgs) -> Result<()> {
    let bitmap = match (&a.dataset, &a.recording) {
        (Some(path), _) => {
            let ds = dataset::load(path)?;
            let index = a.index.expect("clap enforces --index with --dataset");
            let count = ds.items.len();
            ds.items
                .into_iter()
                .nth(index)
                .ok_or_else(|| jamwatch::Error::Usage(format!("--index {index} out of range (dataset has {count} items)")))?
                .bitmap
        }
        (None, Some(path)) => {
            let rec = sim::read_recording(path)?;
            let n = a.n.map_or(rec.len(), |n| n as usize);
            let spec = RasterSpec::square(a.resolution as usize);
            raster::window_stream(&rec, n, &spec)?
                .into_iter()
                .next()
                .ok_or_else(|| jamwatch::Error::Usage(format!("recording has fewer than {n} samples")))?
        }
        (None, None) => unreachable!("clap requires --dataset or --recording"),
    };
    raster::export_pgm(&bitmap, &a.out)?;
    println!("wrote {}x{} bitmap to {}", bitmap.width, bitmap.height, a.out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    pipeline::configure_threads()?;
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Theorem1(a) => theorem1(a),
        Command::ExportPgm(a) => export_pgm(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<jamwatch::Error>().is_some_and(|e| e.is_usage());
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
