//! File-level orchestration behind the command-line tool: dataset
//! generation, training, evaluation and the low-dimensional likelihood check.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::dataset::{self, LabeledDataset, Split};
use crate::detector::{
    bitmap_input, cae_errors, fa_md_curves, score_cae, score_cnn, theorem1_check, threshold_grid, CaeCalibration,
    DetectionReport, Scorer, Theorem1Report, Toy, DEFAULT_GRID_POINTS,
};
use crate::error::{Error, Result};
use crate::manifest::{write_atomic, Manifest};
use crate::neural::{checkpoint, train, Arch, History, Loss, Network, TrainConfig, TrainData};
use crate::raster::{RasterMode, RasterSpec};
use crate::rng::derive_seed;
use crate::sim::{JammerKind, Scenario, SimConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "JAMWATCH_THREADS";

pub const DATASET_FILE: &str = "dataset.bin";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

/// Caps the global worker pool from `JAMWATCH_THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Usage(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    // A pool that already exists (tests, repeated calls) is left as is.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Provenance written next to the artifacts of one command.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command: String,
    pub config: Manifest,
    pub seeds: Vec<(String, u64)>,
    pub artifacts: Vec<PathBuf>,
    pub duration: Duration,
}

impl RunManifest {
    pub fn render(&self) -> Result<String> {
        let mut m = Manifest::new();
        m.set("command", &self.command).set("version", VERSION);
        for (name, seed) in &self.seeds {
            m.set(format!("seed.{name}"), seed);
        }
        for (k, v) in self.config.entries() {
            m.set(format!("config.{k}"), v);
        }
        for (k, path) in self.artifacts.iter().enumerate() {
            if !path.exists() {
                return Err(Error::Precondition(format!("artifact {} was not written", path.display())));
            }
            m.set(format!("artifact.{k}"), path.display());
        }
        m.set("duration_s", format!("{:.3}", self.duration.as_secs_f64()));
        Ok(m.render())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render()?.as_bytes())
    }
}

/// Everything `generate` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateRequest {
    pub sim: SimConfig,
    pub raster: RasterSpec,
    pub scale: f64,
}

impl Default for GenerateRequest {
    fn default() -> Self {
        GenerateRequest {
            sim: SimConfig::default(),
            raster: RasterSpec::default(),
            scale: 1.0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("{key}: cannot parse {value:?}")))
}

impl GenerateRequest {
    /// Applies one `key=value` setting. Keys are the short flag names (`n`,
    /// `resolution`, `scale`, `seed`, `mode`) or the `sim.*` / `raster.*`
    /// names used in dataset manifests.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.sim;
        match key {
            "n" | "sim.n_samples_per_window" | "n_per_bitmap" => s.n_samples_per_window = parse_value(key, value)?,
            "seed" | "sim.rng_seed" => s.rng_seed = parse_value(key, value)?,
            "scale" => self.scale = parse_value(key, value)?,
            "resolution" => {
                let r = parse_value(key, value)?;
                self.raster.height = r;
                self.raster.width = r;
            }
            "raster.height" => self.raster.height = parse_value(key, value)?,
            "raster.width" => self.raster.width = parse_value(key, value)?,
            "raster.axis_min" => self.raster.axis_min = parse_value(key, value)?,
            "raster.axis_max" => self.raster.axis_max = parse_value(key, value)?,
            "mode" | "raster.mode" => {
                self.raster.mode = match value.trim() {
                    "binary" => RasterMode::Binary,
                    "count" => RasterMode::CountNormalized,
                    other => return Err(Error::Usage(format!("{key}: unknown raster mode {other:?} (binary, count)"))),
                }
            }
            "sim.carrier_freq_hz" => s.carrier_freq_hz = parse_value(key, value)?,
            "sim.bandwidth_hz" => s.bandwidth_hz = parse_value(key, value)?,
            "sim.noise_floor_power" => s.noise_floor_power = parse_value(key, value)?,
            "sim.snr_db" => s.snr_db = parse_value(key, value)?,
            "sim.tdd_idle_fraction" => s.tdd_idle_fraction = parse_value(key, value)?,
            "sim.jammer_power" => s.jammer_power = parse_value(key, value)?,
            "sim.frame_inner" => s.frame_inner = parse_value(key, value)?,
            "sim.frame_outer" => s.frame_outer = parse_value(key, value)?,
            "sim.beacon_fraction" => s.beacon_fraction = parse_value(key, value)?,
            "sim.beacon_amplitude" => s.beacon_amplitude = parse_value(key, value)?,
            "sim.residual_fraction" => s.residual_fraction = parse_value(key, value)?,
            // Informational fields of a dataset manifest.
            k if k == "format_version" || k.starts_with("count.") => {}
            other => return Err(Error::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_manifest(&mut self, m: &Manifest) -> Result<()> {
        for (k, v) in m.entries() {
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.raster.validate()?;
        dataset::reference_strata(self.scale).map(|_| ())
    }
}

pub fn generate(req: &GenerateRequest, out_dir: &Path) -> Result<(LabeledDataset, RunManifest)> {
    req.validate()?;
    let ds = dataset::build_reference_splits(&req.sim, &req.raster, req.scale)?;
    create_dir(out_dir)?;
    let path = out_dir.join(DATASET_FILE);
    dataset::save(&ds, &path)?;
    let run = RunManifest {
        config: ds.manifest(&req.sim, req.scale),
        seeds: vec![("sim".into(), req.sim.rng_seed)],
        artifacts: vec![path],
        ..RunManifest::default()
    };
    Ok((ds, run))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn inputs<'a>(items: impl Iterator<Item = &'a dataset::Item>) -> (Vec<Vec<f64>>, Vec<f64>) {
    items.map(|it| (bitmap_input(&it.bitmap), it.label as f64)).unzip()
}

const LEGITIMATE: [Scenario; 2] = [Scenario::EmptyChannel, Scenario::Transmitting];
const TWO_CLASS: [Scenario; 4] = [
    Scenario::EmptyChannel,
    Scenario::Transmitting,
    Scenario::ArtificialUniform2D,
    Scenario::ArtificialFrame,
];

/// Builds and trains a fresh `arch` model on `ds`.
///
/// The CNN learns legitimate (0) against artificial (1) bitmaps; the
/// autoencoder reconstructs legitimate bitmaps only. Weights are initialized
/// from `cfg.rng_seed`.
pub fn train_model(ds: &LabeledDataset, arch: Arch, cfg: &TrainConfig) -> Result<(Network, History)> {
    let res = ds.spec.height;
    if ds.spec.width != res {
        return Err(Error::Precondition(format!(
            "models need square bitmaps, dataset is {}x{}",
            ds.spec.height, ds.spec.width
        )));
    }
    let (mut net, loss, cases): (Network, Loss, &[Scenario]) = match arch {
        Arch::Cnn => (Network::cnn(res)?, Loss::Bce, &TWO_CLASS),
        Arch::Cae => (Network::cae(res)?, Loss::Mse, &LEGITIMATE),
        Arch::Mlp => return Err(Error::Usage("the mlp is only used by the theorem1 check".into())),
    };
    let (tx, ty) = inputs(ds.select(Split::Train, cases));
    let (vx, vy) = inputs(ds.select(Split::Val, cases));
    for (split, x, y) in [("train", &tx, &ty), ("val", &vx, &vy)] {
        let d0 = y.iter().filter(|&&l| l == 0.0).count();
        if d0 == 0 || (arch == Arch::Cnn && d0 == y.len()) || x.is_empty() {
            return Err(Error::Precondition(format!(
                "{} training needs {} {split} items (found {d0} legitimate of {})",
                arch.name(),
                if arch == Arch::Cnn { "legitimate and artificial" } else { "legitimate" },
                y.len()
            )));
        }
    }
    let (train_data, val_data) = match arch {
        Arch::Cnn => (TrainData::labeled(tx, ty)?, TrainData::labeled(vx, vy)?),
        _ => (TrainData::reconstruct(tx), TrainData::reconstruct(vx)),
    };
    net.init(derive_seed(cfg.rng_seed, &[arch.tag() as u64]));
    let history = train(&mut net, &train_data, &val_data, loss, cfg)?;
    Ok((net, history))
}

pub fn train_config_manifest(cfg: &TrainConfig) -> Manifest {
    let mut m = Manifest::new();
    m.set("learning_rate", cfg.learning_rate)
        .set("batch_size", cfg.batch_size)
        .set("max_epochs", cfg.max_epochs)
        .set("patience", cfg.patience)
        .set("seed", cfg.rng_seed);
    m
}

pub fn checkpoint_path(out_dir: &Path, arch: Arch) -> PathBuf {
    out_dir.join(format!("{}.ckpt", arch.name()))
}

pub fn history_path(out_dir: &Path, arch: Arch) -> PathBuf {
    out_dir.join(format!("{}-history.csv", arch.name()))
}

pub fn train_file(
    dataset_path: &Path,
    arch: Arch,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<(Network, History, RunManifest)> {
    let ds = dataset::load(dataset_path)?;
    let (net, history) = train_model(&ds, arch, cfg)?;
    create_dir(out_dir)?;
    let ckpt = checkpoint_path(out_dir, arch);
    let hist = history_path(out_dir, arch);
    checkpoint::save(&net, &ckpt)?;
    write_atomic(&hist, history.to_csv().as_bytes())?;
    let mut config = train_config_manifest(cfg);
    config
        .set("model", arch.name())
        .set("dataset", dataset_path.display())
        .set("resolution", ds.spec.height)
        .set("param_count", net.param_count())
        .set("epochs_run", history.epochs.len())
        .set("best_epoch", history.best_epoch);
    let run = RunManifest {
        config,
        seeds: vec![("train".into(), cfg.rng_seed)],
        artifacts: vec![ckpt, hist],
        ..RunManifest::default()
    };
    Ok((net, history, run))
}

/// Test subsets the detectors are scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Jammer(JammerKind),
    Pooled,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        TestKind::Jammer(JammerKind::Uniform),
        TestKind::Jammer(JammerKind::Gaussian),
        TestKind::Jammer(JammerKind::Frame),
        TestKind::Pooled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Jammer(k) => k.name(),
            TestKind::Pooled => "pooled",
        }
    }

    fn admits(self, case: Scenario) -> bool {
        match self {
            TestKind::Jammer(k) => case.is_legitimate() || case == k.scenario(),
            TestKind::Pooled => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub arch: Arch,
    pub reports: Vec<(TestKind, DetectionReport)>,
}

impl ModelEvaluation {
    pub fn report(&self, kind: TestKind) -> &DetectionReport {
        &self.reports.iter().find(|(k, _)| *k == kind).expect("every kind is evaluated").1
    }
}

/// Scores the test split with `net` and builds one report per test kind.
pub fn evaluate_model(ds: &LabeledDataset, net: &Network, target_rate: f64) -> Result<ModelEvaluation> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::Usage(format!("target rate {target_rate} must lie in (0, 1)")));
    }
    let test: Vec<&dataset::Item> = ds.items.iter().filter(|it| it.split == Split::Test).collect();
    if test.is_empty() {
        return Err(Error::Precondition("dataset has no test split".into()));
    }
    let bitmaps: Vec<_> = test.iter().map(|it| &it.bitmap).collect();
    let labels: Vec<u8> = test.iter().map(|it| it.label).collect();
    let scores = match net.arch {
        Arch::Cnn => score_cnn(net, &bitmaps, &labels)?,
        Arch::Cae => {
            let calib: Vec<_> = ds.select(Split::Train, &LEGITIMATE).map(|it| &it.bitmap).collect();
            if calib.is_empty() {
                return Err(Error::Precondition("no legitimate training bitmaps to calibrate the cae".into()));
            }
            let cal = CaeCalibration::fit(&cae_errors(net, &calib)?)?;
            score_cae(net, &bitmaps, &labels, &cal)?
        }
        Arch::Mlp => return Err(Error::Usage("mlp checkpoints cannot score bitmaps".into())),
    };
    let grid = threshold_grid(DEFAULT_GRID_POINTS);
    let mut reports = Vec::new();
    for kind in TestKind::ALL {
        let subset = scores.filter(|i| kind.admits(test[i].case));
        if !subset.labels.contains(&0) || !subset.labels.contains(&1) {
            return Err(Error::Precondition(format!(
                "test split lacks legitimate or {} items",
                kind.name()
            )));
        }
        reports.push((kind, fa_md_curves(&subset, &grid, target_rate)?));
    }
    Ok(ModelEvaluation { arch: net.arch, reports })
}

pub fn report_path(out_dir: &Path, arch: Arch, kind: TestKind) -> PathBuf {
    out_dir.join(format!("{}-{}.csv", arch.name(), kind.name()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| x.to_string())
}

/// One row per model and test kind.
pub fn summary_csv(evals: &[ModelEvaluation]) -> String {
    let mut out = String::from("model,kind,tau_fa,tau_md,separation,auc\n");
    for e in evals {
        for (kind, r) in &e.reports {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.arch.name(),
                kind.name(),
                opt(r.tau_fa),
                opt(r.tau_md),
                r.separation,
                r.auc
            ));
        }
    }
    out
}

/// Relative separation gain of the CNN over the autoencoder per test kind.
pub fn comparison_csv(cnn: &ModelEvaluation, cae: &ModelEvaluation) -> String {
    let mut out = String::from("kind,separation_cnn,separation_cae,gain\n");
    for kind in TestKind::ALL {
        let (a, b) = (cnn.report(kind).separation, cae.report(kind).separation);
        let gain = if b != 0.0 { ((a - b) / b).to_string() } else { "nan".into() };
        out.push_str(&format!("{},{a},{b},{gain}\n", kind.name()));
    }
    out
}

fn load_model(path: &Path, want: Arch) -> Result<Network> {
    let net = checkpoint::load(path)?;
    if net.arch != want {
        return Err(Error::Precondition(format!(
            "{} holds a {} model, expected {}",
            path.display(),
            net.arch.name(),
            want.name()
        )));
    }
    Ok(net)
}

pub fn eval_files(
    dataset_path: &Path,
    cnn: Option<&Path>,
    cae: Option<&Path>,
    target_rate: f64,
    out_dir: &Path,
) -> Result<(Vec<ModelEvaluation>, RunManifest)> {
    if cnn.is_none() && cae.is_none() {
        return Err(Error::Usage("eval needs --cnn, --cae or both".into()));
    }
    let ds = dataset::load(dataset_path)?;
    let mut evals = Vec::new();
    let mut config = Manifest::new();
    config.set("dataset", dataset_path.display()).set("target_rate", target_rate);
    for (path, arch) in [(cnn, Arch::Cnn), (cae, Arch::Cae)] {
        if let Some(p) = path {
            evals.push(evaluate_model(&ds, &load_model(p, arch)?, target_rate)?);
            config.set(format!("checkpoint.{}", arch.name()), p.display());
        }
    }
    create_dir(out_dir)?;
    let mut artifacts = Vec::new();
    for e in &evals {
        for (kind, r) in &e.reports {
            let p = report_path(out_dir, e.arch, *kind);
            write_atomic(&p, r.to_csv().as_bytes())?;
            artifacts.push(p);
        }
    }
    let summary = out_dir.join(SUMMARY_FILE);
    write_atomic(&summary, summary_csv(&evals).as_bytes())?;
    artifacts.push(summary);
    if let [a, b] = evals.as_slice() {
        let p = out_dir.join(COMPARISON_FILE);
        write_atomic(&p, comparison_csv(a, b).as_bytes())?;
        artifacts.push(p);
    }
    let run = RunManifest {
        config,
        artifacts,
        ..RunManifest::default()
    };
    Ok((evals, run))
}

pub fn theorem1_path(out_dir: &Path, toy: Toy) -> PathBuf {
    out_dir.join(format!("theorem1-{}.csv", toy.name()))
}

pub fn theorem1_file(
    toy: Toy,
    n_train: usize,
    cfg: &TrainConfig,
    scorer: Scorer,
    out_dir: &Path,
) -> Result<(Theorem1Report, RunManifest)> {
    let report = theorem1_check(toy, n_train, cfg, scorer)?;
    create_dir(out_dir)?;
    let path = theorem1_path(out_dir, toy);
    write_atomic(&path, report.to_csv().as_bytes())?;
    let mut config = train_config_manifest(cfg);
    config.set("toy", toy.name()).set("n_train", n_train);
    let run = RunManifest {
        config,
        seeds: vec![("theorem1".into(), cfg.rng_seed)],
        artifacts: vec![path],
        ..RunManifest::default()
    };
    Ok((report, run))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_keys_apply() {
        let mut req = GenerateRequest::default();
        req.apply("n", "64").unwrap();
        req.apply("resolution", "32").unwrap();
        req.apply("sim.snr_db", "15").unwrap();
        req.apply("mode", "count").unwrap();
        assert_eq!(req.sim.n_samples_per_window, 64);
        assert_eq!((req.raster.height, req.raster.width), (32, 32));
        assert_eq!(req.sim.snr_db, 15.0);
        assert_eq!(req.raster.mode, RasterMode::CountNormalized);
        assert!(req.apply("colour", "red").unwrap_err().is_usage());
        assert!(req.apply("n", "many").unwrap_err().is_usage());
    }

    #[test]
    fn dataset_manifest_round_trips_as_config() {
        let mut req = GenerateRequest::default();
        req.sim.jammer_power = 0.5;
        req.scale = 0.01;
        let ds = LabeledDataset {
            items: vec![],
            spec: req.raster,
            n_per_bitmap: req.sim.n_samples_per_window,
        };
        let mut back = GenerateRequest::default();
        back.apply_manifest(&ds.manifest(&req.sim, req.scale)).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn run_manifest_requires_artifacts() {
        let run = RunManifest {
            artifacts: vec![PathBuf::from("/nonexistent/x.csv")],
            ..RunManifest::default()
        };
        assert!(matches!(run.render(), Err(Error::Precondition(_))));
    }

    #[test]
    fn test_kinds_partition_the_jammers() {
        for case in Scenario::ALL.into_iter().filter(|c| c.is_real_jammer()) {
            let n = TestKind::ALL[..3].iter().filter(|k| k.admits(case)).count();
            assert_eq!(n, 1);
            assert!(TestKind::Pooled.admits(case));
        }
    }
}
