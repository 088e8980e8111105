//! Labeled bitmap datasets: legitimate traffic (D0), real jamming (D1, test
//! only) and artificial attack data (D1*, training only).

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifest::{write_atomic, Manifest};
use crate::raster::{rasterize, Bitmap, RasterMode, RasterSpec};
use crate::rng::derive_seed;
use crate::sim::{generate, Scenario, SimConfig};

/// Training bitmaps per class at scale 1.
pub const PAPER_TRAIN_PER_CLASS: usize = 4000;
pub const PAPER_VAL: usize = 600;
pub const PAPER_TEST: usize = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Split> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub bitmap: Bitmap,
    /// 0 for legitimate traffic, 1 for real or artificial attacks.
    pub label: u8,
    pub case: Scenario,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<Item>,
    pub spec: RasterSpec,
    pub n_per_bitmap: usize,
}

fn label_of(case: Scenario) -> u8 {
    if case.is_legitimate() {
        0
    } else {
        1
    }
}

/// Splits `n` into `k` near-equal parts, giving the remainder to the first.
fn split_even(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

/// Item counts for one stratum of the reference splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stratum {
    pub split: Split,
    pub case: Scenario,
    pub count: usize,
}

/// The stratum table produced by [`build_reference_splits`] at `scale`.
pub fn reference_strata(scale: f64) -> Result<Vec<Stratum>> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Config(format!("scale {scale} must lie in (0, 1]")));
    }
    let scaled = |n: usize| (scale * n as f64).round() as usize;
    let train = scaled(PAPER_TRAIN_PER_CLASS);
    let val = split_even(scaled(PAPER_VAL), 2);
    let test = split_even(scaled(PAPER_TEST), 2);

    let mut strata = Vec::new();
    let mut push = |split, cases: &[Scenario], total: usize| {
        for (&case, count) in cases.iter().zip(split_even(total, cases.len())) {
            strata.push(Stratum { split, case, count });
        }
    };
    let legit = [Scenario::EmptyChannel, Scenario::Transmitting];
    let artificial = [Scenario::ArtificialUniform2D, Scenario::ArtificialFrame];
    let jammers = [Scenario::JammerUniform, Scenario::JammerGaussian, Scenario::JammerFrame];
    push(Split::Train, &legit, train);
    push(Split::Train, &artificial, train);
    push(Split::Val, &legit, val[0]);
    push(Split::Val, &artificial, val[1]);
    push(Split::Test, &legit, test[0]);
    push(Split::Test, &jammers, test[1]);

    if let Some(s) = strata.iter().find(|s| s.count == 0) {
        return Err(Error::Config(format!(
            "scale {scale} leaves the {} {} stratum empty",
            s.split.name(),
            s.case
        )));
    }
    Ok(strata)
}

/// Simulates and rasterizes the train/val/test splits.
///
/// Each bitmap comes from its own recording of `cfg.n_samples_per_window`
/// samples whose seed is derived from `cfg.rng_seed`, the split, the case and
/// the item index, so the result does not depend on build order.
pub fn build_reference_splits(cfg: &SimConfig, spec: &RasterSpec, scale: f64) -> Result<LabeledDataset> {
    cfg.validate()?;
    spec.validate()?;
    let n = cfg.n_samples_per_window;
    let jobs: Vec<(Split, Scenario, usize)> = reference_strata(scale)?
        .into_iter()
        .flat_map(|s| (0..s.count).map(move |i| (s.split, s.case, i)))
        .collect();

    let items = jobs
        .par_iter()
        .map(|&(split, case, index)| {
            let seed = derive_seed(cfg.rng_seed, &[split.tag() as u64, case.tag() as u64, index as u64]);
            let item_cfg = SimConfig {
                rng_seed: seed,
                ..cfg.clone()
            };
            let rec = generate(&item_cfg, n, case)?;
            Ok(Item {
                bitmap: rasterize(&rec.samples, spec)?,
                label: label_of(case),
                case,
                split,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ds = LabeledDataset {
        items,
        spec: *spec,
        n_per_bitmap: n,
    };
    ds.validate()?;
    Ok(ds)
}

impl LabeledDataset {
    /// Checks split hygiene, label consistency and shape agreement.
    pub fn validate(&self) -> Result<()> {
        for (k, item) in self.items.iter().enumerate() {
            let fail = |why: String| Err(Error::Config(format!("item {k}: {why}")));
            if item.case.is_real_jammer() && item.split != Split::Test {
                return fail(format!("real-jamming bitmap in {} split", item.split.name()));
            }
            if item.case.is_artificial() && item.split == Split::Test {
                return fail("artificial bitmap in test split".into());
            }
            if item.label != label_of(item.case) {
                return fail(format!("label {} inconsistent with case {}", item.label, item.case));
            }
            let b = &item.bitmap;
            if b.height != self.spec.height || b.width != self.spec.width || b.pixels.len() != b.height * b.width {
                return fail("bitmap shape differs from dataset spec".into());
            }
            if b.n_source_samples != self.n_per_bitmap || b.n_dropped > b.n_source_samples {
                return fail("sample bookkeeping differs from dataset".into());
            }
        }
        Ok(())
    }

    pub fn select<'a>(&'a self, split: Split, cases: &'a [Scenario]) -> impl Iterator<Item = &'a Item> + 'a {
        self.items
            .iter()
            .filter(move |it| it.split == split && cases.contains(&it.case))
    }

    pub fn count(&self, split: Split, case: Scenario) -> usize {
        self.select(split, &[case]).count()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.items.iter().filter(|it| it.split == split).count()
    }

    /// Provenance record for the manifest written alongside the dataset.
    pub fn manifest(&self, cfg: &SimConfig, scale: f64) -> Manifest {
        let mut m = Manifest::new();
        m.set("format_version", DATASET_VERSION)
            .set("scale", scale)
            .set("seed", cfg.rng_seed)
            .set("n_per_bitmap", self.n_per_bitmap);
        m.extend(&sim_config_manifest(cfg));
        m.set("raster.height", self.spec.height)
            .set("raster.width", self.spec.width)
            .set("raster.axis_min", self.spec.axis_min)
            .set("raster.axis_max", self.spec.axis_max)
            .set("raster.mode", mode_name(self.spec.mode));
        for split in [Split::Train, Split::Val, Split::Test] {
            for case in Scenario::ALL {
                let c = self.count(split, case);
                if c > 0 {
                    m.set(format!("count.{}.{}", split.name(), case), c);
                }
            }
        }
        m.set("count.total", self.items.len());
        m
    }
}

pub fn mode_name(mode: RasterMode) -> &'static str {
    match mode {
        RasterMode::Binary => "binary",
        RasterMode::CountNormalized => "count",
    }
}

pub fn sim_config_manifest(cfg: &SimConfig) -> Manifest {
    let mut m = Manifest::new();
    m.set("sim.carrier_freq_hz", cfg.carrier_freq_hz)
        .set("sim.bandwidth_hz", cfg.bandwidth_hz)
        .set("sim.n_samples_per_window", cfg.n_samples_per_window)
        .set("sim.noise_floor_power", cfg.noise_floor_power)
        .set("sim.snr_db", cfg.snr_db)
        .set("sim.tdd_idle_fraction", cfg.tdd_idle_fraction)
        .set("sim.jammer_power", cfg.jammer_power)
        .set("sim.frame_inner", cfg.frame_inner)
        .set("sim.frame_outer", cfg.frame_outer)
        .set("sim.beacon_fraction", cfg.beacon_fraction)
        .set("sim.beacon_amplitude", cfg.beacon_amplitude)
        .set("sim.residual_fraction", cfg.residual_fraction)
        .set("sim.rng_seed", cfg.rng_seed);
    m
}

// File layout (little-endian):
//   magic "JAMWATCH-DATASET", u16 version,
//   u32 height, u32 width, f64 axis_min, f64 axis_max, u8 mode,
//   u32 n_per_bitmap, u64 item count,
//   per item: u8 label, u8 case, u8 split, u32 n_dropped, height*width f32,
//   u32 CRC-32 of all preceding bytes.
const DATASET_MAGIC: &[u8; 16] = b"JAMWATCH-DATASET";
pub const DATASET_VERSION: u16 = 1;

pub fn encode(ds: &LabeledDataset) -> Vec<u8> {
    let px = ds.spec.height * ds.spec.width;
    let mut out = Vec::with_capacity(64 + ds.items.len() * (7 + 4 * px));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.spec.height as u32).to_le_bytes());
    out.extend_from_slice(&(ds.spec.width as u32).to_le_bytes());
    out.extend_from_slice(&ds.spec.axis_min.to_le_bytes());
    out.extend_from_slice(&ds.spec.axis_max.to_le_bytes());
    out.push(ds.spec.mode.tag());
    out.extend_from_slice(&(ds.n_per_bitmap as u32).to_le_bytes());
    out.extend_from_slice(&(ds.items.len() as u64).to_le_bytes());
    for it in &ds.items {
        out.extend_from_slice(&[it.label, it.case.tag(), it.split.tag()]);
        out.extend_from_slice(&(it.bitmap.n_dropped as u32).to_le_bytes());
        for p in &it.bitmap.pixels {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<LabeledDataset, String> {
    if bytes.len() < DATASET_MAGIC.len() + 2 + 4 {
        return Err("truncated header".into());
    }
    if &bytes[..16] != DATASET_MAGIC {
        return Err("bad magic".into());
    }
    let version = u16::from_le_bytes([bytes[16], bytes[17]]);
    if version != DATASET_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let mut cur = Cursor { buf: body, pos: 18 };
    let height = cur.u32()? as usize;
    let width = cur.u32()? as usize;
    let axis_min = cur.f64()?;
    let axis_max = cur.f64()?;
    let mode = RasterMode::from_tag(cur.u8()?).ok_or("unknown raster mode")?;
    let n_per_bitmap = cur.u32()? as usize;
    let count = cur.u64()? as usize;
    let px = height.checked_mul(width).ok_or("raster size overflow")?;
    let item_bytes = 7 + 4 * px;
    if count.checked_mul(item_bytes) != Some(body.len() - cur.pos) {
        return Err(format!("item count {count} does not match file size"));
    }
    let crc = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32fast::hash(body) != crc {
        return Err("checksum mismatch".into());
    }
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let label = cur.u8()?;
        let case = Scenario::from_tag(cur.u8()?).ok_or("unknown case tag")?;
        let split = Split::from_tag(cur.u8()?).ok_or("unknown split tag")?;
        let n_dropped = cur.u32()? as usize;
        let pixels = cur
            .take(4 * px)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        items.push(Item {
            bitmap: Bitmap {
                height,
                width,
                pixels,
                n_source_samples: n_per_bitmap,
                n_dropped,
            },
            label,
            case,
            split,
        });
    }
    let ds = LabeledDataset {
        items,
        spec: RasterSpec {
            height,
            width,
            axis_min,
            axis_max,
            mode,
        },
        n_per_bitmap,
    };
    ds.validate().map_err(|e| e.to_string())?;
    Ok(ds)
}

pub fn save(ds: &LabeledDataset, path: &Path) -> Result<()> {
    ds.validate()?;
    write_atomic(path, &encode(ds))
}

pub fn load(path: &Path) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LabeledDataset {
        let cfg = SimConfig {
            rng_seed: 5,
            ..SimConfig::default()
        };
        build_reference_splits(&cfg, &RasterSpec::square(8), 0.01).unwrap()
    }

    #[test]
    fn stratum_counts_at_full_scale() {
        let strata = reference_strata(1.0).unwrap();
        let total = |split: Split, pred: fn(Scenario) -> bool| -> usize {
            strata
                .iter()
                .filter(|s| s.split == split && pred(s.case))
                .map(|s| s.count)
                .sum()
        };
        assert_eq!(total(Split::Train, Scenario::is_legitimate), 4000);
        assert_eq!(total(Split::Train, Scenario::is_artificial), 4000);
        assert_eq!(total(Split::Val, |_| true), 600);
        assert_eq!(total(Split::Test, Scenario::is_legitimate), 400);
        assert_eq!(total(Split::Test, Scenario::is_real_jammer), 400);
        let jam: Vec<usize> = strata
            .iter()
            .filter(|s| s.case.is_real_jammer())
            .map(|s| s.count)
            .collect();
        assert_eq!(jam, vec![134, 133, 133]);
        assert!(strata.iter().all(|s| s.count == 2000 || s.split != Split::Train));
    }

    #[test]
    fn stratum_counts_at_tenth_scale() {
        let strata = reference_strata(0.1).unwrap();
        let sum = |split| strata.iter().filter(|s| s.split == split).map(|s| s.count).sum::<usize>();
        assert_eq!(sum(Split::Train), 800);
        assert_eq!(sum(Split::Val), 60);
        assert_eq!(sum(Split::Test), 80);
    }

    #[test]
    fn bad_scales_are_config_errors() {
        assert!(matches!(reference_strata(0.0), Err(Error::Config(_))));
        assert!(matches!(reference_strata(1.5), Err(Error::Config(_))));
        // 0.001 * 800 = 0.8 -> 1 test item, leaving strata empty.
        assert!(matches!(reference_strata(0.001), Err(Error::Config(_))));
    }

    #[test]
    fn built_dataset_respects_split_hygiene() {
        let ds = small();
        assert_eq!(ds.split_len(Split::Train), 80);
        assert_eq!(ds.split_len(Split::Val), 6);
        assert_eq!(ds.split_len(Split::Test), 8);
        for it in &ds.items {
            if it.case.is_real_jammer() {
                assert_eq!(it.split, Split::Test);
            }
            if it.case.is_artificial() {
                assert_ne!(it.split, Split::Test);
            }
        }
        let test_labels: Vec<u8> = ds.select(Split::Test, &Scenario::ALL).map(|i| i.label).collect();
        assert_eq!(test_labels.iter().filter(|&&l| l == 0).count(), 4);
    }

    #[test]
    fn validate_catches_leaked_jammer() {
        let mut ds = small();
        let k = ds.items.iter().position(|i| i.case.is_real_jammer()).unwrap();
        ds.items[k].split = Split::Train;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = small();
        save(&ds, &path).unwrap();
        assert_eq!(load(&path).unwrap(), ds);
    }

    #[test]
    fn corrupt_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let bytes = encode(&small());

        let mut bad = bytes.clone();
        bad[3] ^= 0xff;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load(&path), Err(Error::Corrupt { .. })));

        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load(&path), Err(Error::Corrupt { .. })));

        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(matches!(load(&path), Err(Error::Corrupt { .. })));

        let mut flipped = bytes.clone();
        let mid = flipped.len() - 20;
        flipped[mid] ^= 0x01;
        std::fs::write(&path, &flipped).unwrap();
        let err = load(&path).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");

        let mut version = bytes;
        version[16] = 9;
        std::fs::write(&path, &version).unwrap();
        assert!(matches!(load(&path), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(encode(&small()), encode(&small()));
    }

    #[test]
    fn manifest_records_counts() {
        let cfg = SimConfig {
            rng_seed: 5,
            ..SimConfig::default()
        };
        let m = small().manifest(&cfg, 0.01);
        assert_eq!(m.get("count.total"), Some("94"));
        assert_eq!(m.get("count.train.empty"), Some("20"));
        assert_eq!(m.get("seed"), Some("5"));
    }
}
