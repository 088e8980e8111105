//! Parametric IQ signal simulator.
//!
//! Stands in for the monitoring radio: every recording is produced at
//! normalized complex baseband from a [`SimConfig`] and a seed. Four recording
//! cases are modeled:
//!
//! * empty channel: receiver noise plus a sparse beacon burst,
//! * transmitting channel: unequalized 4-QAM (one complex gain per recording)
//!   with AWGN, interleaved with idle TDD gaps,
//! * jammer on: uniform, Gaussian, or frame-shaped noise with a small residual
//!   of legitimate beacon attempts,
//! * artificial attack data: uniform over the bitmap domain or over a frame.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex32;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Half-width of the IQ domain covered by the bitmaps.
pub const DOMAIN_HALF_WIDTH: f64 = 1.5;

/// Amplitude of each 4-QAM coordinate for unit-energy symbols.
pub const QAM4_AMPLITUDE: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Carried for bookkeeping only; the simulator runs at baseband.
    pub carrier_freq_hz: f64,
    /// Carried for bookkeeping only.
    pub bandwidth_hz: f64,
    pub n_samples_per_window: usize,
    pub noise_floor_power: f64,
    /// SNR of the transmitted symbols relative to their received power.
    /// `f64::INFINITY` disables symbol noise.
    pub snr_db: f64,
    pub tdd_idle_fraction: f64,
    /// Mean jammer sample power. The default sits about 6 dB above the mean
    /// received power of the legitimate constellation, so the uniform jammer
    /// overfills the bitmap window.
    pub jammer_power: f64,
    pub frame_inner: f64,
    pub frame_outer: f64,
    /// Fraction of an empty-channel recording occupied by the beacon burst.
    pub beacon_fraction: f64,
    /// Magnitude of beacon symbols.
    pub beacon_amplitude: f64,
    /// Fraction of jammer samples carrying a residual legitimate symbol.
    pub residual_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            carrier_freq_hz: 3.75e9,
            bandwidth_hz: 20e6,
            n_samples_per_window: 256,
            noise_floor_power: 0.01,
            snr_db: 20.0,
            tdd_idle_fraction: 0.5,
            jammer_power: 3.0,
            frame_inner: 0.8,
            frame_outer: 1.2,
            beacon_fraction: 0.04,
            beacon_amplitude: 0.35,
            residual_fraction: 0.02,
            rng_seed: 0,
        }
    }
}

fn check_fraction(name: &str, v: f64, max: f64) -> Result<()> {
    if !(0.0..=max).contains(&v) {
        return Err(Error::Config(format!("{name} = {v} must lie in [0, {max}]")));
    }
    Ok(())
}

fn check_power(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples_per_window == 0 {
            return Err(Error::Config("n_samples_per_window must be positive".into()));
        }
        check_power("noise_floor_power", self.noise_floor_power)?;
        check_power("jammer_power", self.jammer_power)?;
        check_power("beacon_amplitude", self.beacon_amplitude)?;
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db is NaN".into()));
        }
        check_fraction("tdd_idle_fraction", self.tdd_idle_fraction, 1.0)?;
        check_fraction("beacon_fraction", self.beacon_fraction, 0.05)?;
        check_fraction("residual_fraction", self.residual_fraction, 0.02)?;
        self.validate_frame()
    }

    fn validate_frame(&self) -> Result<()> {
        let (inner, outer) = (self.frame_inner, self.frame_outer);
        if !(inner > 0.0 && inner < outer && outer <= DOMAIN_HALF_WIDTH) {
            return Err(Error::Config(format!(
                "frame bounds must satisfy 0 < inner < outer <= {DOMAIN_HALF_WIDTH}, got inner={inner} outer={outer}"
            )));
        }
        Ok(())
    }

    /// Half-width of the square on which the uniform jammer draws samples,
    /// chosen so the mean sample power equals `jammer_power`.
    pub fn uniform_jammer_half_width(&self) -> f64 {
        (1.5 * self.jammer_power).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    EmptyChannel,
    Transmitting,
    JammerUniform,
    JammerGaussian,
    JammerFrame,
    ArtificialUniform2D,
    ArtificialFrame,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::EmptyChannel,
        Scenario::Transmitting,
        Scenario::JammerUniform,
        Scenario::JammerGaussian,
        Scenario::JammerFrame,
        Scenario::ArtificialUniform2D,
        Scenario::ArtificialFrame,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Scenario> {
        Scenario::ALL.get(tag as usize).copied()
    }

    /// Legitimate traffic, i.e. hypothesis H0.
    pub fn is_legitimate(self) -> bool {
        matches!(self, Scenario::EmptyChannel | Scenario::Transmitting)
    }

    pub fn is_real_jammer(self) -> bool {
        matches!(
            self,
            Scenario::JammerUniform | Scenario::JammerGaussian | Scenario::JammerFrame
        )
    }

    pub fn is_artificial(self) -> bool {
        matches!(self, Scenario::ArtificialUniform2D | Scenario::ArtificialFrame)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::EmptyChannel => "empty",
            Scenario::Transmitting => "transmitting",
            Scenario::JammerUniform => "jammer-uniform",
            Scenario::JammerGaussian => "jammer-gaussian",
            Scenario::JammerFrame => "jammer-frame",
            Scenario::ArtificialUniform2D => "artificial-uniform2d",
            Scenario::ArtificialFrame => "artificial-frame",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JammerKind {
    Uniform,
    Gaussian,
    Frame,
}

impl JammerKind {
    pub const ALL: [JammerKind; 3] = [JammerKind::Uniform, JammerKind::Gaussian, JammerKind::Frame];

    pub fn scenario(self) -> Scenario {
        match self {
            JammerKind::Uniform => Scenario::JammerUniform,
            JammerKind::Gaussian => Scenario::JammerGaussian,
            JammerKind::Frame => Scenario::JammerFrame,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            JammerKind::Uniform => "uniform",
            JammerKind::Gaussian => "gaussian",
            JammerKind::Frame => "frame",
        }
    }
}

impl FromStr for JammerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(JammerKind::Uniform),
            "gaussian" => Ok(JammerKind::Gaussian),
            "frame" => Ok(JammerKind::Frame),
            other => Err(Error::Usage(format!("unknown jammer kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtificialKind {
    Uniform2D,
    Frame,
}

impl ArtificialKind {
    pub fn scenario(self) -> Scenario {
        match self {
            ArtificialKind::Uniform2D => Scenario::ArtificialUniform2D,
            ArtificialKind::Frame => Scenario::ArtificialFrame,
        }
    }
}

impl FromStr for ArtificialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform2d" => Ok(ArtificialKind::Uniform2D),
            "frame" => Ok(ArtificialKind::Frame),
            other => Err(Error::Usage(format!("unknown artificial kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqRecording {
    pub samples: Vec<Complex32>,
    pub scenario: Scenario,
    pub seed_used: u64,
}

impl IqRecording {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::Usage("sample count must be positive".into()));
    }
    Ok(())
}

/// Circularly-symmetric complex Gaussian with total power `power`.
fn complex_gaussian(rng: &mut Rng, power: f64) -> (f64, f64) {
    let sigma = (power / 2.0).sqrt();
    let i: f64 = rng.sample(StandardNormal);
    let q: f64 = rng.sample(StandardNormal);
    (sigma * i, sigma * q)
}

fn qam4_symbol(rng: &mut Rng) -> (f64, f64) {
    let bits: u8 = rng.random_range(0..4);
    let i = if bits & 1 == 0 { QAM4_AMPLITUDE } else { -QAM4_AMPLITUDE };
    let q = if bits & 2 == 0 { QAM4_AMPLITUDE } else { -QAM4_AMPLITUDE };
    (i, q)
}

fn rotate((i, q): (f64, f64), gain: (f64, f64)) -> (f64, f64) {
    (i * gain.0 - q * gain.1, i * gain.1 + q * gain.0)
}

/// Draws the per-recording channel gain `a * e^{j theta}` with `a` uniform
/// in [0.5, 1.2] and `theta` uniform in [0, 2pi). Returns `(a, theta)`.
pub fn draw_channel_gain(rng: &mut Rng) -> (f64, f64) {
    let a = rng.random_range(0.5..=1.2);
    let theta = rng.random_range(0.0..2.0 * PI);
    (a, theta)
}

/// Uniform sample on `{(I, Q) : inner <= max(|I|, |Q|) <= outer}`.
///
/// The ring is split into two horizontal strips and two vertical side bars;
/// one piece is chosen with probability proportional to its area.
fn sample_square_ring(rng: &mut Rng, inner: f64, outer: f64) -> (f64, f64) {
    let strip = 2.0 * outer * (outer - inner);
    let side = 2.0 * inner * (outer - inner);
    let total = 2.0 * (strip + side);
    let pick = rng.random::<f64>() * total;
    let along_full = rng.random_range(-outer..=outer);
    let along_inner = rng.random_range(-inner..=inner);
    let across = rng.random_range(inner..=outer);
    if pick < strip {
        (along_full, across)
    } else if pick < 2.0 * strip {
        (along_full, -across)
    } else if pick < 2.0 * strip + side {
        (across, along_inner)
    } else {
        (-across, along_inner)
    }
}

fn to_c32((i, q): (f64, f64)) -> Complex32 {
    Complex32::new(i as f32, q as f32)
}

/// Overlays a contiguous run of beacon symbols starting at a random offset.
fn add_beacon_burst(rng: &mut Rng, buf: &mut [(f64, f64)], fraction: f64, amplitude: f64) {
    let len = (fraction * buf.len() as f64).floor() as usize;
    if len == 0 || amplitude == 0.0 {
        return;
    }
    let phase = rng.random_range(0.0..2.0 * PI);
    let gain = (amplitude * phase.cos(), amplitude * phase.sin());
    let start = rng.random_range(0..=buf.len() - len);
    for s in &mut buf[start..start + len] {
        let b = rotate(qam4_symbol(rng), gain);
        s.0 += b.0;
        s.1 += b.1;
    }
}

fn finish(buf: Vec<(f64, f64)>, scenario: Scenario, seed: u64) -> IqRecording {
    IqRecording {
        samples: buf.into_iter().map(to_c32).collect(),
        scenario,
        seed_used: seed,
    }
}

/// Receiver noise at the noise floor plus one sparse beacon burst.
pub fn gen_empty_channel(cfg: &SimConfig, count: usize) -> Result<IqRecording> {
    cfg.validate()?;
    check_count(count)?;
    let mut rng = rng_from_seed(cfg.rng_seed);
    let mut buf: Vec<(f64, f64)> = (0..count)
        .map(|_| complex_gaussian(&mut rng, cfg.noise_floor_power))
        .collect();
    add_beacon_burst(&mut rng, &mut buf, cfg.beacon_fraction, cfg.beacon_amplitude);
    Ok(finish(buf, Scenario::EmptyChannel, cfg.rng_seed))
}

/// Unequalized 4-QAM traffic in a TDD slot, the rest of the window idle.
pub fn gen_transmitting(cfg: &SimConfig, count: usize) -> Result<IqRecording> {
    cfg.validate()?;
    check_count(count)?;
    let mut rng = rng_from_seed(cfg.rng_seed);
    let (a, theta) = draw_channel_gain(&mut rng);
    let gain = (a * theta.cos(), a * theta.sin());
    let symbol_noise = if cfg.snr_db.is_infinite() && cfg.snr_db > 0.0 {
        0.0
    } else {
        a * a / 10f64.powf(cfg.snr_db / 10.0)
    };

    let busy = ((1.0 - cfg.tdd_idle_fraction) * count as f64).round() as usize;
    let offset = rng.random_range(0..count);
    let mut buf = Vec::with_capacity(count);
    for k in 0..count {
        // Busy slot occupies `busy` consecutive samples, cyclically from `offset`.
        let in_slot = (k + count - offset) % count < busy;
        let s = if in_slot {
            let (i, q) = rotate(qam4_symbol(&mut rng), gain);
            let (ni, nq) = complex_gaussian(&mut rng, symbol_noise);
            (i + ni, q + nq)
        } else {
            complex_gaussian(&mut rng, cfg.noise_floor_power)
        };
        buf.push(s);
    }
    Ok(finish(buf, Scenario::Transmitting, cfg.rng_seed))
}

/// Jammer noise with a residual of legitimate beacon attempts.
pub fn gen_jammer(cfg: &SimConfig, count: usize, kind: JammerKind) -> Result<IqRecording> {
    cfg.validate()?;
    check_count(count)?;
    let mut rng = rng_from_seed(cfg.rng_seed);
    let half_width = cfg.uniform_jammer_half_width();
    let mut buf: Vec<(f64, f64)> = (0..count)
        .map(|_| match kind {
            JammerKind::Uniform => (
                rng.random_range(-half_width..=half_width),
                rng.random_range(-half_width..=half_width),
            ),
            JammerKind::Gaussian => complex_gaussian(&mut rng, cfg.jammer_power),
            JammerKind::Frame => sample_square_ring(&mut rng, cfg.frame_inner, cfg.frame_outer),
        })
        .collect();

    let residual = (cfg.residual_fraction * count as f64).floor() as usize;
    if residual > 0 && cfg.beacon_amplitude > 0.0 {
        let phase = rng.random_range(0.0..2.0 * PI);
        let gain = (cfg.beacon_amplitude * phase.cos(), cfg.beacon_amplitude * phase.sin());
        for _ in 0..residual {
            let k = rng.random_range(0..count);
            let b = rotate(qam4_symbol(&mut rng), gain);
            buf[k].0 += b.0;
            buf[k].1 += b.1;
        }
    }
    Ok(finish(buf, kind.scenario(), cfg.rng_seed))
}

/// Synthetic attack samples with no legitimate component.
pub fn gen_artificial(cfg: &SimConfig, count: usize, kind: ArtificialKind) -> Result<IqRecording> {
    cfg.validate_frame()?;
    check_count(count)?;
    let mut rng = rng_from_seed(cfg.rng_seed);
    let h = DOMAIN_HALF_WIDTH;
    let buf = (0..count)
        .map(|_| match kind {
            ArtificialKind::Uniform2D => (rng.random_range(-h..=h), rng.random_range(-h..=h)),
            ArtificialKind::Frame => sample_square_ring(&mut rng, cfg.frame_inner, cfg.frame_outer),
        })
        .collect();
    Ok(finish(buf, kind.scenario(), cfg.rng_seed))
}

/// Dispatches to the generator responsible for `scenario`.
pub fn generate(cfg: &SimConfig, count: usize, scenario: Scenario) -> Result<IqRecording> {
    match scenario {
        Scenario::EmptyChannel => gen_empty_channel(cfg, count),
        Scenario::Transmitting => gen_transmitting(cfg, count),
        Scenario::JammerUniform => gen_jammer(cfg, count, JammerKind::Uniform),
        Scenario::JammerGaussian => gen_jammer(cfg, count, JammerKind::Gaussian),
        Scenario::JammerFrame => gen_jammer(cfg, count, JammerKind::Frame),
        Scenario::ArtificialUniform2D => gen_artificial(cfg, count, ArtificialKind::Uniform2D),
        Scenario::ArtificialFrame => gen_artificial(cfg, count, ArtificialKind::Frame),
    }
}

// Recording file layout (little-endian):
//   [0..14)  magic "JAMWATCH-IQREC"
//   [14..16) u16 format version
//   u64 sample count, u8 scenario tag, u64 seed, then f32 I, f32 Q pairs.
const RECORDING_MAGIC: &[u8; 14] = b"JAMWATCH-IQREC";
const RECORDING_VERSION: u16 = 1;

pub fn write_recording(rec: &IqRecording, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(RECORDING_MAGIC).map_err(io)?;
    w.write_all(&RECORDING_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(rec.samples.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&[rec.scenario.tag()]).map_err(io)?;
    w.write_all(&rec.seed_used.to_le_bytes()).map_err(io)?;
    for s in &rec.samples {
        w.write_all(&s.re.to_le_bytes()).map_err(io)?;
        w.write_all(&s.im.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_recording(path: &Path) -> Result<IqRecording> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_recording(&bytes).map_err(|reason| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    })
}

fn parse_recording(bytes: &[u8]) -> std::result::Result<IqRecording, String> {
    const HEADER: usize = 16 + 8 + 1 + 8;
    if bytes.len() < HEADER {
        return Err("truncated header".into());
    }
    if &bytes[..14] != RECORDING_MAGIC {
        return Err("bad magic".into());
    }
    let version = u16::from_le_bytes([bytes[14], bytes[15]]);
    if version != RECORDING_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let scenario = Scenario::from_tag(bytes[24]).ok_or("unknown scenario tag")?;
    let seed_used = u64::from_le_bytes(bytes[25..33].try_into().unwrap());
    let body = &bytes[HEADER..];
    if count.checked_mul(8) != Some(body.len()) {
        return Err(format!("expected {count} samples, body holds {} bytes", body.len()));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes(c[..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(IqRecording {
        samples,
        scenario,
        seed_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SimConfig {
        SimConfig {
            beacon_fraction: 0.0,
            residual_fraction: 0.0,
            ..SimConfig::default()
        }
    }

    fn chebyshev(s: &Complex32) -> f32 {
        s.re.abs().max(s.im.abs())
    }

    #[test]
    fn zero_power_empty_channel_is_silent() {
        let cfg = SimConfig {
            noise_floor_power: 0.0,
            ..quiet()
        };
        let rec = gen_empty_channel(&cfg, 8).unwrap();
        assert_eq!(rec.len(), 8);
        assert!(rec.samples.iter().all(|s| s.re == 0.0 && s.im == 0.0));
        assert_eq!(rec.scenario, Scenario::EmptyChannel);
    }

    #[test]
    fn empty_channel_mean_magnitude_is_small() {
        // Independent Monte-Carlo of the same model (numpy, 1000 windows of
        // 1024) puts the default-config mean |s| at 0.099 +- 0.0015.
        let rec = gen_empty_channel(&SimConfig::default(), 1024).unwrap();
        let mean = rec.samples.iter().map(|s| s.norm()).sum::<f32>() / 1024.0;
        assert!(mean < 0.2, "mean |s| = {mean}");
    }

    #[test]
    fn beacon_burst_stays_sparse() {
        let cfg = SimConfig {
            noise_floor_power: 0.0,
            ..SimConfig::default()
        };
        let rec = gen_empty_channel(&cfg, 2048).unwrap();
        let active = rec.samples.iter().filter(|s| s.norm() > 0.0).count();
        assert!(active > 0);
        assert!(active as f64 <= 0.05 * 2048.0);
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = SimConfig {
            rng_seed: 42,
            ..SimConfig::default()
        };
        for sc in Scenario::ALL {
            assert_eq!(generate(&cfg, 300, sc).unwrap(), generate(&cfg, 300, sc).unwrap());
            assert_eq!(generate(&cfg, 300, sc).unwrap().scenario, sc);
        }
    }

    #[test]
    fn noiseless_transmission_has_four_points() {
        let cfg = SimConfig {
            snr_db: f64::INFINITY,
            tdd_idle_fraction: 0.0,
            ..SimConfig::default()
        };
        let rec = gen_transmitting(&cfg, 400).unwrap();
        let mut pts: Vec<(u32, u32)> = rec
            .samples
            .iter()
            .map(|s| (s.re.to_bits(), s.im.to_bits()))
            .collect();
        pts.sort_unstable();
        pts.dedup();
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn unit_gain_constellation_sits_on_nominal_points() {
        // Seed search: find a seed whose channel draw is near a=1, theta=0.
        let seed = (0..200_000u64)
            .find(|&s| {
                let (a, t) = draw_channel_gain(&mut rng_from_seed(s));
                (a - 1.0).abs() < 0.01 && t.min(2.0 * PI - t) < 0.01
            })
            .expect("no seed with near-unit gain");
        let cfg = SimConfig {
            snr_db: f64::INFINITY,
            tdd_idle_fraction: 0.0,
            rng_seed: seed,
            ..SimConfig::default()
        };
        let q = QAM4_AMPLITUDE as f32;
        for s in gen_transmitting(&cfg, 64).unwrap().samples {
            assert!((s.re.abs() - q).abs() < 0.02, "{s}");
            assert!((s.im.abs() - q).abs() < 0.02, "{s}");
        }
    }

    #[test]
    fn transmission_fits_the_bitmap_domain() {
        let rec = gen_transmitting(&SimConfig::default(), 2048).unwrap();
        let inside = rec.samples.iter().filter(|s| chebyshev(s) <= 1.5).count();
        assert!(inside as f64 >= 0.99 * 2048.0);
    }

    #[test]
    fn tdd_idle_fraction_is_checked() {
        let cfg = SimConfig {
            tdd_idle_fraction: 1.5,
            ..SimConfig::default()
        };
        assert!(matches!(gen_transmitting(&cfg, 10), Err(Error::Config(_))));
    }

    #[test]
    fn negative_power_is_a_config_error() {
        let cfg = SimConfig {
            noise_floor_power: -1.0,
            ..SimConfig::default()
        };
        assert!(matches!(gen_empty_channel(&cfg, 10), Err(Error::Config(_))));
    }

    #[test]
    fn frame_jammer_stays_in_ring() {
        let cfg = quiet();
        let rec = gen_jammer(&cfg, 512, JammerKind::Frame).unwrap();
        for s in &rec.samples {
            let d = chebyshev(s);
            assert!((0.8 - 1e-6..=1.2 + 1e-6).contains(&d), "{s}");
        }
    }

    #[test]
    fn uniform_jammer_variance() {
        let cfg = quiet();
        let w = cfg.uniform_jammer_half_width();
        let rec = gen_jammer(&cfg, 10_000, JammerKind::Uniform).unwrap();
        let n = rec.len() as f64;
        let mean = rec.samples.iter().map(|s| s.re as f64).sum::<f64>() / n;
        let var = rec
            .samples
            .iter()
            .map(|s| (s.re as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let expect = w * w / 3.0;
        assert!((var - expect).abs() <= 0.1 * expect, "var {var} vs {expect}");
    }

    #[test]
    fn zero_power_gaussian_jammer_is_silent() {
        let cfg = SimConfig {
            jammer_power: 0.0,
            ..quiet()
        };
        let rec = gen_jammer(&cfg, 16, JammerKind::Gaussian).unwrap();
        assert!(rec.samples.iter().all(|s| s.re == 0.0 && s.im == 0.0));
    }

    #[test]
    fn unknown_jammer_kind_is_usage_error() {
        assert!(matches!("sweep".parse::<JammerKind>(), Err(Error::Usage(_))));
    }

    #[test]
    fn residual_component_is_bounded() {
        let cfg = SimConfig {
            jammer_power: 0.0,
            ..SimConfig::default()
        };
        let rec = gen_jammer(&cfg, 1000, JammerKind::Gaussian).unwrap();
        let touched = rec.samples.iter().filter(|s| s.norm() > 0.0).count();
        assert!(touched > 0 && touched <= 20);
    }

    #[test]
    fn artificial_uniform_support_and_mean() {
        let cfg = SimConfig::default();
        let rec = gen_artificial(&cfg, 256, ArtificialKind::Uniform2D).unwrap();
        assert!(rec.samples.iter().all(|s| chebyshev(s) <= 1.5));

        let rec = gen_artificial(&cfg, 100_000, ArtificialKind::Uniform2D).unwrap();
        let n = rec.len() as f64;
        let mi = rec.samples.iter().map(|s| s.re as f64).sum::<f64>() / n;
        let mq = rec.samples.iter().map(|s| s.im as f64).sum::<f64>() / n;
        assert!(mi.abs() < 0.02 && mq.abs() < 0.02, "({mi}, {mq})");
    }

    #[test]
    fn degenerate_frame_hugs_outer_square() {
        let eps = 1e-3;
        let cfg = SimConfig {
            frame_inner: 1.2 - eps,
            frame_outer: 1.2,
            ..SimConfig::default()
        };
        let rec = gen_artificial(&cfg, 2000, ArtificialKind::Frame).unwrap();
        for s in &rec.samples {
            assert!((chebyshev(s) as f64 - 1.2).abs() <= eps + 1e-6);
        }
    }

    #[test]
    fn bad_frame_bounds_are_rejected() {
        let cfg = SimConfig {
            frame_inner: 1.2,
            frame_outer: 0.8,
            ..SimConfig::default()
        };
        assert!(matches!(
            gen_artificial(&cfg, 10, ArtificialKind::Frame),
            Err(Error::Config(_))
        ));
        let cfg = SimConfig {
            frame_outer: 1.6,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ring_sampler_is_uniform_over_area() {
        // The fraction landing in the two horizontal strips equals their area share.
        let (inner, outer) = (0.8, 1.2);
        let mut rng = rng_from_seed(3);
        let n = 200_000;
        let strips = (0..n)
            .filter(|_| sample_square_ring(&mut rng, inner, outer).1.abs() >= inner)
            .count() as f64
            / n as f64;
        let expect = 4.0 * outer * (outer - inner) / (4.0 * (outer * outer - inner * inner));
        assert!((strips - expect).abs() < 0.005, "{strips} vs {expect}");
    }

    #[test]
    fn second_moments_match_analytic_values() {
        let cfg = SimConfig {
            rng_seed: 11,
            ..quiet()
        };
        let n = 100_000;
        let power = |rec: &IqRecording| {
            rec.samples.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / rec.len() as f64
        };
        let g = gen_jammer(&cfg, n, JammerKind::Gaussian).unwrap();
        assert!((power(&g) - cfg.jammer_power).abs() < 0.01 * cfg.jammer_power);
        let u = gen_jammer(&cfg, n, JammerKind::Uniform).unwrap();
        assert!((power(&u) - cfg.jammer_power).abs() < 0.01 * cfg.jammer_power);
        // Uniform over [-1.5, 1.5]^2: E|s|^2 = 2 * 1.5^2 / 3 = 1.5.
        let a = gen_artificial(&cfg, n, ArtificialKind::Uniform2D).unwrap();
        assert!((power(&a) - 1.5).abs() < 0.02);
        let e = gen_empty_channel(&cfg, n).unwrap();
        assert!((power(&e) - cfg.noise_floor_power).abs() < 0.001);
    }

    #[test]
    fn recording_file_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.iq");
        let rec = gen_jammer(&SimConfig::default(), 77, JammerKind::Frame).unwrap();
        write_recording(&rec, &path).unwrap();
        assert_eq!(read_recording(&path).unwrap(), rec);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_recording(&path), Err(Error::Corrupt { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(read_recording(&path), Err(Error::Corrupt { .. })));
    }
}
