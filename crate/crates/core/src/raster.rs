//! IQ window to constellation bitmap conversion.

use std::fs;
use std::path::Path;

use num_complex::Complex32;

use crate::error::{Error, Result};
use crate::sim::IqRecording;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RasterMode {
    /// Pixel is 1 if any sample landed in it.
    Binary,
    /// Hit counts divided by the largest count.
    CountNormalized,
}

impl RasterMode {
    pub fn tag(self) -> u8 {
        match self {
            RasterMode::Binary => 0,
            RasterMode::CountNormalized => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<RasterMode> {
        match tag {
            0 => Some(RasterMode::Binary),
            1 => Some(RasterMode::CountNormalized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterSpec {
    pub height: usize,
    pub width: usize,
    pub axis_min: f64,
    pub axis_max: f64,
    pub mode: RasterMode,
}

impl Default for RasterSpec {
    fn default() -> Self {
        RasterSpec {
            height: 128,
            width: 128,
            axis_min: -1.5,
            axis_max: 1.5,
            mode: RasterMode::Binary,
        }
    }
}

impl RasterSpec {
    /// Square spec of side `resolution` on the default axis interval.
    pub fn square(resolution: usize) -> Self {
        RasterSpec {
            height: resolution,
            width: resolution,
            ..RasterSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::Config(format!(
                "raster must be at least 2x2, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.axis_min < self.axis_max) || !self.axis_min.is_finite() || !self.axis_max.is_finite() {
            return Err(Error::Config(format!(
                "axis interval [{}, {}] is empty",
                self.axis_min, self.axis_max
            )));
        }
        Ok(())
    }

    /// Maps one sample to `(row, col)`, or `None` if it falls outside the axes.
    ///
    /// Row 0 is the top of the plot (Q = axis_max); samples exactly on the
    /// upper I edge or lower Q edge land in the last column / row.
    pub fn pixel_of(&self, i: f64, q: f64) -> Option<(usize, usize)> {
        let (lo, hi) = (self.axis_min, self.axis_max);
        if !(lo..=hi).contains(&i) || !(lo..=hi).contains(&q) {
            return None;
        }
        let span = hi - lo;
        let col = (((i - lo) / span) * self.width as f64).floor() as usize;
        let row = (((hi - q) / span) * self.height as f64).floor() as usize;
        Some((row.min(self.height - 1), col.min(self.width - 1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub height: usize,
    pub width: usize,
    /// Row-major intensities in [0, 1].
    pub pixels: Vec<f32>,
    pub n_source_samples: usize,
    pub n_dropped: usize,
}

impl Bitmap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Bitmap {
            height,
            width,
            pixels: vec![0.0; height * width],
            n_source_samples: 0,
            n_dropped: 0,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn lit_pixels(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Per-pixel hit counts; the pre-normalization state of a bitmap.
pub fn hit_counts(window: &[Complex32], spec: &RasterSpec) -> (Vec<u32>, usize) {
    let mut counts = vec![0u32; spec.height * spec.width];
    let mut dropped = 0;
    for s in window {
        match spec.pixel_of(s.re as f64, s.im as f64) {
            Some((r, c)) => counts[r * spec.width + c] += 1,
            None => dropped += 1,
        }
    }
    (counts, dropped)
}

pub fn rasterize(window: &[Complex32], spec: &RasterSpec) -> Result<Bitmap> {
    spec.validate()?;
    if window.is_empty() {
        return Err(Error::Usage("cannot rasterize an empty window".into()));
    }
    let (counts, n_dropped) = hit_counts(window, spec);
    let pixels = match spec.mode {
        RasterMode::Binary => counts.iter().map(|&c| if c > 0 { 1.0 } else { 0.0 }).collect(),
        RasterMode::CountNormalized => {
            let max = counts.iter().copied().max().unwrap_or(0);
            if max == 0 {
                vec![0.0; counts.len()]
            } else {
                counts.iter().map(|&c| (c as f64 / max as f64) as f32).collect()
            }
        }
    };
    Ok(Bitmap {
        height: spec.height,
        width: spec.width,
        pixels,
        n_source_samples: window.len(),
        n_dropped,
    })
}

/// Splits a recording into consecutive non-overlapping windows of `n`
/// samples and rasterizes each; a shorter trailing remainder is discarded.
pub fn window_stream(recording: &IqRecording, n: usize, spec: &RasterSpec) -> Result<Vec<Bitmap>> {
    if n == 0 {
        return Err(Error::Usage("window length must be positive".into()));
    }
    if recording.len() < n {
        return Err(Error::Usage(format!(
            "recording holds {} samples, fewer than one window of {n}",
            recording.len()
        )));
    }
    recording
        .samples
        .chunks_exact(n)
        .map(|w| rasterize(w, spec))
        .collect()
}

/// Writes a plain (P2) PGM with maxval 255.
pub fn export_pgm(bitmap: &Bitmap, path: &Path) -> Result<()> {
    let mut out = format!("P2\n{} {}\n255\n", bitmap.width, bitmap.height);
    for row in bitmap.pixels.chunks(bitmap.width) {
        let line: Vec<String> = row
            .iter()
            .map(|&p| ((p.clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a P2 PGM back into `(width, height, values)`.
pub fn parse_pgm(text: &str) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::Usage(format!("malformed PGM: {m}"));
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("missing P2 magic"));
    }
    let mut num = |what: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(what))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let values = (0..width * height)
        .map(|_| num("pixel").and_then(|v| u8::try_from(v).map_err(|_| bad("pixel > 255"))))
        .collect::<Result<Vec<u8>>>()?;
    Ok((width, height, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(i: f32, q: f32) -> Complex32 {
        Complex32::new(i, q)
    }

    fn lit(b: &Bitmap) -> Vec<(usize, usize)> {
        (0..b.height)
            .flat_map(|r| (0..b.width).map(move |c| (r, c)))
            .filter(|&(r, c)| b.get(r, c) > 0.0)
            .collect()
    }

    #[test]
    fn origin_maps_to_center() {
        let b = rasterize(&[c(0.0, 0.0)], &RasterSpec::default()).unwrap();
        assert_eq!(lit(&b), vec![(64, 64)]);
    }

    #[test]
    fn corners_map_to_extreme_pixels() {
        let b = rasterize(&[c(-1.5, -1.5), c(1.49999, 1.49999)], &RasterSpec::default()).unwrap();
        assert_eq!(lit(&b), vec![(0, 127), (127, 0)]);
        let edge = rasterize(&[c(1.5, 1.5)], &RasterSpec::default()).unwrap();
        assert_eq!(lit(&edge), vec![(0, 127)]);
    }

    #[test]
    fn repeated_point_normalizes_to_one() {
        let spec = RasterSpec {
            mode: RasterMode::CountNormalized,
            ..RasterSpec::default()
        };
        let b = rasterize(&vec![c(0.3, -0.7); 256], &spec).unwrap();
        assert_eq!(b.lit_pixels(), 1);
        assert_eq!(b.pixels.iter().copied().fold(0.0, f32::max), 1.0);
        assert_eq!(b.n_dropped, 0);
    }

    #[test]
    fn out_of_range_samples_are_dropped() {
        let b = rasterize(&[c(1.6, 0.0), c(0.0, -2.0), c(f32::NAN, 0.0), c(0.1, 0.1)], &RasterSpec::default())
            .unwrap();
        assert_eq!(b.n_dropped, 3);
        assert_eq!(b.n_source_samples, 4);
        assert_eq!(b.lit_pixels(), 1);
    }

    #[test]
    fn empty_window_is_usage_error() {
        assert!(matches!(rasterize(&[], &RasterSpec::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let spec = RasterSpec {
            axis_min: 1.0,
            axis_max: 1.0,
            ..RasterSpec::default()
        };
        assert!(rasterize(&[c(0.0, 0.0)], &spec).is_err());
        assert!(rasterize(&[c(0.0, 0.0)], &RasterSpec::square(1)).is_err());
    }

    fn recording(len: usize) -> IqRecording {
        IqRecording {
            samples: (0..len).map(|k| c((k % 7) as f32 * 0.1, 0.0)).collect(),
            scenario: crate::sim::Scenario::EmptyChannel,
            seed_used: 0,
        }
    }

    #[test]
    fn window_stream_counts() {
        let spec = RasterSpec::square(16);
        assert_eq!(window_stream(&recording(2048), 256, &spec).unwrap().len(), 8);
        let one = window_stream(&recording(300), 256, &spec).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].n_source_samples, 256);
        assert!(matches!(window_stream(&recording(255), 256, &spec), Err(Error::Usage(_))));
    }

    #[test]
    fn pgm_export_bodies() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pgm");
        let mut b = Bitmap::zeros(2, 2);
        export_pgm(&b, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let body: Vec<&str> = text.lines().skip(3).flat_map(str::split_whitespace).collect();
        assert_eq!(body.join(" "), "0 0 0 0");

        b.pixels[3] = 1.0;
        b.pixels[1] = 0.5;
        export_pgm(&b, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.split_whitespace().filter(|&t| t == "255").count(), 2); // maxval + pixel
        let (w, h, vals) = parse_pgm(&text).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(vals, vec![0, 128, 0, 255]);
    }

    proptest! {
        #[test]
        fn pgm_roundtrip_preserves_quantized_grid(px in prop::collection::vec(0.0f32..=1.0, 12)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.pgm");
            let b = Bitmap { height: 3, width: 4, pixels: px, n_source_samples: 1, n_dropped: 0 };
            export_pgm(&b, &path).unwrap();
            let (_, _, vals) = parse_pgm(&fs::read_to_string(&path).unwrap()).unwrap();
            let quantized: Vec<u8> = b.pixels.iter().map(|&p| (p * 255.0).round() as u8).collect();
            prop_assert_eq!(&vals, &quantized);
            // Re-exporting the parsed grid is a fixed point.
            let again = Bitmap { pixels: vals.iter().map(|&v| v as f32 / 255.0).collect(), ..b };
            export_pgm(&again, &path).unwrap();
            let (_, _, vals2) = parse_pgm(&fs::read_to_string(&path).unwrap()).unwrap();
            prop_assert_eq!(vals, vals2);
        }

        #[test]
        fn column_monotone_in_i(a in -1.5f64..=1.5, b in -1.5f64..=1.5, q in -1.5f64..=1.5) {
            let spec = RasterSpec::square(37);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (_, c_lo) = spec.pixel_of(lo, q).unwrap();
            let (_, c_hi) = spec.pixel_of(hi, q).unwrap();
            prop_assert!(c_lo <= c_hi);
            let (r_lo, _) = spec.pixel_of(q, lo).unwrap();
            let (r_hi, _) = spec.pixel_of(q, hi).unwrap();
            prop_assert!(r_hi <= r_lo);
        }
    }
}
