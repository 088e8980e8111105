//! Turning trained networks into per-bitmap detection scores.

use rayon::prelude::*;

use super::metrics::{ScoreSet, Source};
use crate::error::{Error, Result};
use crate::neural::{reconstruction_error, Arch, Network};
use crate::raster::Bitmap;

/// Headroom factor above the largest calibration error.
pub const CAE_HEADROOM: f64 = 10.0;

/// Bitmap pixels as a network input vector.
pub fn bitmap_input(bitmap: &Bitmap) -> Vec<f64> {
    bitmap.pixels.iter().map(|&p| p as f64).collect()
}

fn check_input(net: &Network, bitmaps: &[&Bitmap], labels: &[u8]) -> Result<()> {
    if bitmaps.len() != labels.len() {
        return Err(Error::Usage(format!(
            "{} bitmaps but {} labels",
            bitmaps.len(),
            labels.len()
        )));
    }
    for b in bitmaps {
        if (b.height, b.width) != (net.input.h, net.input.w) || net.input.c != 1 {
            return Err(Error::shape(
                &net.layers[0].name,
                format!("{}x{} bitmap fed to a network expecting {}", b.height, b.width, net.input),
            ));
        }
    }
    Ok(())
}

/// CNN scores are the sigmoid outputs.
pub fn score_cnn(net: &Network, bitmaps: &[&Bitmap], labels: &[u8]) -> Result<ScoreSet> {
    if net.arch != Arch::Cnn {
        return Err(Error::Usage(format!("expected a cnn model, got {}", net.arch.name())));
    }
    check_input(net, bitmaps, labels)?;
    let scores = bitmaps
        .par_iter()
        .map(|b| net.forward_item(&bitmap_input(b)).map(|y| y[0]))
        .collect::<Result<Vec<f64>>>()?;
    ScoreSet::new(scores, labels.to_vec(), Source::Cnn)
}

/// Raw autoencoder reconstruction errors.
pub fn cae_errors(net: &Network, bitmaps: &[&Bitmap]) -> Result<Vec<f64>> {
    if net.arch != Arch::Cae {
        return Err(Error::Usage(format!("expected a cae model, got {}", net.arch.name())));
    }
    check_input(net, bitmaps, &vec![0; bitmaps.len()])?;
    bitmaps
        .par_iter()
        .map(|b| {
            let x = bitmap_input(b);
            net.forward_item(&x).map(|y| reconstruction_error(&x, &y))
        })
        .collect()
}

/// Min-max map from reconstruction error to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaeCalibration {
    pub min: f64,
    pub max: f64,
    pub headroom: f64,
}

impl CaeCalibration {
    pub fn fit(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Usage("CAE calibration set is empty".into()));
        }
        if let Some(e) = errors.iter().find(|e| !e.is_finite()) {
            return Err(Error::numeric("cae", format!("calibration error {e}")));
        }
        let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
        let max = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(CaeCalibration {
            min,
            max,
            headroom: CAE_HEADROOM,
        })
    }

    pub fn upper(&self) -> f64 {
        self.max * self.headroom
    }

    pub fn normalize(&self, error: f64) -> f64 {
        let span = self.upper() - self.min;
        if span <= 0.0 {
            return if error > self.min { 1.0 } else { 0.0 };
        }
        ((error - self.min) / span).clamp(0.0, 1.0)
    }
}

/// CAE scores: reconstruction errors normalized against `calibration`.
pub fn score_cae(net: &Network, bitmaps: &[&Bitmap], labels: &[u8], calibration: &CaeCalibration) -> Result<ScoreSet> {
    check_input(net, bitmaps, labels)?;
    let scores = cae_errors(net, bitmaps)?
        .into_iter()
        .map(|e| calibration.normalize(e))
        .collect();
    ScoreSet::new(scores, labels.to_vec(), Source::Cae)
}
