//! Gaussian kernel density estimate used as a likelihood oracle.

use crate::error::{Error, Result};

pub const KDE_MIN_POINTS: usize = 100;
pub const KDE_MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    dim: usize,
    bandwidth: f64,
    points: Vec<f64>,
}

/// Fits an isotropic Gaussian KDE with the given bandwidth.
pub fn glrt_oracle_fit(h0_points: &[Vec<f64>], bandwidth: f64) -> Result<DensityModel> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Usage(format!("KDE bandwidth {bandwidth} must be positive")));
    }
    if h0_points.len() < KDE_MIN_POINTS {
        return Err(Error::Usage(format!(
            "KDE needs at least {KDE_MIN_POINTS} points, got {}",
            h0_points.len()
        )));
    }
    let dim = h0_points[0].len();
    if dim == 0 || dim > KDE_MAX_DIM {
        return Err(Error::Usage(format!("KDE dimension {dim} outside 1..={KDE_MAX_DIM}")));
    }
    if h0_points.iter().any(|p| p.len() != dim) {
        return Err(Error::Usage("KDE points have mixed dimensions".into()));
    }
    Ok(DensityModel {
        dim,
        bandwidth,
        points: h0_points.concat(),
    })
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let h2 = self.bandwidth * self.bandwidth;
        let norm = (2.0 * std::f64::consts::PI * h2).powf(self.dim as f64 / 2.0);
        let n = self.points.len() / self.dim;
        let total: f64 = self
            .points
            .chunks_exact(self.dim)
            .map(|p| {
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * d2 / h2).exp()
            })
            .sum();
        total / (n as f64 * norm)
    }
}
