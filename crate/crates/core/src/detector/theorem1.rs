//! Low-dimensional check that a two-class network trained against uniform
//! attack data orders inputs like the legitimate-class likelihood.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::metrics::auc_exact;
use super::stats::spearman;
use crate::error::{Error, Result};
use crate::neural::{train, Loss, Network, TrainConfig, TrainData};
use crate::rng::{derive_seed, rng_from_seed, Rng as ChaRng};

/// Half side of the square the uniform attack class is drawn from.
pub const BOX_HALF_WIDTH: f64 = 4.0;
pub const MIN_TRAIN: usize = 1000;
pub const MLP_HIDDEN: [usize; 2] = [32, 32];
/// Points per side of the evaluation grid over the box.
pub const GRID_SIDE: usize = 61;
pub const TEST_PER_CLASS: usize = 5000;

pub const SPEARMAN_MIN: f64 = 0.9;
pub const AUC_GAP_MAX: f64 = 0.03;

const MIXTURE_OFFSET: f64 = 1.5;
const MIXTURE_SD: f64 = 0.5;
const RING_RADIUS: f64 = 2.0;
const RING_SD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Toy {
    /// Standard bivariate normal.
    Gauss,
    /// Equal mixture of two narrow normals at (+-1.5, 0).
    GaussMixture,
    /// Radius ~ N(2, 0.25^2), uniform angle.
    Ring,
}

impl Toy {
    pub const ALL: [Toy; 3] = [Toy::Gauss, Toy::GaussMixture, Toy::Ring];

    pub fn name(self) -> &'static str {
        match self {
            Toy::Gauss => "gauss",
            Toy::GaussMixture => "mixture",
            Toy::Ring => "ring",
        }
    }

    pub fn density(self, x: &[f64]) -> f64 {
        let n2 = |dx: f64, dy: f64, sd: f64| (-(dx * dx + dy * dy) / (2.0 * sd * sd)).exp() / (2.0 * PI * sd * sd);
        match self {
            Toy::Gauss => n2(x[0], x[1], 1.0),
            Toy::GaussMixture => {
                0.5 * n2(x[0] - MIXTURE_OFFSET, x[1], MIXTURE_SD) + 0.5 * n2(x[0] + MIXTURE_OFFSET, x[1], MIXTURE_SD)
            }
            Toy::Ring => {
                // The radius law puts negligible mass below zero, so the
                // truncation constant is taken as one.
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return 0.0;
                }
                let z = (r - RING_RADIUS) / RING_SD;
                (-0.5 * z * z).exp() / (RING_SD * (2.0 * PI).sqrt()) / (2.0 * PI * r)
            }
        }
    }

    pub fn sample(self, rng: &mut ChaRng) -> [f64; 2] {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        match self {
            Toy::Gauss => [z0, z1],
            Toy::GaussMixture => {
                let c = if rng.random::<bool>() { MIXTURE_OFFSET } else { -MIXTURE_OFFSET };
                [c + MIXTURE_SD * z0, MIXTURE_SD * z1]
            }
            Toy::Ring => {
                let r = (RING_RADIUS + RING_SD * z0).abs();
                let a = rng.random_range(0.0..2.0 * PI);
                [r * a.cos(), r * a.sin()]
            }
        }
    }
}

impl FromStr for Toy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Toy> {
        Toy::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown toy density {s:?} (gauss, mixture, ring)")))
    }
}

fn uniform_box(rng: &mut ChaRng) -> [f64; 2] {
    [
        rng.random_range(-BOX_HALF_WIDTH..BOX_HALF_WIDTH),
        rng.random_range(-BOX_HALF_WIDTH..BOX_HALF_WIDTH),
    ]
}

/// Equal numbers of legitimate (label 0) and uniform (label 1) points.
fn labeled_sample(toy: Toy, per_class: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let mut x = Vec::with_capacity(2 * per_class);
    let mut y = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        x.push(toy.sample(&mut rng).to_vec());
        y.push(0.0);
        x.push(uniform_box(&mut rng).to_vec());
        y.push(1.0);
    }
    (x, y)
}

/// Regular grid over the box.
pub fn evaluation_grid() -> Vec<[f64; 2]> {
    let step = 2.0 * BOX_HALF_WIDTH / (GRID_SIDE - 1) as f64;
    let at = |k: usize| -BOX_HALF_WIDTH + k as f64 * step;
    (0..GRID_SIDE)
        .flat_map(|i| (0..GRID_SIDE).map(move |j| [at(i), at(j)]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    /// The trained two-class network.
    Mlp,
    /// The likelihood statistic compared with itself.
    Glrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub toy: Toy,
    pub scorer: Scorer,
    pub n_train: usize,
    pub grid_points: usize,
    /// `None` when the score is constant over the grid.
    pub spearman: Option<f64>,
    pub auc_scorer: f64,
    pub auc_glrt: f64,
    pub auc_gap: f64,
    pub epochs: usize,
    pub best_epoch: usize,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.spearman.is_some_and(|s| s >= SPEARMAN_MIN) && self.auc_gap <= AUC_GAP_MAX
    }

    pub fn to_csv(&self) -> String {
        let rho = self.spearman.map_or_else(|| "nan".to_string(), |v| v.to_string());
        format!(
            "toy,scorer,n_train,grid_points,spearman,auc_scorer,auc_glrt,auc_gap,epochs,best_epoch,passed\n\
             {},{},{},{},{},{},{},{},{},{},{}\n",
            self.toy.name(),
            match self.scorer {
                Scorer::Mlp => "mlp",
                Scorer::Glrt => "glrt",
            },
            self.n_train,
            self.grid_points,
            rho,
            self.auc_scorer,
            self.auc_glrt,
            self.auc_gap,
            self.epochs,
            self.best_epoch,
            self.passed()
        )
    }
}

/// Trains a small MLP with MSE loss to separate `n_train` points from `toy`
/// and `n_train` uniform points on the box, then compares it with the exact
/// likelihood statistic `-p(x)` by rank correlation on a grid and by ROC area
/// on a fresh labeled sample.
pub fn theorem1_check(toy: Toy, n_train: usize, cfg: &TrainConfig, scorer: Scorer) -> Result<Theorem1Report> {
    if n_train < MIN_TRAIN {
        return Err(Error::Usage(format!("n_train must be at least {MIN_TRAIN}, got {n_train}")));
    }
    cfg.validate()?;
    let seed = cfg.rng_seed;
    let grid = evaluation_grid();
    let (test_x, test_y) = labeled_sample(toy, TEST_PER_CLASS, derive_seed(seed, &[3]));
    let test_labels: Vec<u8> = test_y.iter().map(|&y| y as u8).collect();
    let glrt = |x: &[f64]| -toy.density(x);

    let (score, epochs, best_epoch): (Box<dyn Fn(&[f64]) -> Result<f64>>, usize, usize) = match scorer {
        Scorer::Glrt => (Box::new(|x: &[f64]| Ok(glrt(x))), 0, 0),
        Scorer::Mlp => {
            let (tx, ty) = labeled_sample(toy, n_train, derive_seed(seed, &[1]));
            let (vx, vy) = labeled_sample(toy, (n_train / 5).max(200), derive_seed(seed, &[2]));
            let mut net = Network::mlp(2, &MLP_HIDDEN)?.initialized(derive_seed(seed, &[0]));
            let history = train(
                &mut net,
                &TrainData::labeled(tx, ty)?,
                &TrainData::labeled(vx, vy)?,
                Loss::Mse,
                cfg,
            )?;
            let f = move |x: &[f64]| -> Result<f64> {
                let y = net.forward_item(x)?[0];
                if !y.is_finite() {
                    return Err(Error::numeric("out", format!("non-finite score {y}")));
                }
                Ok(y)
            };
            (Box::new(f), history.epochs.len(), history.best_epoch)
        }
    };

    let grid_scores = grid.iter().map(|p| score(p)).collect::<Result<Vec<f64>>>()?;
    let grid_glrt: Vec<f64> = grid.iter().map(|p| glrt(p)).collect();
    let test_scores = test_x.iter().map(|p| score(p)).collect::<Result<Vec<f64>>>()?;
    let test_glrt: Vec<f64> = test_x.iter().map(|p| glrt(p)).collect();
    let auc_scorer = auc_exact(&test_scores, &test_labels)?;
    let auc_glrt = auc_exact(&test_glrt, &test_labels)?;
    Ok(Theorem1Report {
        toy,
        scorer,
        n_train,
        grid_points: grid.len(),
        spearman: spearman(&grid_scores, &grid_glrt),
        auc_scorer,
        auc_glrt,
        auc_gap: (auc_scorer - auc_glrt).abs(),
        epochs,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_densities_integrate_to_one() {
        let (lo, hi, n) = (-6.0, 6.0, 481);
        let step = (hi - lo) / (n - 1) as f64;
        for toy in Toy::ALL {
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    total += toy.density(&[lo + i as f64 * step, lo + j as f64 * step]);
                }
            }
            total *= step * step;
            assert!((total - 1.0).abs() < 2e-3, "{}: {total}", toy.name());
        }
    }

    #[test]
    fn samples_follow_the_density() {
        // Fraction of samples in the unit disc against the density integral.
        for toy in Toy::ALL {
            let mut rng = rng_from_seed(9);
            let n = 20_000;
            let inside = (0..n).filter(|_| toy.sample(&mut rng).iter().map(|v| v * v).sum::<f64>() < 4.0).count();
            let (steps, mut mass) = (400, 0.0);
            let h = 4.0 / steps as f64;
            for i in 0..steps {
                for j in 0..steps {
                    let p = [-2.0 + (i as f64 + 0.5) * h, -2.0 + (j as f64 + 0.5) * h];
                    if p[0] * p[0] + p[1] * p[1] < 4.0 {
                        mass += toy.density(&p) * h * h;
                    }
                }
            }
            let frac = inside as f64 / n as f64;
            assert!((frac - mass).abs() < 0.015, "{}: {frac} vs {mass}", toy.name());
        }
    }

    #[test]
    fn glrt_against_itself_is_exact() {
        let r = theorem1_check(Toy::Ring, 1000, &TrainConfig::default(), Scorer::Glrt).unwrap();
        assert_eq!(r.spearman, Some(1.0));
        assert_eq!(r.auc_gap, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn small_training_sets_are_rejected() {
        assert!(matches!(
            theorem1_check(Toy::Gauss, 999, &TrainConfig::default(), Scorer::Mlp),
            Err(Error::Usage(_))
        ));
        assert!("square".parse::<Toy>().is_err());
        assert_eq!("mixture".parse::<Toy>().unwrap(), Toy::GaussMixture);
    }
}
