//! Mini-batch training with validation-based early stopping.

use rand::seq::SliceRandom;

use super::loss::Loss;
use super::model::Network;
use super::optim::Adam;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 4,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One scalar target per item.
    Labels(Vec<f64>),
    /// The target is the input itself.
    Reconstruct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Targets,
}

impl TrainData {
    pub fn labeled(inputs: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Usage(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        Ok(TrainData {
            inputs,
            targets: Targets::Labels(labels),
        })
    }

    pub fn reconstruct(inputs: Vec<Vec<f64>>) -> Self {
        TrainData {
            inputs,
            targets: Targets::Reconstruct,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn target(&self, i: usize) -> &[f64] {
        match &self.targets {
            Targets::Labels(l) => std::slice::from_ref(&l[i]),
            Targets::Reconstruct => &self.inputs[i],
        }
    }

    fn refs(&self, idx: &[usize]) -> (Vec<&[f64]>, Vec<&[f64]>) {
        idx.iter().map(|&i| (self.inputs[i].as_slice(), self.target(i))).unzip()
    }

    /// Mean loss of `net` over every item.
    pub fn mean_loss(&self, net: &Network, loss: Loss) -> Result<f64> {
        let idx: Vec<usize> = (0..self.len()).collect();
        let (x, t) = self.refs(&idx);
        net.loss(&x, &t, loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl History {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
        out
    }
}

/// Generic early-stopping driver.
///
/// Runs `run_epoch` (returning the epoch's training loss) then `validate`
/// until the validation loss has not improved for `patience` consecutive
/// epochs or `max_epochs` is reached. On return `model` holds the snapshot
/// from the best-validation epoch.
pub fn early_stopping<M: Clone>(
    model: &mut M,
    max_epochs: usize,
    patience: usize,
    mut run_epoch: impl FnMut(&mut M, usize) -> Result<f64>,
    mut validate: impl FnMut(&M) -> Result<f64>,
) -> Result<History> {
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, M)> = None;
    let mut stale = 0;
    for epoch in 1..=max_epochs {
        let train_loss = run_epoch(model, epoch)?;
        let val_loss = validate(model)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::numeric(
                "training",
                format!("epoch {epoch}: train loss {train_loss}, val loss {val_loss}"),
            ));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        match &best {
            Some((_, b, _)) if val_loss >= *b => {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
            _ => {
                best = Some((epoch, val_loss, model.clone()));
                stale = 0;
            }
        }
    }
    let (best_epoch, _, snapshot) = best.expect("at least one epoch runs");
    *model = snapshot;
    Ok(History { epochs, best_epoch })
}

/// Trains `net` with Adam on `train`, early-stopping on `val`.
///
/// The training loss recorded per epoch is the running mean of the batch
/// losses seen during that epoch. Shuffling is seeded from `cfg.rng_seed`
/// and the epoch number, so two runs with the same inputs are identical.
pub fn train(net: &mut Network, train: &TrainData, val: &TrainData, loss: Loss, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Usage(format!(
            "training needs non-empty splits (train {}, val {})",
            train.len(),
            val.len()
        )));
    }
    let mut opt = Adam::new(net, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    early_stopping(
        net,
        cfg.max_epochs,
        cfg.patience,
        |net, epoch| {
            order.sort_unstable();
            order.shuffle(&mut rng_from_seed(derive_seed(cfg.rng_seed, &[epoch as u64])));
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let (x, t) = train.refs(batch);
                let (l, g) = net.backward(&x, &t, loss)?;
                opt.step(net, &g);
                total += l * batch.len() as f64;
            }
            Ok(total / train.len() as f64)
        },
        |net| val.mean_loss(net, loss),
    )
}
