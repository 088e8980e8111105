//! Threshold decisions, false-alarm / misdetection curves and ROC summaries.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Cnn,
    Cae,
    GlrtOracle,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Cnn => "cnn",
            Source::Cae => "cae",
            Source::GlrtOracle => "glrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub source: Source,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, source: Source) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Usage(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Usage(format!("score {s} outside [0, 1]")));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Usage(format!("label {l} is not 0 or 1")));
        }
        Ok(ScoreSet { scores, labels, source })
    }

    /// Restricts to the items whose index satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> ScoreSet {
        let (scores, labels) = (0..self.scores.len())
            .filter(|&i| keep(i))
            .map(|i| (self.scores[i], self.labels[i]))
            .unzip();
        ScoreSet {
            scores,
            labels,
            source: self.source,
        }
    }

    fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// No jamming.
    H0,
    /// Jamming.
    H1,
}

/// Decides H1 when the score reaches the threshold.
pub fn classify(score: f64, tau: f64) -> Hypothesis {
    if score < tau {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    }
}

/// `n` evenly spaced thresholds on [0, 1].
pub fn threshold_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

pub const DEFAULT_GRID_POINTS: usize = 1001;
pub const DEFAULT_TARGET_RATE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub source: Source,
    pub thresholds: Vec<f64>,
    pub fa_curve: Vec<f64>,
    pub md_curve: Vec<f64>,
    pub target_rate: f64,
    /// Smallest threshold with FA <= target; `None` when no grid point achieves it.
    pub tau_fa: Option<f64>,
    /// Largest threshold with MD <= target; `None` when no grid point achieves it.
    pub tau_md: Option<f64>,
    /// `tau_md - tau_fa`, with a missing `tau_fa` read as 1 and a missing
    /// `tau_md` as 0.
    pub separation: f64,
    pub auc: f64,
}

/// Evaluates FA and MD at every threshold of `grid`.
///
/// FA is the fraction of label-0 items with score >= tau, MD the fraction of
/// label-1 items with score < tau. The area under the ROC curve is the
/// trapezoid rule over the (FA, 1 - MD) points plus the (0, 0) and (1, 1)
/// corners.
pub fn fa_md_curves(scores: &ScoreSet, grid: &[f64], target_rate: f64) -> Result<DetectionReport> {
    let (n0, n1) = scores.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::Usage(format!(
            "FA/MD curves need both classes (got {n0} legitimate, {n1} attack)"
        )));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("threshold grid must be non-empty and ascending".into()));
    }
    let mut s0: Vec<f64> = Vec::with_capacity(n0);
    let mut s1: Vec<f64> = Vec::with_capacity(n1);
    for (&s, &l) in scores.scores.iter().zip(&scores.labels) {
        if l == 0 {
            s0.push(s)
        } else {
            s1.push(s)
        }
    }
    s0.sort_by(f64::total_cmp);
    s1.sort_by(f64::total_cmp);
    // Number of sorted values strictly below tau.
    let below = |v: &[f64], tau: f64| v.partition_point(|&s| s < tau);

    let fa_curve: Vec<f64> = grid
        .iter()
        .map(|&t| (n0 - below(&s0, t)) as f64 / n0 as f64)
        .collect();
    let md_curve: Vec<f64> = grid.iter().map(|&t| below(&s1, t) as f64 / n1 as f64).collect();

    let tau_fa = grid
        .iter()
        .zip(&fa_curve)
        .find(|(_, &fa)| fa <= target_rate)
        .map(|(&t, _)| t);
    let tau_md = grid
        .iter()
        .zip(&md_curve)
        .rev()
        .find(|(_, &md)| md <= target_rate)
        .map(|(&t, _)| t);
    let separation = tau_md.unwrap_or(0.0) - tau_fa.unwrap_or(1.0);

    let mut pts: Vec<(f64, f64)> = fa_curve
        .iter()
        .zip(&md_curve)
        .map(|(&fa, &md)| (fa, 1.0 - md))
        .collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let auc = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();

    Ok(DetectionReport {
        source: scores.source,
        thresholds: grid.to_vec(),
        fa_curve,
        md_curve,
        target_rate,
        tau_fa,
        tau_md,
        separation,
        auc,
    })
}

/// Report on the default 1001-point grid at the default 1e-2 target rate.
pub fn default_report(scores: &ScoreSet) -> Result<DetectionReport> {
    fa_md_curves(scores, &threshold_grid(DEFAULT_GRID_POINTS), DEFAULT_TARGET_RATE)
}

/// Exact ROC operating points `(FA, MD)` obtained by thresholding at every
/// distinct score, plus the threshold above all scores.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Vec<(f64, f64)> {
    let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n0 = labels.len() as f64 - n1;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut out: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let (mut fa, mut md) = (0usize, 0usize);
            for (&s, &l) in scores.iter().zip(labels) {
                match (l, classify(s, t)) {
                    (0, Hypothesis::H1) => fa += 1,
                    (1, Hypothesis::H0) => md += 1,
                    _ => {}
                }
            }
            (fa as f64 / n0, md as f64 / n1)
        })
        .collect();
    out.push((0.0, 1.0));
    out
}

/// Probability that a random attack item outscores a random legitimate one,
/// ties counted half (the Mann-Whitney form of the ROC area).
pub fn auc_exact(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::Usage("AUC needs both classes".into()));
    }
    // Sum of mid-ranks of the attack class.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n0 as f64 * n1 as f64))
}

impl DetectionReport {
    /// One `tau,fa,md` row per threshold, then a summary block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,fa,md\n");
        for ((t, fa), md) in self.thresholds.iter().zip(&self.fa_curve).zip(&self.md_curve) {
            out.push_str(&format!("{t},{fa},{md}\n"));
        }
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
        out.push_str("tau_fa,tau_md,separation,auc\n");
        out.push_str(&format!(
            "{},{},{},{}\n",
            opt(self.tau_fa),
            opt(self.tau_md),
            self.separation,
            self.auc
        ));
        out
    }
}
