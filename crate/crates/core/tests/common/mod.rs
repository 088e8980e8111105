//! Test-only oracles shared by the integration suites.

#![allow(dead_code)]

use jamwatch::neural::{LayerKind, Loss, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct GradCheck {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Bit pattern of every ReLU's active set over the batch.
fn relu_masks(net: &Network, inputs: &[Vec<f64>]) -> Vec<bool> {
    let mut mask = Vec::new();
    for x in inputs {
        let acts = net.forward_trace(x).unwrap();
        for (k, l) in net.layers.iter().enumerate() {
            if l.kind == LayerKind::Relu {
                mask.extend(acts[k + 1].iter().map(|&v| v > 0.0));
            }
        }
    }
    mask
}

fn batch_loss(net: &Network, inputs: &[Vec<f64>], targets: &[Vec<f64>], loss: Loss) -> f64 {
    let x: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let t: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    net.loss(&x, &t, loss).unwrap()
}

/// Central-difference check of `net.backward` on randomly drawn parameters.
///
/// A parameter whose perturbation flips any ReLU between the two probe
/// points sits on a kink where the loss is not differentiable; it is skipped
/// and another one is drawn until `want` parameters have been compared.
pub fn central_difference_check(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    loss: Loss,
    want: usize,
    h: f64,
    seed: u64,
) -> GradCheck {
    let x: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let t: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let (_, grads) = net.backward(&x, &t, loss).unwrap();

    let index: Vec<(usize, usize)> = net
        .layers
        .iter()
        .enumerate()
        .flat_map(|(k, l)| (0..l.params.len()).map(move |p| (k, p)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = net.clone();
    let mut out = GradCheck {
        checked: 0,
        skipped_kinks: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let mut attempts = 0;
    while out.checked < want {
        attempts += 1;
        assert!(attempts < 50 * want, "too many kinks");
        let (k, p) = index[rng.random_range(0..index.len())];
        let orig = probe.layers[k].params[p];
        probe.layers[k].params[p] = orig + h;
        let plus = batch_loss(&probe, inputs, targets, loss);
        let mask_plus = relu_masks(&probe, inputs);
        probe.layers[k].params[p] = orig - h;
        let minus = batch_loss(&probe, inputs, targets, loss);
        let mask_minus = relu_masks(&probe, inputs);
        probe.layers[k].params[p] = orig;
        if mask_plus != mask_minus {
            out.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = grads.layers[k][p];
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale };
        if rel > out.max_rel_error {
            out.max_rel_error = rel;
            out.worst = Some((net.layers[k].name.clone(), p, analytic, numeric));
        }
        out.checked += 1;
    }
    out
}

pub fn random_inputs(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..len).map(|_| rng.random::<f64>()).collect()).collect()
}
