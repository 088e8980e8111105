//! Network containers for the CNN detector, the convolutional autoencoder and
//! the small MLP used by the likelihood-equivalence harness.

use rand::Rng as _;
use rayon::prelude::*;

use super::layers::{Layer, LayerKind};
use super::loss::Loss;
use super::tensor::{Shape3, Tensor4};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Per-layer parameter counts of the CNN at 128x128
/// (conv1, conv2, dense1, dense2).
pub const CNN_TABLE_PARAMS: [usize; 4] = [640, 18464, 262176, 33];
pub const CNN_TABLE_TOTAL: usize = 281313;
/// Per-layer parameter counts of the CAE at 128x128: encoder conv1, conv2,
/// dense, then decoder dense, transposed conv1, transposed conv2, final conv.
pub const CAE_TABLE_PARAMS: [usize; 7] = [640, 18464, 1048608, 1081344, 9248, 18496, 577];
pub const PAPER_RESOLUTION: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Cnn,
    Cae,
    Mlp,
}

impl Arch {
    pub fn tag(self) -> u8 {
        match self {
            Arch::Cnn => 0,
            Arch::Cae => 1,
            Arch::Mlp => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Arch> {
        match tag {
            0 => Some(Arch::Cnn),
            1 => Some(Arch::Cae),
            2 => Some(Arch::Mlp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Cnn => "cnn",
            Arch::Cae => "cae",
            Arch::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Arch,
    pub input: Shape3,
    pub layers: Vec<Layer>,
}

/// Parameter gradients, one blob per layer in the layout of `Layer::params`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| vec![0.0; l.params.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.layers.iter_mut().flatten().for_each(|g| *g *= k);
    }

    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flatten().copied()
    }
}

fn conv(name: &str, stride: usize, cin: usize, cout: usize) -> Layer {
    Layer::new(
        name,
        LayerKind::Conv2d {
            kernel: 3,
            stride,
            cin,
            cout,
        },
    )
}

fn convt(name: &str, cin: usize, cout: usize) -> Layer {
    Layer::new(
        name,
        LayerKind::ConvTranspose2d {
            kernel: 3,
            stride: 2,
            cin,
            cout,
        },
    )
}

fn dense(name: &str, inputs: usize, outputs: usize) -> Layer {
    Layer::new(name, LayerKind::Dense { inputs, outputs })
}

fn act(name: &str, kind: LayerKind) -> Layer {
    Layer::new(name, kind)
}

/// Items per sequential gradient chunk; fixed so results do not depend on
/// the thread count.
const GRAD_CHUNK: usize = 4;

impl Network {
    /// The two-class detector: conv(3x3/2, 64) - avg pool 2x2 - conv(3x3/2, 32)
    /// - dense(32) - dense(1), ReLU hidden activations and a sigmoid output.
    pub fn cnn(resolution: usize) -> Result<Network> {
        if resolution < 8 || resolution % 8 != 0 {
            return Err(Error::Config(format!(
                "CNN resolution must be a positive multiple of 8, got {resolution}"
            )));
        }
        let side = resolution / 8;
        let flat = side * side * 32;
        let net = Network {
            arch: Arch::Cnn,
            input: Shape3::new(resolution, resolution, 1),
            layers: vec![
                conv("conv1", 2, 1, 64),
                act("conv1.relu", LayerKind::Relu),
                act("pool", LayerKind::AvgPool2),
                conv("conv2", 2, 64, 32),
                act("conv2.relu", LayerKind::Relu),
                act("flatten", LayerKind::Reshape { to: Shape3::flat(flat) }),
                dense("dense1", flat, 32),
                act("dense1.relu", LayerKind::Relu),
                dense("dense2", 32, 1),
                act("dense2.sigmoid", LayerKind::Sigmoid),
            ],
        };
        net.shapes()?;
        if resolution == PAPER_RESOLUTION {
            assert_eq!(net.param_layer_counts(), CNN_TABLE_PARAMS);
            assert_eq!(net.param_count(), CNN_TABLE_TOTAL);
        }
        Ok(net)
    }

    /// The autoencoder baseline: encoder conv(3x3/2, 64) - conv(3x3/2, 32) -
    /// dense(32); decoder dense - reshape - two transposed convs (3x3/2) -
    /// conv(3x3/1, 1) with a sigmoid output.
    pub fn cae(resolution: usize) -> Result<Network> {
        if resolution < 4 || resolution % 4 != 0 {
            return Err(Error::Config(format!(
                "CAE resolution must be a positive multiple of 4, got {resolution}"
            )));
        }
        let side = resolution / 4;
        let code = Shape3::new(side, side, 32);
        let net = Network {
            arch: Arch::Cae,
            input: Shape3::new(resolution, resolution, 1),
            layers: vec![
                conv("enc.conv1", 2, 1, 64),
                act("enc.conv1.relu", LayerKind::Relu),
                conv("enc.conv2", 2, 64, 32),
                act("enc.conv2.relu", LayerKind::Relu),
                act("enc.flatten", LayerKind::Reshape { to: Shape3::flat(code.len()) }),
                dense("enc.dense", code.len(), 32),
                act("enc.dense.relu", LayerKind::Relu),
                dense("dec.dense", 32, code.len()),
                act("dec.dense.relu", LayerKind::Relu),
                act("dec.reshape", LayerKind::Reshape { to: code }),
                convt("dec.convt1", 32, 32),
                act("dec.convt1.relu", LayerKind::Relu),
                convt("dec.convt2", 32, 64),
                act("dec.convt2.relu", LayerKind::Relu),
                conv("dec.conv", 1, 64, 1),
                act("dec.conv.sigmoid", LayerKind::Sigmoid),
            ],
        };
        net.shapes()?;
        if resolution == PAPER_RESOLUTION {
            assert_eq!(net.param_layer_counts(), CAE_TABLE_PARAMS);
        }
        Ok(net)
    }

    /// Fully connected ReLU network with a sigmoid output unit.
    pub fn mlp(inputs: usize, hidden: &[usize]) -> Result<Network> {
        if inputs == 0 || hidden.contains(&0) {
            return Err(Error::Config("MLP layer widths must be positive".into()));
        }
        let mut layers = Vec::new();
        let mut width = inputs;
        for (k, &h) in hidden.iter().enumerate() {
            layers.push(dense(&format!("dense{}", k + 1), width, h));
            layers.push(act(&format!("dense{}.relu", k + 1), LayerKind::Relu));
            width = h;
        }
        layers.push(dense("out", width, 1));
        layers.push(act("out.sigmoid", LayerKind::Sigmoid));
        Ok(Network {
            arch: Arch::Mlp,
            input: Shape3::flat(inputs),
            layers,
        })
    }

    /// Hidden-layer widths of an MLP, recovered from its dense layers.
    pub fn mlp_hidden(&self) -> Vec<usize> {
        let dense: Vec<usize> = self
            .layers
            .iter()
            .filter_map(|l| match l.kind {
                LayerKind::Dense { outputs, .. } => Some(outputs),
                _ => None,
            })
            .collect();
        dense[..dense.len().saturating_sub(1)].to_vec()
    }

    /// Glorot-uniform weights and zero biases, deterministic in `seed`.
    pub fn init(&mut self, seed: u64) {
        let mut rng = rng_from_seed(seed);
        for layer in &mut self.layers {
            if let Some((fan_in, fan_out)) = layer.fans() {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let nw = layer.weight_count();
                for p in &mut layer.params[..nw] {
                    *p = rng.random_range(-limit..=limit);
                }
                layer.params[nw..].fill(0.0);
            }
        }
    }

    pub fn initialized(mut self, seed: u64) -> Self {
        self.init(seed);
        self
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    /// Parameter counts of the layers that hold parameters, in order.
    pub fn param_layer_counts(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(|l| l.params.len())
            .filter(|&n| n > 0)
            .collect()
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Result<Vec<(String, Shape3)>> {
        let mut s = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            s = l.out_shape(s)?;
            out.push((l.name.clone(), s));
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Shape3> {
        Ok(self.shapes()?.last().map(|(_, s)| *s).unwrap_or(self.input))
    }

    /// Runs one item, returning every intermediate activation: entry 0 is
    /// the input and entry `k + 1` the output of layer `k`.
    pub fn forward_trace(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input.len() {
            return Err(Error::shape(
                self.layers.first().map_or("input", |l| l.name.as_str()),
                format!("expected {} input values ({}), got {}", self.input.len(), self.input, x.len()),
            ));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let mut s = self.input;
        for l in &self.layers {
            let next = l.out_shape(s)?;
            let mut y = vec![0.0; next.len()];
            l.forward(acts.last().unwrap(), s, &mut y);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(&l.name, "non-finite activation"));
            }
            acts.push(y);
            s = next;
        }
        Ok(acts)
    }

    pub fn forward_item(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.pop().unwrap())
    }

    /// Batched forward pass. Input must be `(b, H, W, 1)` at the model's
    /// resolution; the CNN returns `(b, 1, 1, 1)`, the CAE `(b, H, W, 1)`.
    pub fn forward(&self, batch: &Tensor4) -> Result<Tensor4> {
        if batch.item != self.input {
            return Err(Error::shape(
                self.layers.first().map_or("input", |l| l.name.as_str()),
                format!("expected items of {}, got {}", self.input, batch.item),
            ));
        }
        let out_shape = self.output_shape()?;
        let outs = (0..batch.batch)
            .into_par_iter()
            .map(|b| self.forward_item(batch.item(b)))
            .collect::<Result<Vec<_>>>()?;
        Tensor4::from_values(batch.batch, out_shape, outs.concat())
    }

    /// Loss and parameter gradients for one item, accumulated into `grads`.
    pub fn backward_item(&self, x: &[f64], target: &[f64], loss: Loss, grads: &mut Gradients) -> Result<f64> {
        let acts = self.forward_trace(x)?;
        let out = acts.last().unwrap();
        let mut dy = vec![0.0; out.len()];
        let value = loss.item(out, target, &mut dy)?;

        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut s = self.input;
        for l in &self.layers {
            shapes.push(s);
            s = l.out_shape(s)?;
        }
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let mut dx = if k > 0 { Some(vec![0.0; acts[k].len()]) } else { None };
            layer.backward(&acts[k], shapes[k], &acts[k + 1], &dy, dx.as_deref_mut(), &mut grads.layers[k]);
            if grads.layers[k].iter().any(|g| !g.is_finite()) {
                return Err(Error::numeric(&layer.name, "non-finite gradient"));
            }
            match dx {
                Some(d) => dy = d,
                None => break,
            }
        }
        Ok(value)
    }

    /// Mean loss over the batch and its gradient with respect to every parameter.
    pub fn backward(&self, inputs: &[&[f64]], targets: &[&[f64]], loss: Loss) -> Result<(f64, Gradients)> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::Usage(format!(
                "batch of {} inputs with {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let partials = inputs
            .par_chunks(GRAD_CHUNK)
            .zip(targets.par_chunks(GRAD_CHUNK))
            .map(|(xs, ts)| {
                let mut g = Gradients::zeros_like(self);
                let mut total = 0.0;
                for (x, t) in xs.iter().zip(ts) {
                    total += self.backward_item(x, t, loss, &mut g)?;
                }
                Ok((total, g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grads = Gradients::zeros_like(self);
        let mut total = 0.0;
        for (l, g) in &partials {
            total += l;
            grads.add(g);
        }
        let n = inputs.len() as f64;
        grads.scale(1.0 / n);
        Ok((total / n, grads))
    }

    /// Mean loss without gradients.
    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]], loss: Loss) -> Result<f64> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::Usage("loss needs equal, non-empty inputs and targets".into()));
        }
        let per_item = inputs
            .par_iter()
            .zip(targets.par_iter())
            .map(|(x, t)| {
                let out = self.forward_item(x)?;
                let mut scratch = vec![0.0; out.len()];
                loss.item(&out, t, &mut scratch)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(per_item.iter().sum::<f64>() / per_item.len() as f64)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params.iter().copied()).collect()
    }
}
