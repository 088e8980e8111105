//! Layer primitives with explicit-loop forward and backward passes.
//!
//! Activations are stored per item in height-width-channel order, so the
//! channel vector at each pixel is contiguous. Kernels are stored as
//! `[ky][kx][in_channel][out_channel]` followed by one bias per output channel;
//! dense weights as `[input][output]` followed by the biases.

use super::tensor::Shape3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Convolution with "same" padding: output side = ceil(input / stride).
    Conv2d {
        kernel: usize,
        stride: usize,
        cin: usize,
        cout: usize,
    },
    /// Transposed convolution with "same" padding: output side = input * stride.
    ConvTranspose2d {
        kernel: usize,
        stride: usize,
        cin: usize,
        cout: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// 2x2 average pooling with stride 2.
    AvgPool2,
    Relu,
    Sigmoid,
    /// Reinterprets the item as `to`; the element count must match.
    Reshape {
        to: Shape3,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    /// Weights then biases; empty for parameter-free layers.
    pub params: Vec<f64>,
}

/// Leading padding for a "same" convolution mapping `input` to `output`.
fn same_pad(input: usize, output: usize, kernel: usize, stride: usize) -> usize {
    ((output - 1) * stride + kernel).saturating_sub(input) / 2
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Layer {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        let mut layer = Layer {
            name: name.into(),
            kind,
            params: Vec::new(),
        };
        layer.params = vec![0.0; layer.param_count()];
        layer
    }

    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv2d { kernel, cin, cout, .. }
            | LayerKind::ConvTranspose2d { kernel, cin, cout, .. } => kernel * kernel * cin * cout,
            LayerKind::Dense { inputs, outputs } => inputs * outputs,
            _ => 0,
        }
    }

    pub fn bias_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv2d { cout, .. } | LayerKind::ConvTranspose2d { cout, .. } => cout,
            LayerKind::Dense { outputs, .. } => outputs,
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    /// `(fan_in, fan_out)` of the weights, as used for Glorot initialization.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match self.kind {
            LayerKind::Conv2d { kernel, cin, cout, .. }
            | LayerKind::ConvTranspose2d { kernel, cin, cout, .. } => {
                Some((kernel * kernel * cin, kernel * kernel * cout))
            }
            LayerKind::Dense { inputs, outputs } => Some((inputs, outputs)),
            _ => None,
        }
    }

    fn mismatch(&self, s: Shape3, what: &str) -> Error {
        Error::shape(&self.name, format!("input {s} incompatible: {what}"))
    }

    pub fn out_shape(&self, s: Shape3) -> Result<Shape3> {
        match self.kind {
            LayerKind::Conv2d { stride, cin, cout, .. } => {
                if s.c != cin {
                    return Err(self.mismatch(s, &format!("expected {cin} channels")));
                }
                Ok(Shape3::new(s.h.div_ceil(stride), s.w.div_ceil(stride), cout))
            }
            LayerKind::ConvTranspose2d { stride, cin, cout, .. } => {
                if s.c != cin {
                    return Err(self.mismatch(s, &format!("expected {cin} channels")));
                }
                Ok(Shape3::new(s.h * stride, s.w * stride, cout))
            }
            LayerKind::Dense { inputs, outputs } => {
                if s.len() != inputs {
                    return Err(self.mismatch(s, &format!("expected {inputs} values")));
                }
                Ok(Shape3::flat(outputs))
            }
            LayerKind::AvgPool2 => {
                if s.h % 2 != 0 || s.w % 2 != 0 {
                    return Err(self.mismatch(s, "pooling needs even sides"));
                }
                Ok(Shape3::new(s.h / 2, s.w / 2, s.c))
            }
            LayerKind::Relu | LayerKind::Sigmoid => Ok(s),
            LayerKind::Reshape { to } => {
                if to.len() != s.len() {
                    return Err(self.mismatch(s, &format!("cannot reshape to {to}")));
                }
                Ok(to)
            }
        }
    }

    /// Computes the layer output for one item. `y` must hold `out_shape(s).len()` values.
    pub fn forward(&self, x: &[f64], s: Shape3, y: &mut [f64]) {
        match self.kind {
            LayerKind::Conv2d {
                kernel,
                stride,
                cin,
                cout,
            } => {
                let (oh, ow) = (s.h.div_ceil(stride), s.w.div_ceil(stride));
                let (pt, pl) = (same_pad(s.h, oh, kernel, stride), same_pad(s.w, ow, kernel, stride));
                let (w, b) = self.params.split_at(self.weight_count());
                for oy in 0..oh {
                    for ox in 0..ow {
                        let out = &mut y[(oy * ow + ox) * cout..][..cout];
                        out.copy_from_slice(b);
                        for ky in 0..kernel {
                            let Some(iy) = (oy * stride + ky).checked_sub(pt).filter(|&v| v < s.h) else {
                                continue;
                            };
                            for kx in 0..kernel {
                                let Some(ix) = (ox * stride + kx).checked_sub(pl).filter(|&v| v < s.w) else {
                                    continue;
                                };
                                let xin = &x[(iy * s.w + ix) * cin..][..cin];
                                let tap = &w[(ky * kernel + kx) * cin * cout..][..cin * cout];
                                for (ci, &xv) in xin.iter().enumerate() {
                                    if xv != 0.0 {
                                        axpy(xv, &tap[ci * cout..][..cout], out);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::ConvTranspose2d {
                kernel,
                stride,
                cin,
                cout,
            } => {
                let (oh, ow) = (s.h * stride, s.w * stride);
                let (pt, pl) = (same_pad(oh, s.h, kernel, stride), same_pad(ow, s.w, kernel, stride));
                let (w, b) = self.params.split_at(self.weight_count());
                for px in y.chunks_exact_mut(cout) {
                    px.copy_from_slice(b);
                }
                for iy in 0..s.h {
                    for ix in 0..s.w {
                        let xin = &x[(iy * s.w + ix) * cin..][..cin];
                        for ky in 0..kernel {
                            let Some(oy) = (iy * stride + ky).checked_sub(pt).filter(|&v| v < oh) else {
                                continue;
                            };
                            for kx in 0..kernel {
                                let Some(ox) = (ix * stride + kx).checked_sub(pl).filter(|&v| v < ow) else {
                                    continue;
                                };
                                let out = &mut y[(oy * ow + ox) * cout..][..cout];
                                let tap = &w[(ky * kernel + kx) * cin * cout..][..cin * cout];
                                for (ci, &xv) in xin.iter().enumerate() {
                                    if xv != 0.0 {
                                        axpy(xv, &tap[ci * cout..][..cout], out);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::Dense { inputs, outputs } => {
                let (w, b) = self.params.split_at(inputs * outputs);
                y.copy_from_slice(b);
                for (i, &xv) in x.iter().enumerate() {
                    if xv != 0.0 {
                        axpy(xv, &w[i * outputs..][..outputs], y);
                    }
                }
            }
            LayerKind::AvgPool2 => {
                let (oh, ow, c) = (s.h / 2, s.w / 2, s.c);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let out = &mut y[(oy * ow + ox) * c..][..c];
                        out.fill(0.0);
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            let src = &x[((2 * oy + dy) * s.w + 2 * ox + dx) * c..][..c];
                            axpy(0.25, src, out);
                        }
                    }
                }
            }
            LayerKind::Relu => {
                for (o, &v) in y.iter_mut().zip(x) {
                    *o = v.max(0.0);
                }
            }
            LayerKind::Sigmoid => {
                for (o, &v) in y.iter_mut().zip(x) {
                    *o = 1.0 / (1.0 + (-v).exp());
                }
            }
            LayerKind::Reshape { .. } => y.copy_from_slice(x),
        }
    }

    /// Back-propagates `dy` through the layer for one item.
    ///
    /// Parameter gradients are accumulated into `grad` (same layout as
    /// `params`); the input gradient is written to `dx` when requested.
    pub fn backward(&self, x: &[f64], s: Shape3, y: &[f64], dy: &[f64], dx: Option<&mut [f64]>, grad: &mut [f64]) {
        match self.kind {
            LayerKind::Conv2d {
                kernel,
                stride,
                cin,
                cout,
            } => {
                let (oh, ow) = (s.h.div_ceil(stride), s.w.div_ceil(stride));
                let (pt, pl) = (same_pad(s.h, oh, kernel, stride), same_pad(s.w, ow, kernel, stride));
                let nw = self.weight_count();
                let w = &self.params[..nw];
                let (gw, gb) = grad.split_at_mut(nw);
                let mut dx = dx;
                if let Some(d) = dx.as_deref_mut() {
                    d.fill(0.0);
                }
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = &dy[(oy * ow + ox) * cout..][..cout];
                        if g.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        axpy(1.0, g, gb);
                        for ky in 0..kernel {
                            let Some(iy) = (oy * stride + ky).checked_sub(pt).filter(|&v| v < s.h) else {
                                continue;
                            };
                            for kx in 0..kernel {
                                let Some(ix) = (ox * stride + kx).checked_sub(pl).filter(|&v| v < s.w) else {
                                    continue;
                                };
                                let base = (iy * s.w + ix) * cin;
                                let t0 = (ky * kernel + kx) * cin * cout;
                                for ci in 0..cin {
                                    let xv = x[base + ci];
                                    if xv != 0.0 {
                                        axpy(xv, g, &mut gw[t0 + ci * cout..][..cout]);
                                    }
                                }
                                if let Some(d) = dx.as_deref_mut() {
                                    for ci in 0..cin {
                                        d[base + ci] += dot(&w[t0 + ci * cout..][..cout], g);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::ConvTranspose2d {
                kernel,
                stride,
                cin,
                cout,
            } => {
                let (oh, ow) = (s.h * stride, s.w * stride);
                let (pt, pl) = (same_pad(oh, s.h, kernel, stride), same_pad(ow, s.w, kernel, stride));
                let nw = self.weight_count();
                let w = &self.params[..nw];
                let (gw, gb) = grad.split_at_mut(nw);
                for g in dy.chunks_exact(cout) {
                    axpy(1.0, g, gb);
                }
                let mut dx = dx;
                for iy in 0..s.h {
                    for ix in 0..s.w {
                        let base = (iy * s.w + ix) * cin;
                        if let Some(d) = dx.as_deref_mut() {
                            d[base..base + cin].fill(0.0);
                        }
                        for ky in 0..kernel {
                            let Some(oy) = (iy * stride + ky).checked_sub(pt).filter(|&v| v < oh) else {
                                continue;
                            };
                            for kx in 0..kernel {
                                let Some(ox) = (ix * stride + kx).checked_sub(pl).filter(|&v| v < ow) else {
                                    continue;
                                };
                                let g = &dy[(oy * ow + ox) * cout..][..cout];
                                if g.iter().all(|&v| v == 0.0) {
                                    continue;
                                }
                                let t0 = (ky * kernel + kx) * cin * cout;
                                for ci in 0..cin {
                                    let xv = x[base + ci];
                                    if xv != 0.0 {
                                        axpy(xv, g, &mut gw[t0 + ci * cout..][..cout]);
                                    }
                                }
                                if let Some(d) = dx.as_deref_mut() {
                                    for ci in 0..cin {
                                        d[base + ci] += dot(&w[t0 + ci * cout..][..cout], g);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::Dense { inputs, outputs } => {
                let nw = inputs * outputs;
                let w = &self.params[..nw];
                let (gw, gb) = grad.split_at_mut(nw);
                axpy(1.0, dy, gb);
                for (i, &xv) in x.iter().enumerate() {
                    if xv != 0.0 {
                        axpy(xv, dy, &mut gw[i * outputs..][..outputs]);
                    }
                }
                if let Some(d) = dx {
                    for (i, di) in d.iter_mut().enumerate() {
                        *di = dot(&w[i * outputs..][..outputs], dy);
                    }
                }
            }
            LayerKind::AvgPool2 => {
                if let Some(d) = dx {
                    let (ow, c) = (s.w / 2, s.c);
                    for iy in 0..s.h {
                        for ix in 0..s.w {
                            let src = &dy[((iy / 2) * ow + ix / 2) * c..][..c];
                            for (o, &g) in d[(iy * s.w + ix) * c..][..c].iter_mut().zip(src) {
                                *o = 0.25 * g;
                            }
                        }
                    }
                }
            }
            LayerKind::Relu => {
                if let Some(d) = dx {
                    for ((o, &g), &out) in d.iter_mut().zip(dy).zip(y) {
                        *o = if out > 0.0 { g } else { 0.0 };
                    }
                }
            }
            LayerKind::Sigmoid => {
                if let Some(d) = dx {
                    for ((o, &g), &out) in d.iter_mut().zip(dy).zip(y) {
                        *o = g * out * (1.0 - out);
                    }
                }
            }
            LayerKind::Reshape { .. } => {
                if let Some(d) = dx {
                    d.copy_from_slice(dy);
                }
            }
        }
    }
}
