//! Forward passes checked against direct nested-loop convolutions over an
//! explicitly zero-padded input. Transposed convolutions are evaluated as the
//! matrix transpose of the corresponding strided convolution, built column by
//! column from basis vectors.

mod common;

use common::random_inputs;
use jamwatch::neural::{Layer, LayerKind, Network};

/// Feature map indexed `[y][x][c]`.
type Map = Vec<Vec<Vec<f64>>>;

fn to_map(v: &[f64], h: usize, w: usize, c: usize) -> Map {
    (0..h)
        .map(|y| (0..w).map(|x| v[(y * w + x) * c..][..c].to_vec()).collect())
        .collect()
}

fn flatten(m: &Map) -> Vec<f64> {
    m.iter().flatten().flatten().copied().collect()
}

/// `w[ky][kx][ci][co]` followed by `bias[co]`.
fn conv_same(x: &Map, params: &[f64], k: usize, stride: usize, cout: usize, bias: bool) -> Map {
    let (h, w, cin) = (x.len(), x[0].len(), x[0][0].len());
    let (oh, ow) = ((h + stride - 1) / stride, (w + stride - 1) / stride);
    let pad_h = ((oh - 1) * stride + k).saturating_sub(h);
    let pad_w = ((ow - 1) * stride + k).saturating_sub(w);
    let (top, left) = (pad_h / 2, pad_w / 2);
    let mut padded = vec![vec![vec![0.0; cin]; w + pad_w]; h + pad_h];
    for y in 0..h {
        for xx in 0..w {
            padded[y + top][xx + left] = x[y][xx].clone();
        }
    }
    let wt = |ky: usize, kx: usize, ci: usize, co: usize| params[((ky * k + kx) * cin + ci) * cout + co];
    let b = &params[k * k * cin * cout..];
    let mut out = vec![vec![vec![0.0; cout]; ow]; oh];
    for oy in 0..oh {
        for ox in 0..ow {
            for co in 0..cout {
                let mut acc = if bias { b[co] } else { 0.0 };
                for ky in 0..k {
                    for kx in 0..k {
                        for ci in 0..cin {
                            acc += padded[oy * stride + ky][ox * stride + kx][ci] * wt(ky, kx, ci, co);
                        }
                    }
                }
                out[oy][ox][co] = acc;
            }
        }
    }
    out
}

/// Transposed convolution from `x` (h x w x cin) to (h*s x w*s x cout).
fn conv_transpose_same(x: &Map, params: &[f64], k: usize, stride: usize, cout: usize) -> Map {
    let (h, w, cin) = (x.len(), x[0].len(), x[0][0].len());
    let (oh, ow) = (h * stride, w * stride);
    // Adjoint convolution maps cout channels to cin channels with swapped kernel axes.
    let mut adj = vec![0.0; k * k * cout * cin];
    for ky in 0..k {
        for kx in 0..k {
            for ci in 0..cin {
                for co in 0..cout {
                    adj[((ky * k + kx) * cout + co) * cin + ci] = params[((ky * k + kx) * cin + ci) * cout + co];
                }
            }
        }
    }
    let xf = flatten(x);
    let n_out = oh * ow * cout;
    let mut y = vec![0.0; n_out];
    for (j, yj) in y.iter_mut().enumerate() {
        let mut e = vec![0.0; n_out];
        e[j] = 1.0;
        let col = flatten(&conv_same(&to_map(&e, oh, ow, cout), &adj, k, stride, cin, false));
        *yj = col.iter().zip(&xf).map(|(a, b)| a * b).sum();
    }
    let b = &params[k * k * cin * cout..];
    for (j, yj) in y.iter_mut().enumerate() {
        *yj += b[j % cout];
    }
    to_map(&y, oh, ow, cout)
}

fn dense(x: &[f64], params: &[f64], outputs: usize) -> Vec<f64> {
    (0..outputs)
        .map(|o| params[x.len() * outputs + o] + x.iter().enumerate().map(|(i, v)| v * params[i * outputs + o]).sum::<f64>())
        .collect()
}

fn relu_map(m: Map) -> Map {
    m.into_iter()
        .map(|r| r.into_iter().map(|p| p.into_iter().map(|v| v.max(0.0)).collect()).collect())
        .collect()
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn params<'a>(net: &'a Network, name: &str) -> &'a [f64] {
    &net.layers.iter().find(|l| l.name == name).unwrap().params
}

fn cae_oracle(net: &Network, x: &[f64], r: usize) -> Vec<f64> {
    let m = to_map(x, r, r, 1);
    let m = relu_map(conv_same(&m, params(net, "enc.conv1"), 3, 2, 64, true));
    let m = relu_map(conv_same(&m, params(net, "enc.conv2"), 3, 2, 32, true));
    let code: Vec<f64> = dense(&flatten(&m), params(net, "enc.dense"), 32).into_iter().map(|v| v.max(0.0)).collect();
    let side = r / 4;
    let d: Vec<f64> = dense(&code, params(net, "dec.dense"), side * side * 32)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let m = to_map(&d, side, side, 32);
    let m = relu_map(conv_transpose_same(&m, params(net, "dec.convt1"), 3, 2, 32));
    let m = relu_map(conv_transpose_same(&m, params(net, "dec.convt2"), 3, 2, 64));
    let m = conv_same(&m, params(net, "dec.conv"), 3, 1, 1, true);
    flatten(&m).into_iter().map(sigmoid).collect()
}

fn cnn_oracle(net: &Network, x: &[f64], r: usize) -> f64 {
    let m = relu_map(conv_same(&to_map(x, r, r, 1), params(net, "conv1"), 3, 2, 64, true));
    let half = m.len() / 2;
    let pooled: Map = (0..half)
        .map(|y| {
            (0..half)
                .map(|xx| {
                    (0..64)
                        .map(|c| (m[2 * y][2 * xx][c] + m[2 * y][2 * xx + 1][c] + m[2 * y + 1][2 * xx][c] + m[2 * y + 1][2 * xx + 1][c]) / 4.0)
                        .collect()
                })
                .collect()
        })
        .collect();
    let m = relu_map(conv_same(&pooled, params(net, "conv2"), 3, 2, 32, true));
    let h: Vec<f64> = dense(&flatten(&m), params(net, "dense1"), 32).into_iter().map(|v| v.max(0.0)).collect();
    sigmoid(dense(&h, params(net, "dense2"), 1)[0])
}

#[test]
fn cae_forward_matches_direct_convolution_at_4x4() {
    let net = Network::cae(4).unwrap().initialized(21);
    for x in random_inputs(3, 16, 8) {
        let got = net.forward_item(&x).unwrap();
        let want = cae_oracle(&net, &x, 4);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6, "{g} vs {w}");
        }
    }
}

#[test]
fn cae_forward_matches_direct_convolution_at_8x8() {
    let net = Network::cae(8).unwrap().initialized(22);
    let x = &random_inputs(1, 64, 9)[0];
    let got = net.forward_item(x).unwrap();
    let want = cae_oracle(&net, x, 8);
    assert!(got.iter().zip(&want).all(|(g, w)| (g - w).abs() < 1e-6));
}

#[test]
fn cnn_forward_matches_direct_convolution() {
    let net = Network::cnn(16).unwrap().initialized(23);
    for x in random_inputs(3, 256, 10) {
        let got = net.forward_item(&x).unwrap()[0];
        assert!((got - cnn_oracle(&net, &x, 16)).abs() < 1e-6);
    }
}

#[test]
fn odd_sized_convolution_matches_oracle() {
    let mut layer = Layer::new("c", LayerKind::Conv2d { kernel: 3, stride: 2, cin: 2, cout: 3 });
    layer.params = random_inputs(1, layer.param_count(), 30).remove(0);
    let x = random_inputs(1, 7 * 5 * 2, 31).remove(0);
    let s = jamwatch::neural::Shape3::new(7, 5, 2);
    let out_s = layer.out_shape(s).unwrap();
    let mut y = vec![0.0; out_s.len()];
    layer.forward(&x, s, &mut y);
    let want = flatten(&conv_same(&to_map(&x, 7, 5, 2), &layer.params, 3, 2, 3, true));
    assert!(y.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
}
