//! Forward evaluation.
//!
//! Activations are `[B, H, W, C]` row-major for spatial stages and `[B, F]`
//! after flattening. All evaluation is deterministic: identical inputs give
//! bit-identical outputs.

use crate::error::{Error, Result};
use crate::nn::params::ParameterSet;
use crate::nn::spec::{same_pad_low, LayerKind, ModelSpec, Padding};
use crate::tensor::Tensor;

/// Per-layer activation record: `acts[0]` is the batch input, `acts[k + 1]`
/// the output of layer `k`.
pub struct ForwardTrace {
    pub acts: Vec<Tensor>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &Tensor {
        self.acts.last().expect("trace holds at least the input")
    }
}

pub(crate) fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Tensor {
    let (b, h, w, in_c) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    let (kh, kw, out_c) = (weights.shape()[0], weights.shape()[1], weights.shape()[3]);
    let (oh, ow, pad_h, pad_w) = match padding {
        Padding::Same => (
            h.div_ceil(stride),
            w.div_ceil(stride),
            same_pad_low(h, kh, stride) as isize,
            same_pad_low(w, kw, stride) as isize,
        ),
        Padding::Valid => ((h - kh) / stride + 1, (w - kw) / stride + 1, 0, 0),
    };

    let mut out = Tensor::zeros(&[b, oh, ow, out_c]);
    let xd = input.data();
    let wd = weights.data();
    let bd = bias.data();
    let od = out.data_mut();

    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let out_base = ((bi * oh + oy) * ow + ox) * out_c;
                od[out_base..out_base + out_c].copy_from_slice(bd);
                for ky in 0..kh {
                    let iy = (oy * stride) as isize + ky as isize - pad_h;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride) as isize + kx as isize - pad_w;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let in_base = ((bi * h + iy as usize) * w + ix as usize) * in_c;
                        let w_base = (ky * kw + kx) * in_c * out_c;
                        for ic in 0..in_c {
                            let v = xd[in_base + ic];
                            let wrow = &wd[w_base + ic * out_c..w_base + (ic + 1) * out_c];
                            let orow = &mut od[out_base..out_base + out_c];
                            for (o, wv) in orow.iter_mut().zip(wrow.iter()) {
                                *o += v * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Tensor {
    let (b, f) = (input.shape()[0], input.shape()[1]);
    let o = weights.shape()[1];
    let mut out = Tensor::zeros(&[b, o]);
    let xd = input.data();
    let wd = weights.data();
    let od = out.data_mut();
    for bi in 0..b {
        let orow = &mut od[bi * o..(bi + 1) * o];
        orow.copy_from_slice(bias.data());
        for fi in 0..f {
            let v = xd[bi * f + fi];
            let wrow = &wd[fi * o..(fi + 1) * o];
            for (ov, wv) in orow.iter_mut().zip(wrow.iter()) {
                *ov += v * wv;
            }
        }
    }
    out
}

fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

fn flatten_forward(input: &Tensor) -> Tensor {
    let b = input.shape()[0];
    let f: usize = input.shape()[1..].iter().product();
    input.clone().reshaped(&[b, f]).expect("same element count")
}

fn layer_forward(spec: &ModelSpec, params: &ParameterSet, layer_idx: usize, input: &Tensor) -> Result<Tensor> {
    let layer = &spec.layers[layer_idx];
    Ok(match &layer.kind {
        LayerKind::Conv2D {
            stride, padding, ..
        } => {
            let p = params.get(&layer.name).ok_or_else(|| {
                Error::InvalidModel(format!("missing parameters for layer {}", layer.name))
            })?;
            conv2d_forward(input, &p.weights, &p.bias, *stride, *padding)
        }
        LayerKind::Dense { .. } => {
            let p = params.get(&layer.name).ok_or_else(|| {
                Error::InvalidModel(format!("missing parameters for layer {}", layer.name))
            })?;
            dense_forward(input, &p.weights, &p.bias)
        }
        LayerKind::Relu => relu_forward(input),
        LayerKind::Flatten => flatten_forward(input),
    })
}

fn check_batch_shape(spec: &ModelSpec, batch: &Tensor) -> Result<()> {
    let s = batch.shape();
    if s.len() != 4 || s[1..] != spec.input_shape {
        return Err(Error::shape_mismatch(
            "forward batch",
            &spec.input_shape,
            s,
        ));
    }
    Ok(())
}

/// Run the whole model, keeping every intermediate activation for backprop.
pub fn forward_trace(
    spec: &ModelSpec,
    params: &ParameterSet,
    batch: &Tensor,
) -> Result<ForwardTrace> {
    check_batch_shape(spec, batch)?;
    let mut acts = Vec::with_capacity(spec.layers.len() + 1);
    acts.push(batch.clone());
    for idx in 0..spec.layers.len() {
        let next = layer_forward(spec, params, idx, acts.last().unwrap())?;
        acts.push(next);
    }
    acts.last().unwrap().check_finite("forward logits")?;
    Ok(ForwardTrace { acts })
}

/// Pre-softmax logits `[B, 2]` for `batch`.
pub fn forward(spec: &ModelSpec, params: &ParameterSet, batch: &Tensor) -> Result<Tensor> {
    check_batch_shape(spec, batch)?;
    let mut act = batch.clone();
    for idx in 0..spec.layers.len() {
        act = layer_forward(spec, params, idx, &act)?;
    }
    act.check_finite("forward logits")?;
    Ok(act)
}

/// Resume evaluation at layer `start` from a cached activation (the input of
/// that layer). Gradient checking perturbs one layer's parameters at a time
/// and only re-runs the suffix.
pub(crate) fn forward_from(
    spec: &ModelSpec,
    params: &ParameterSet,
    input_of_start: &Tensor,
    start: usize,
) -> Result<Tensor> {
    let mut act = input_of_start.clone();
    for idx in start..spec.layers.len() {
        act = layer_forward(spec, params, idx, &act)?;
    }
    Ok(act)
}
