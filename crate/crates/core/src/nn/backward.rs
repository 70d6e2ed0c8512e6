//! Exact backpropagation through the four layer kinds.

use crate::error::{Error, Result};
use crate::nn::forward::{forward_trace, ForwardTrace};
use crate::nn::loss::loss_and_dlogits;
use crate::nn::params::{GradientSet, LayerParams, ParameterSet};
use crate::nn::spec::{same_pad_low, LayerKind, ModelSpec, Padding};
use crate::tensor::Tensor;

pub struct BackwardResult {
    pub loss: f64,
    pub grads: GradientSet,
}

#[allow(clippy::too_many_arguments)]
fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    dout: &Tensor,
    stride: usize,
    padding: Padding,
) -> (Tensor, Tensor, Tensor) {
    let (b, h, w, in_c) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    let (kh, kw, out_c) = (weights.shape()[0], weights.shape()[1], weights.shape()[3]);
    let (oh, ow) = (dout.shape()[1], dout.shape()[2]);
    let (pad_h, pad_w) = match padding {
        Padding::Same => (
            same_pad_low(h, kh, stride) as isize,
            same_pad_low(w, kw, stride) as isize,
        ),
        Padding::Valid => (0, 0),
    };

    let mut dinput = Tensor::zeros(input.shape());
    let mut dweights = Tensor::zeros(weights.shape());
    let mut dbias = Tensor::zeros(&[out_c]);

    let xd = input.data();
    let wd = weights.data();
    let gd = dout.data();
    let dxd = dinput.data_mut();
    let dwd = dweights.data_mut();
    let dbd = dbias.data_mut();

    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let g_base = ((bi * oh + oy) * ow + ox) * out_c;
                let grow = &gd[g_base..g_base + out_c];
                for (db, g) in dbd.iter_mut().zip(grow.iter()) {
                    *db += g;
                }
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
                            let x = xd[in_base + ic];
                            let wrow = &wd[w_base + ic * out_c..w_base + (ic + 1) * out_c];
                            let dwrow =
                                &mut dwd[w_base + ic * out_c..w_base + (ic + 1) * out_c];
                            let mut dx = 0.0;
                            for ((dw, wv), g) in
                                dwrow.iter_mut().zip(wrow.iter()).zip(grow.iter())
                            {
                                *dw += x * g;
                                dx += wv * g;
                            }
                            dxd[in_base + ic] += dx;
                        }
                    }
                }
            }
        }
    }
    (dinput, dweights, dbias)
}

fn dense_backward(input: &Tensor, weights: &Tensor, dout: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (b, f) = (input.shape()[0], input.shape()[1]);
    let o = weights.shape()[1];
    let mut dinput = Tensor::zeros(input.shape());
    let mut dweights = Tensor::zeros(weights.shape());
    let mut dbias = Tensor::zeros(&[o]);

    let xd = input.data();
    let wd = weights.data();
    let gd = dout.data();
    let dxd = dinput.data_mut();
    let dwd = dweights.data_mut();
    let dbd = dbias.data_mut();

    for bi in 0..b {
        let grow = &gd[bi * o..(bi + 1) * o];
        for (db, g) in dbd.iter_mut().zip(grow.iter()) {
            *db += g;
        }
        for fi in 0..f {
            let x = xd[bi * f + fi];
            let wrow = &wd[fi * o..(fi + 1) * o];
            let dwrow = &mut dwd[fi * o..(fi + 1) * o];
            let mut dx = 0.0;
            for ((dw, wv), g) in dwrow.iter_mut().zip(wrow.iter()).zip(grow.iter()) {
                *dw += x * g;
                dx += wv * g;
            }
            dxd[bi * f + fi] = dx;
        }
    }
    (dinput, dweights, dbias)
}

fn relu_backward(input: &Tensor, dout: &Tensor) -> Tensor {
    let mut dinput = dout.clone();
    for (d, x) in dinput.data_mut().iter_mut().zip(input.data()) {
        if *x <= 0.0 {
            *d = 0.0;
        }
    }
    dinput
}

/// Gradients of `loss_ce + lambda * loss_distill` with respect to every
/// parameter. `labels` drives the cross-entropy term, `target_logits` the
/// distillation term; either may be absent.
pub fn backward(
    spec: &ModelSpec,
    params: &ParameterSet,
    batch: &Tensor,
    labels: Option<&[u8]>,
    target_logits: Option<&Tensor>,
    lambda: f64,
) -> Result<BackwardResult> {
    if lambda < 0.0 {
        return Err(Error::Config("lambda must be >= 0".into()));
    }
    let trace = forward_trace(spec, params, batch)?;
    backward_from_trace(spec, params, &trace, labels, target_logits, lambda)
}

pub(crate) fn backward_from_trace(
    spec: &ModelSpec,
    params: &ParameterSet,
    trace: &ForwardTrace,
    labels: Option<&[u8]>,
    target_logits: Option<&Tensor>,
    lambda: f64,
) -> Result<BackwardResult> {
    let (loss, mut grad) = loss_and_dlogits(trace.logits(), labels, target_logits, lambda)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: "backward loss".into(),
        });
    }

    let mut grads = GradientSet::new();
    for (idx, layer) in spec.layers.iter().enumerate().rev() {
        let input = &trace.acts[idx];
        grad = match &layer.kind {
            LayerKind::Conv2D {
                stride, padding, ..
            } => {
                let p = params.get(&layer.name).expect("validated by forward");
                let (dinput, dw, db) = conv2d_backward(input, &p.weights, &grad, *stride, *padding);
                grads.insert(
                    layer.name.clone(),
                    LayerParams {
                        weights: dw,
                        bias: db,
                    },
                );
                dinput
            }
            LayerKind::Dense { .. } => {
                let p = params.get(&layer.name).expect("validated by forward");
                let (dinput, dw, db) = dense_backward(input, &p.weights, &grad);
                grads.insert(
                    layer.name.clone(),
                    LayerParams {
                        weights: dw,
                        bias: db,
                    },
                );
                dinput
            }
            LayerKind::Relu => relu_backward(input, &grad),
            LayerKind::Flatten => grad.reshaped(input.shape())?,
        };
    }
    grads.check_finite("gradients")?;
    Ok(BackwardResult { loss, grads })
}
