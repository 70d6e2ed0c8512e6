//! Layer and model descriptions plus static shape inference.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output spatial size `ceil(in / stride)`; zero padding split low/high
    /// with the extra cell on the high side.
    Same,
    /// No padding; output spatial size `floor((in - k) / stride) + 1`.
    Valid,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Conv2D {
        kernel_h: usize,
        kernel_w: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
    },
    Dense {
        width: usize,
    },
    Relu,
    Flatten,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn conv2d(
        name: &str,
        kernel: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
    ) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Conv2D {
                kernel_h: kernel,
                kernel_w: kernel,
                out_channels,
                stride,
                padding,
            },
        }
    }

    pub fn dense(name: &str, width: usize) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Dense { width },
        }
    }

    pub fn relu(name: &str) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Relu,
        }
    }

    pub fn flatten(name: &str) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Flatten,
        }
    }

    /// Does this layer carry weights and bias?
    pub fn is_parameterized(&self) -> bool {
        matches!(
            self.kind,
            LayerKind::Conv2D { .. } | LayerKind::Dense { .. }
        )
    }
}

/// A layered model: ordered layers over a fixed `H x W x C` input, with a
/// subset of layer names designated identical (shared) across clients.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub shared_layer_names: BTreeSet<String>,
}

/// Activation shape between layers: spatial `[H, W, C]` or flat `[F]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActShape {
    Spatial(usize, usize, usize),
    Flat(usize),
}

impl ActShape {
    pub fn element_count(&self) -> usize {
        match *self {
            ActShape::Spatial(h, w, c) => h * w * c,
            ActShape::Flat(f) => f,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            ActShape::Spatial(h, w, c) => vec![h, w, c],
            ActShape::Flat(f) => vec![f],
        }
    }
}

fn conv_output_dim(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
    layer: &str,
) -> Result<usize> {
    match padding {
        Padding::Same => Ok(input.div_ceil(stride)),
        Padding::Valid => {
            if kernel > input {
                Err(Error::InvalidLayer {
                    layer: layer.to_string(),
                    reason: format!(
                        "valid padding underflow: kernel {kernel} larger than input {input}"
                    ),
                })
            } else {
                Ok((input - kernel) / stride + 1)
            }
        }
    }
}

/// Zero-padding rows/cols added before the first input element for `Same`.
pub(crate) fn same_pad_low(input: usize, kernel: usize, stride: usize) -> usize {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    total / 2
}

/// Per-layer output shapes for `spec`, validating the whole chain.
pub fn infer_shapes(spec: &ModelSpec) -> Result<Vec<ActShape>> {
    let [h, w, c] = spec.input_shape;
    let mut cur = ActShape::Spatial(h, w, c);
    let mut out = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        cur = match (&layer.kind, &cur) {
            (
                LayerKind::Conv2D {
                    kernel_h,
                    kernel_w,
                    out_channels,
                    stride,
                    padding,
                },
                ActShape::Spatial(h, w, _),
            ) => {
                let oh = conv_output_dim(*h, *kernel_h, *stride, *padding, &layer.name)?;
                let ow = conv_output_dim(*w, *kernel_w, *stride, *padding, &layer.name)?;
                ActShape::Spatial(oh, ow, *out_channels)
            }
            (LayerKind::Conv2D { .. }, ActShape::Flat(_)) => {
                return Err(Error::InvalidLayer {
                    layer: layer.name.clone(),
                    reason: "Conv2D requires a spatial input".into(),
                })
            }
            (LayerKind::Dense { width }, ActShape::Flat(_)) => ActShape::Flat(*width),
            (LayerKind::Dense { .. }, ActShape::Spatial(..)) => {
                return Err(Error::InvalidLayer {
                    layer: layer.name.clone(),
                    reason: "Dense requires a flat input (insert Flatten)".into(),
                })
            }
            (LayerKind::Relu, s) => s.clone(),
            (LayerKind::Flatten, s) => ActShape::Flat(s.element_count()),
        };
        out.push(cur.clone());
    }
    Ok(out)
}

impl ModelSpec {
    /// Validate structural invariants: positive kernel/stride, unique names,
    /// shared names present, shape inference succeeds, final width 2.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for layer in &self.layers {
            if !seen.insert(layer.name.clone()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate layer name {}",
                    layer.name
                )));
            }
            if let LayerKind::Conv2D {
                kernel_h,
                kernel_w,
                stride,
                out_channels,
                ..
            } = layer.kind
            {
                if kernel_h < 1 || kernel_w < 1 || stride < 1 || out_channels < 1 {
                    return Err(Error::InvalidLayer {
                        layer: layer.name.clone(),
                        reason: "kernel dims, stride and channels must be >= 1".into(),
                    });
                }
            }
        }
        for name in &self.shared_layer_names {
            if !seen.contains(name) {
                return Err(Error::InvalidModel(format!(
                    "shared layer {name} is not a layer of the model"
                )));
            }
        }
        let shapes = infer_shapes(self)?;
        match shapes.last() {
            Some(ActShape::Flat(2)) => Ok(()),
            other => Err(Error::InvalidModel(format!(
                "final layer must output width 2, got {other:?}"
            ))),
        }
    }

    /// Names of parameterized layers in model order.
    pub fn parameterized_layers(&self) -> Vec<&LayerSpec> {
        self.layers
            .iter()
            .filter(|l| l.is_parameterized())
            .collect()
    }

    /// Input activation shape of each layer (index-aligned with `layers`).
    pub fn layer_input_shapes(&self) -> Result<Vec<ActShape>> {
        let [h, w, c] = self.input_shape;
        let mut shapes = vec![ActShape::Spatial(h, w, c)];
        shapes.extend(infer_shapes(self)?);
        shapes.pop();
        Ok(shapes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(name: &str, out: usize, stride: usize, padding: Padding) -> LayerSpec {
        LayerSpec::conv2d(name, 3, out, stride, padding)
    }

    #[test]
    fn same_padding_preserves_spatial_dims_at_stride_1() {
        let spec = ModelSpec {
            input_shape: [12, 12, 1],
            layers: vec![conv("conv1", 16, 1, Padding::Same)],
            shared_layer_names: BTreeSet::new(),
        };
        let shapes = infer_shapes(&spec).unwrap();
        assert_eq!(shapes, vec![ActShape::Spatial(12, 12, 16)]);
    }

    #[test]
    fn relu_preserves_shape() {
        let spec = ModelSpec {
            input_shape: [12, 12, 16],
            layers: vec![LayerSpec::relu("r")],
            shared_layer_names: BTreeSet::new(),
        };
        assert_eq!(
            infer_shapes(&spec).unwrap(),
            vec![ActShape::Spatial(12, 12, 16)]
        );
    }

    #[test]
    fn stride_2_same_halves_12_to_6() {
        // ceil(12 / 2) = 6 by the same-padding arithmetic.
        let spec = ModelSpec {
            input_shape: [12, 12, 32],
            layers: vec![conv("conv5", 32, 2, Padding::Same)],
            shared_layer_names: BTreeSet::new(),
        };
        assert_eq!(
            infer_shapes(&spec).unwrap(),
            vec![ActShape::Spatial(6, 6, 32)]
        );
    }

    #[test]
    fn valid_padding_arithmetic_and_underflow() {
        let ok = ModelSpec {
            input_shape: [5, 5, 1],
            layers: vec![conv("c", 4, 2, Padding::Valid)],
            shared_layer_names: BTreeSet::new(),
        };
        // floor((5 - 3) / 2) + 1 = 2
        assert_eq!(infer_shapes(&ok).unwrap(), vec![ActShape::Spatial(2, 2, 4)]);

        let bad = ModelSpec {
            input_shape: [2, 2, 1],
            layers: vec![conv("tiny", 4, 1, Padding::Valid)],
            shared_layer_names: BTreeSet::new(),
        };
        let err = infer_shapes(&bad).unwrap_err();
        assert!(err.to_string().contains("tiny"), "error names the layer");
    }

    #[test]
    fn validate_rejects_duplicate_names_and_bad_final_width() {
        let dup = ModelSpec {
            input_shape: [2, 2, 1],
            layers: vec![LayerSpec::flatten("x"), LayerSpec::dense("x", 2)],
            shared_layer_names: BTreeSet::new(),
        };
        assert!(dup.validate().is_err());

        let wide = ModelSpec {
            input_shape: [2, 2, 1],
            layers: vec![LayerSpec::flatten("f"), LayerSpec::dense("d", 3)],
            shared_layer_names: BTreeSet::new(),
        };
        assert!(wide.validate().is_err());
    }

    #[test]
    fn same_pad_low_splits_padding_low_side_first() {
        assert_eq!(same_pad_low(12, 3, 1), 1);
        // stride 2: total pad 1, all of it on the high side
        assert_eq!(same_pad_low(12, 3, 2), 0);
    }
}
