//! Parameter storage keyed by layer name.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::spec::{ActShape, LayerKind, ModelSpec};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Map from parameterized-layer name to its weights and bias. Iteration is
/// always in layer-name order (BTreeMap), which fixes fold order everywhere.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParameterSet {
    map: BTreeMap<String, LayerParams>,
}

/// Gradients share the exact shape map of the parameters they differentiate.
pub type GradientSet = ParameterSet;

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, params: LayerParams) {
        self.map.insert(name.into(), params);
    }

    pub fn get(&self, name: &str) -> Option<&LayerParams> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut LayerParams> {
        self.map.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LayerParams)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut LayerParams)> {
        self.map.iter_mut()
    }

    pub fn layer_names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total scalar parameter count.
    pub fn scalar_count(&self) -> usize {
        self.map
            .values()
            .map(|p| p.weights.len() + p.bias.len())
            .sum()
    }

    pub fn zeros_like(&self) -> Self {
        let map = self
            .map
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    LayerParams {
                        weights: Tensor::zeros(v.weights.shape()),
                        bias: Tensor::zeros(v.bias.shape()),
                    },
                )
            })
            .collect();
        ParameterSet { map }
    }

    /// Subset containing only the named layers (missing names are an error).
    pub fn subset(&self, names: impl IntoIterator<Item = impl AsRef<str>>) -> Result<Self> {
        let mut out = ParameterSet::new();
        for name in names {
            let name = name.as_ref();
            let params = self
                .map
                .get(name)
                .ok_or_else(|| Error::InvalidModel(format!("unknown layer {name}")))?;
            out.insert(name, params.clone());
        }
        Ok(out)
    }

    /// Overwrite the layers present in `other` with its values; shapes must
    /// match exactly.
    pub fn overwrite_from(&mut self, other: &ParameterSet) -> Result<()> {
        for (name, src) in other.iter() {
            let dst = self
                .map
                .get_mut(name)
                .ok_or_else(|| Error::SharedShapeMismatch {
                    layer: name.clone(),
                })?;
            if dst.weights.shape() != src.weights.shape() || dst.bias.shape() != src.bias.shape() {
                return Err(Error::SharedShapeMismatch {
                    layer: name.clone(),
                });
            }
            *dst = src.clone();
        }
        Ok(())
    }

    /// `self += other * scale` entry-wise over the identical key set.
    pub fn add_scaled(&mut self, other: &ParameterSet, scale: f64) -> Result<()> {
        if self.map.len() != other.map.len() {
            return Err(Error::shape_mismatch(
                "ParameterSet::add_scaled",
                self.map.len(),
                other.map.len(),
            ));
        }
        for ((name, dst), (other_name, src)) in self.map.iter_mut().zip(other.map.iter()) {
            if name != other_name {
                return Err(Error::SharedShapeMismatch {
                    layer: other_name.clone(),
                });
            }
            dst.weights
                .add_scaled(&src.weights, scale)
                .map_err(|_| Error::SharedShapeMismatch {
                    layer: name.clone(),
                })?;
            dst.bias
                .add_scaled(&src.bias, scale)
                .map_err(|_| Error::SharedShapeMismatch {
                    layer: name.clone(),
                })?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for params in self.map.values_mut() {
            params.weights.scale(s);
            params.bias.scale(s);
        }
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        for (name, p) in &self.map {
            p.weights.check_finite(&format!("{context}/{name}/weights"))?;
            p.bias.check_finite(&format!("{context}/{name}/bias"))?;
        }
        Ok(())
    }

    /// Flatten all scalars in deterministic order (name order, weights then
    /// bias). Inverse of [`ParameterSet::assign_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for p in self.map.values() {
            out.extend_from_slice(p.weights.data());
            out.extend_from_slice(p.bias.data());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.scalar_count() {
            return Err(Error::shape_mismatch(
                "assign_flat",
                self.scalar_count(),
                flat.len(),
            ));
        }
        let mut offset = 0;
        for p in self.map.values_mut() {
            let w = p.weights.data_mut();
            w.copy_from_slice(&flat[offset..offset + w.len()]);
            offset += w.len();
            let b = p.bias.data_mut();
            b.copy_from_slice(&flat[offset..offset + b.len()]);
            offset += b.len();
        }
        Ok(())
    }

    /// Euclidean norm over all scalars.
    pub fn l2_norm(&self) -> f64 {
        self.map
            .values()
            .flat_map(|p| {
                p.weights
                    .data()
                    .iter()
                    .chain(p.bias.data().iter())
                    .map(|v| v * v)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Expected parameter shapes for each parameterized layer of `spec`.
///
/// Conv2D weights are `[kh, kw, in_c, out_c]`, Dense weights `[in, out]`;
/// bias is `[out]` for both.
pub fn parameter_shapes(spec: &ModelSpec) -> Result<Vec<(String, Vec<usize>, Vec<usize>)>> {
    let inputs = spec.layer_input_shapes()?;
    let mut out = Vec::new();
    for (layer, input) in spec.layers.iter().zip(inputs.iter()) {
        match (&layer.kind, input) {
            (
                LayerKind::Conv2D {
                    kernel_h,
                    kernel_w,
                    out_channels,
                    ..
                },
                ActShape::Spatial(_, _, in_c),
            ) => out.push((
                layer.name.clone(),
                vec![*kernel_h, *kernel_w, *in_c, *out_channels],
                vec![*out_channels],
            )),
            (LayerKind::Dense { width }, ActShape::Flat(f)) => {
                out.push((layer.name.clone(), vec![*f, *width], vec![*width]))
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Glorot-uniform initialization: each weight uniform in
/// `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`, drawn as
/// `(2u - 1) * a` from consecutive 53-bit uniforms of `rng`; biases uniform
/// in `[-0.01, 0.01]` from the same stream. Non-zero biases keep ReLU
/// pre-activations off exact kinks for the binary inputs this crate trains
/// on (an all-dark receptive field leaves the pre-activation equal to the
/// bias). Draw order: layers in model order, weights row-major, then bias.
pub fn init_params(spec: &ModelSpec, rng: &mut impl Rng) -> Result<ParameterSet> {
    let mut params = ParameterSet::new();
    for (name, w_shape, b_shape) in parameter_shapes(spec)? {
        let (fan_in, fan_out) = match w_shape.len() {
            4 => (
                w_shape[0] * w_shape[1] * w_shape[2],
                w_shape[0] * w_shape[1] * w_shape[3],
            ),
            2 => (w_shape[0], w_shape[1]),
            _ => unreachable!("parameter_shapes yields rank 2 or 4"),
        };
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let len: usize = w_shape.iter().product();
        let data = (0..len)
            .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * a)
            .collect();
        let bias_len: usize = b_shape.iter().product();
        let bias = (0..bias_len)
            .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * 0.01)
            .collect();
        params.insert(
            name,
            LayerParams {
                weights: Tensor::from_vec(&w_shape, data)?,
                bias: Tensor::from_vec(&b_shape, bias)?,
            },
        );
    }
    Ok(params)
}

/// Check `params` keys and shapes against what `spec` requires.
pub fn validate_params(spec: &ModelSpec, params: &ParameterSet) -> Result<()> {
    let expected = parameter_shapes(spec)?;
    if expected.len() != params.len() {
        return Err(Error::InvalidModel(format!(
            "parameter set has {} layers, spec requires {}",
            params.len(),
            expected.len()
        )));
    }
    for (name, w_shape, b_shape) in expected {
        let p = params
            .get(&name)
            .ok_or_else(|| Error::InvalidModel(format!("missing parameters for layer {name}")))?;
        if p.weights.shape() != w_shape.as_slice() || p.bias.shape() != b_shape.as_slice() {
            return Err(Error::shape_mismatch(
                format!("parameters of layer {name}"),
                (w_shape, b_shape),
                (p.weights.shape(), p.bias.shape()),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::rng::{domains, stream};

    #[test]
    fn init_matches_spec_shapes() {
        let spec = models::table2(false);
        let mut rng = stream(1, domains::CLIENT, 0);
        let params = init_params(&spec, &mut rng).unwrap();
        validate_params(&spec, &params).unwrap();
        // Table II: conv1 3x3x1x16, fc3 240x2
        assert_eq!(params.get("conv1").unwrap().weights.shape(), [3, 3, 1, 16]);
        assert_eq!(params.get("fc3").unwrap().weights.shape(), [240, 2]);
    }

    #[test]
    fn init_is_deterministic_per_stream() {
        let spec = models::small(false);
        let a = init_params(&spec, &mut stream(9, domains::CLIENT, 3)).unwrap();
        let b = init_params(&spec, &mut stream(9, domains::CLIENT, 3)).unwrap();
        assert_eq!(a, b);
        let c = init_params(&spec, &mut stream(9, domains::CLIENT, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn flat_roundtrip_preserves_values() {
        let spec = models::small(false);
        let params = init_params(&spec, &mut stream(2, domains::CLIENT, 0)).unwrap();
        let flat = params.to_flat();
        let mut other = params.zeros_like();
        other.assign_flat(&flat).unwrap();
        assert_eq!(params, other);
    }

    #[test]
    fn overwrite_reports_mismatched_layer_by_name() {
        let spec = models::small(false);
        let mut params = init_params(&spec, &mut stream(2, domains::CLIENT, 0)).unwrap();
        let mut bad = ParameterSet::new();
        bad.insert(
            "fc2",
            LayerParams {
                weights: Tensor::zeros(&[3, 3]),
                bias: Tensor::zeros(&[3]),
            },
        );
        let err = params.overwrite_from(&bad).unwrap_err();
        assert!(err.to_string().contains("fc2"));
    }
}
