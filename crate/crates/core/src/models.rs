//! Model zoo for the hotspot-detection task.
//!
//! Two families over 12x12x1 binary layout clips, each with a homogeneous
//! variant and a wider heterogeneous variant. In both families the first
//! convolution and the last two dense layers are the shared (identical)
//! layers; the heterogeneous variant widens only private middle convolutions
//! and keeps the flattened width, so shared shapes match across variants.

use std::collections::BTreeSet;

use crate::nn::spec::{LayerSpec, ModelSpec, Padding};

fn shared(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// The full CNN: five 3x3 convolutions then three dense layers (320, 240, 2),
/// ReLU after every convolution and after fc1/fc2.
///
/// conv5 uses stride 2 with same padding to reach the 6x6x32 stage; a
/// stride-1 valid 3x3 convolution cannot map 12x12 to 6x6, so the stated
/// output size wins over the stated stride/padding. `hetero` widens
/// conv2-conv4 from (16, 16, 32) to 24 channels each; conv1, the flattened
/// width (1152), fc2 and fc3 are unchanged, keeping the shared layers
/// shape-compatible across variants.
pub fn table2(hetero: bool) -> ModelSpec {
    let (w2, w3, w4) = if hetero { (24, 24, 24) } else { (16, 16, 32) };
    ModelSpec {
        input_shape: [12, 12, 1],
        layers: vec![
            LayerSpec::conv2d("conv1", 3, 16, 1, Padding::Same),
            LayerSpec::relu("relu1"),
            LayerSpec::conv2d("conv2", 3, w2, 1, Padding::Same),
            LayerSpec::relu("relu2"),
            LayerSpec::conv2d("conv3", 3, w3, 1, Padding::Same),
            LayerSpec::relu("relu3"),
            LayerSpec::conv2d("conv4", 3, w4, 1, Padding::Same),
            LayerSpec::relu("relu4"),
            LayerSpec::conv2d("conv5", 3, 32, 2, Padding::Same),
            LayerSpec::relu("relu5"),
            LayerSpec::flatten("flatten"),
            LayerSpec::dense("fc1", 320),
            LayerSpec::relu("relu_fc1"),
            LayerSpec::dense("fc2", 240),
            LayerSpec::relu("relu_fc2"),
            LayerSpec::dense("fc3", 2),
        ],
        shared_layer_names: shared(&["conv1", "fc2", "fc3"]),
    }
}

/// Desk-scale CNN for fast experiment sweeps: two stages of convolution
/// (stride-2 downsample) and two dense layers. `hetero` widens the private
/// middle convolution from 8 to 12 channels.
pub fn small(hetero: bool) -> ModelSpec {
    let mid = if hetero { 12 } else { 8 };
    ModelSpec {
        input_shape: [12, 12, 1],
        layers: vec![
            LayerSpec::conv2d("conv1", 3, 6, 1, Padding::Same),
            LayerSpec::relu("relu1"),
            LayerSpec::conv2d("conv2", 3, mid, 2, Padding::Same),
            LayerSpec::relu("relu2"),
            LayerSpec::conv2d("conv3", 3, 8, 1, Padding::Same),
            LayerSpec::relu("relu3"),
            LayerSpec::flatten("flatten"),
            LayerSpec::dense("fc1", 32),
            LayerSpec::relu("relu_fc1"),
            LayerSpec::dense("fc2", 2),
        ],
        shared_layer_names: shared(&["conv1", "fc1", "fc2"]),
    }
}
