//! Finite-difference verification of backpropagation.
//!
//! Compares analytic gradients against central differences with step 1e-5 on
//! a seeded 5% sample of the coordinates of every parameterized layer (at
//! least one coordinate per tensor). Relative error uses an absolute floor:
//! `|a - n| / max(|a|, |n|, 1e-6)`, so near-zero gradient pairs do not blow
//! up the ratio. A layer passes when its max relative error is below 1e-4.
//!
//! Perturbing one coordinate of layer `k` only changes activations from `k`
//! onward, so each probe re-runs the network suffix from the cached trace
//! rather than the whole forward pass.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::exec::map_indexed;
use crate::nn::backward::backward_from_trace;
use crate::nn::forward::{forward_from, forward_trace};
use crate::nn::loss::total_loss;
use crate::nn::params::{GradientSet, ParameterSet};
use crate::nn::spec::ModelSpec;
use crate::rng::{domains, stream};
use crate::tensor::Tensor;

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_FRACTION: f64 = 0.05;
const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct LayerCheck {
    pub layer: String,
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < GRADCHECK_TOLERANCE
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub layers: Vec<LayerCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.layers.iter().all(LayerCheck::passed)
    }

    /// Layers exceeding the tolerance, worst first.
    pub fn failing_layers(&self) -> Vec<&LayerCheck> {
        let mut out: Vec<&LayerCheck> = self.layers.iter().filter(|l| !l.passed()).collect();
        out.sort_by(|a, b| b.max_rel_err.total_cmp(&a.max_rel_err));
        out
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Weights,
    Bias,
}

#[derive(Clone)]
struct Job {
    layer_idx: usize,
    layer_name: String,
    slot: Slot,
    coord: usize,
    analytic: f64,
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

fn sample_coords(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let want = ((len as f64 * GRADCHECK_FRACTION).ceil() as usize).clamp(1, len);
    let mut idx: Vec<usize> = (0..len).collect();
    let (sampled, _) = idx.partial_shuffle(rng, want);
    let mut sampled = sampled.to_vec();
    sampled.sort_unstable();
    sampled
}

/// Verify the analytic gradients of `loss_ce + lambda * loss_distill`.
pub fn gradcheck(
    spec: &ModelSpec,
    params: &ParameterSet,
    batch: &Tensor,
    labels: Option<&[u8]>,
    lambda: f64,
    target_logits: Option<&Tensor>,
    seed: u64,
) -> Result<GradCheckReport> {
    let trace = forward_trace(spec, params, batch)?;
    let analytic = backward_from_trace(spec, params, &trace, labels, target_logits, lambda)?;
    check_against(
        spec,
        params,
        &trace.acts,
        &analytic.grads,
        labels,
        target_logits,
        lambda,
        seed,
    )
}

/// Compare `grads` (normally the output of backprop; tests may corrupt it)
/// against central finite differences.
#[allow(clippy::too_many_arguments)]
pub(crate) fn check_against(
    spec: &ModelSpec,
    params: &ParameterSet,
    acts: &[Tensor],
    grads: &GradientSet,
    labels: Option<&[u8]>,
    target_logits: Option<&Tensor>,
    lambda: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = stream(seed, domains::GRADCHECK, 0);
    let mut jobs = Vec::new();
    for (layer_idx, layer) in spec.layers.iter().enumerate() {
        if !layer.is_parameterized() {
            continue;
        }
        let g = grads.get(&layer.name).expect("gradients cover all layers");
        for (slot, tensor) in [(Slot::Weights, &g.weights), (Slot::Bias, &g.bias)] {
            for coord in sample_coords(tensor.len(), &mut rng) {
                jobs.push(Job {
                    layer_idx,
                    layer_name: layer.name.clone(),
                    slot,
                    coord,
                    analytic: tensor.data()[coord],
                });
            }
        }
    }

    // Fixed-size chunks keep the per-chunk parameter clone amortized while
    // leaving results independent of thread count.
    const CHUNK: usize = 256;
    let n_chunks = jobs.len().div_ceil(CHUNK);
    let errors: Vec<Vec<f64>> = map_indexed(n_chunks, |chunk_idx| {
        let lo = chunk_idx * CHUNK;
        let hi = (lo + CHUNK).min(jobs.len());
        let mut scratch = params.clone();
        jobs[lo..hi]
            .iter()
            .map(|job| {
                let loss_at = |scratch: &ParameterSet| -> f64 {
                    let logits =
                        forward_from(spec, scratch, &acts[job.layer_idx], job.layer_idx)
                            .expect("suffix evaluation");
                    total_loss(&logits, labels, target_logits, lambda)
                        .expect("loss evaluation")
                };
                let p = scratch.get_mut(&job.layer_name).unwrap();
                let slot = match job.slot {
                    Slot::Weights => p.weights.data_mut(),
                    Slot::Bias => p.bias.data_mut(),
                };
                let orig = slot[job.coord];
                slot[job.coord] = orig + GRADCHECK_STEP;
                let plus = loss_at(&scratch);
                let p = scratch.get_mut(&job.layer_name).unwrap();
                let slot = match job.slot {
                    Slot::Weights => p.weights.data_mut(),
                    Slot::Bias => p.bias.data_mut(),
                };
                slot[job.coord] = orig - GRADCHECK_STEP;
                let minus = loss_at(&scratch);
                let p = scratch.get_mut(&job.layer_name).unwrap();
                let slot = match job.slot {
                    Slot::Weights => p.weights.data_mut(),
                    Slot::Bias => p.bias.data_mut(),
                };
                slot[job.coord] = orig;
                let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
                let e = rel_err(job.analytic, numeric);
                if e > GRADCHECK_TOLERANCE {
                    eprintln!(
                        "GRADCHECK DEBUG layer={} slot={} coord={} analytic={:+.9e} numeric={:+.9e}",
                        job.layer_name,
                        match job.slot { Slot::Weights => "w", Slot::Bias => "b" },
                        job.coord,
                        job.analytic,
                        numeric
                    );
                }
                e
            })
            .collect()
    });

    let mut layers: Vec<LayerCheck> = Vec::new();
    for (job, err) in jobs.iter().zip(errors.iter().flatten()) {
        match layers.iter_mut().find(|l| l.layer == job.layer_name) {
            Some(entry) => {
                entry.max_rel_err = entry.max_rel_err.max(*err);
                entry.coords_checked += 1;
            }
            None => layers.push(LayerCheck {
                layer: job.layer_name.clone(),
                max_rel_err: *err,
                coords_checked: 1,
            }),
        }
    }
    Ok(GradCheckReport { layers })
}
