//! Layout-pattern datasets: synthetic generation, file format, splitting and
//! client partitioning.

pub mod format;
pub mod generate;
pub mod partition;
pub mod split;

pub use format::{load_csv, load_dataset, save_dataset};
pub use generate::{generate_synthetic, rule_based_label};
pub use partition::{partition, PartitionMode, PartitionPlan};
pub use split::split_public_private;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const GRID: usize = 12;
pub const PIXELS: usize = GRID * GRID;

/// One 12x12 binary layout clip with its class: hotspot = 1, non-hotspot = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Row-major pixels, each exactly 0.0 or 1.0.
    pub grid: Vec<f64>,
    pub label: u8,
}

impl Sample {
    pub fn new(grid: Vec<f64>, label: u8) -> Result<Self> {
        if grid.len() != PIXELS {
            return Err(Error::Data(format!(
                "sample grid must have {PIXELS} pixels, got {}",
                grid.len()
            )));
        }
        if !grid.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(Error::Data("sample pixels must be 0 or 1".into()));
        }
        if label > 1 {
            return Err(Error::Data(format!("label must be 0 or 1, got {label}")));
        }
        Ok(Sample { grid, label })
    }
}

/// Ordered, immutable-after-creation collection of samples. Order is part of
/// the dataset identity: replay determinism depends on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Self {
        Dataset {
            name: name.into(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn hotspot_count(&self) -> usize {
        self.samples.iter().filter(|s| s.label == 1).count()
    }

    pub fn hotspot_rate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.hotspot_count() as f64 / self.len() as f64
        }
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Batch tensor `[n, 12, 12, 1]` for the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<u8>)> {
        let mut data = Vec::with_capacity(indices.len() * PIXELS);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let sample = self
                .samples
                .get(i)
                .ok_or_else(|| Error::Data(format!("sample index {i} out of range")))?;
            data.extend_from_slice(&sample.grid);
            labels.push(sample.label);
        }
        let batch = Tensor::from_vec(&[indices.len(), GRID, GRID, 1], data)?;
        Ok((batch, labels))
    }

    /// Whole dataset as one batch.
    pub fn full_batch(&self) -> Result<(Tensor, Vec<u8>)> {
        let indices: Vec<usize> = (0..self.len()).collect();
        self.batch(&indices)
    }

    /// Subset in the given index order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Result<Dataset> {
        let mut samples = Vec::with_capacity(indices.len());
        for &i in indices {
            samples.push(
                self.samples
                    .get(i)
                    .ok_or_else(|| Error::Data(format!("sample index {i} out of range")))?
                    .clone(),
            );
        }
        Ok(Dataset::new(name, samples))
    }
}
