//! Materialized split: manifest rows resolved to image-store rows.

use std::collections::HashMap;
use std::sync::Arc;

use super::manifest::{ClassDistribution, DatasetManifest, Locator};
use super::synthetic::ImageStore;
use crate::error::{Error, Result};

/// A split ready for batching: labels plus indices into a shared image store.
/// Resampled manifests join on the locator, so duplicated samples share the
/// same backing row without copying pixels.
#[derive(Debug, Clone)]
pub struct TensorDataset {
    pub classes: Vec<String>,
    pub store: Arc<ImageStore>,
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
}

impl TensorDataset {
    pub fn from_manifest(
        manifest: &DatasetManifest,
        store: Arc<ImageStore>,
        locator_rows: &HashMap<Locator, usize>,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(manifest.len());
        let mut labels = Vec::with_capacity(manifest.len());
        for sample in manifest.samples() {
            let row = *locator_rows.get(&sample.locator).ok_or_else(|| {
                Error::Data(format!(
                    "sample `{}` has no backing image row for locator {}",
                    sample.id, sample.locator
                ))
            })?;
            rows.push(row);
            labels.push(sample.class);
        }
        Ok(TensorDataset {
            classes: manifest.classes().to_vec(),
            store,
            rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.store.row_len()
    }

    pub fn distribution(&self) -> ClassDistribution {
        let mut counts = vec![0u64; self.classes.len()];
        for &label in &self.labels {
            counts[label] += 1;
        }
        ClassDistribution::new(self.classes.clone(), counts).expect("congruent by construction")
    }

    /// Copy the images at `order` (positions within this dataset) into a
    /// contiguous [len(order), c, h, w] buffer.
    pub fn gather(&self, order: &[usize], out: &mut Vec<f32>) {
        let row_len = self.image_len();
        out.clear();
        out.reserve(order.len() * row_len);
        for &pos in order {
            out.extend_from_slice(self.store.row(self.rows[pos]));
        }
    }

    pub fn labels_at(&self, order: &[usize]) -> Vec<usize> {
        order.iter().map(|&pos| self.labels[pos]).collect()
    }
}

/// Build the locator -> store-row join map for a generated dataset, where
/// manifest row i is backed by store row i.
pub fn locator_rows(manifest: &DatasetManifest) -> HashMap<Locator, usize> {
    manifest
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.locator.clone(), i))
        .collect()
}
