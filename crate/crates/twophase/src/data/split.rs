//! Deterministic stratified train/validation/test splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::seeds;

/// Split fractions plus the seed driving the per-class shuffles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train,
            validation,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 80%-10%-10% default.
    pub fn standard(seed: u64) -> Self {
        SplitSpec {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train", self.train),
            ("validation", self.validation),
            ("test", self.test),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!(
                    "split fraction `{name}` = {f} is outside [0, 1]"
                )));
            }
        }
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` samples to (train, val, test),
    /// with the guarantee that a non-empty class puts at least one sample in
    /// train. Remainder ties resolve train-first.
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let fractions = [self.train, self.validation, self.test];
        let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - counts[a] as f64;
            let rb = exact[b] - counts[b] as f64;
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for i in 0..(n - assigned) {
            counts[order[i % 3]] += 1;
        }
        if n >= 1 && counts[0] == 0 {
            if counts[1] > 0 {
                counts[1] -= 1;
            } else {
                counts[2] -= 1;
            }
            counts[0] += 1;
        }
        [counts[0], counts[1], counts[2]]
    }
}

/// Stratified split: every class is shuffled with its own seeded stream and
/// apportioned by largest remainder, so the three outputs partition the input
/// and are reproducible under the spec seed.
pub fn split(
    manifest: &DatasetManifest,
    spec: &SplitSpec,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest)> {
    spec.validate()?;
    let classes = manifest.classes().to_vec();
    let mut destination = vec![0u8; manifest.len()]; // 0 train, 1 val, 2 test

    for class_idx in 0..classes.len() {
        let mut members: Vec<usize> = manifest
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.class == class_idx)
            .map(|(i, _)| i)
            .collect();
        let mut rng = seeds::rng(spec.seed, &["split", &class_idx.to_string()]);
        members.shuffle(&mut rng);
        let [n_train, n_val, _] = spec.apportion(members.len());
        for (pos, &sample_idx) in members.iter().enumerate() {
            destination[sample_idx] = if pos < n_train {
                0
            } else if pos < n_train + n_val {
                1
            } else {
                2
            };
        }
    }

    let pick = |which: u8| -> Result<DatasetManifest> {
        DatasetManifest::new(
            classes.clone(),
            manifest
                .samples()
                .iter()
                .zip(destination.iter())
                .filter(|(_, &d)| d == which)
                .map(|(s, _)| s.clone())
                .collect(),
        )
    };
    Ok((pick(0)?, pick(1)?, pick(2)?))
}
