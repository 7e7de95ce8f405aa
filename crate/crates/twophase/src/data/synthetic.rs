//! Synthetic long-tail image generator.
//!
//! Stands in for a real camera-trap corpus at desk scale: each class gets a
//! deterministic geometric template (an oriented bar plus a positioned disc
//! with class-specific channel weights), and each sample blends that template
//! with Gaussian pixel noise. Sample pixels depend only on (class, sample
//! seed), so any sample can be regenerated in isolation, bit-identically.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, Locator, Sample};
use crate::error::{Error, Result};
use crate::seeds;

/// Per-class sample counts: explicit, or a geometric decay from a head count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSpec {
    Explicit(Vec<u64>),
    Geometric { head: u64, ratio: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub class_count: usize,
    pub counts: CountSpec,
    /// Template weight in the blend, in (0, 1]. Higher means more separable.
    pub signal: f64,
    /// Standard deviation of the additive Gaussian pixel noise.
    pub noise_std: f64,
}

impl SyntheticSpec {
    /// Default long-tail dataset: 10 classes with geometric counts 4096..8.
    pub fn default_long_tail() -> Self {
        SyntheticSpec {
            height: 16,
            width: 16,
            channels: 3,
            class_count: 10,
            counts: CountSpec::Geometric {
                head: 4096,
                ratio: 0.5,
            },
            signal: 0.35,
            noise_std: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return Err(Error::Config("synthetic spec needs at least one class".into()));
        }
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::Config(format!(
                "synthetic image size {}x{}x{} must be non-zero",
                self.height, self.width, self.channels
            )));
        }
        if !(self.signal > 0.0 && self.signal <= 1.0) {
            return Err(Error::Config(format!(
                "signal strength {} must lie in (0, 1]",
                self.signal
            )));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Config("noise std must be non-negative".into()));
        }
        self.resolved_counts().map(|_| ())
    }

    /// Per-class counts after resolving geometric decay (each at least 1).
    pub fn resolved_counts(&self) -> Result<Vec<u64>> {
        match &self.counts {
            CountSpec::Explicit(counts) => {
                if counts.len() != self.class_count {
                    return Err(Error::Config(format!(
                        "{} explicit counts for {} classes",
                        counts.len(),
                        self.class_count
                    )));
                }
                if counts.iter().any(|&c| c == 0) {
                    return Err(Error::Config("per-class counts must be >= 1".into()));
                }
                Ok(counts.clone())
            }
            CountSpec::Geometric { head, ratio } => {
                if *head == 0 || !(*ratio > 0.0 && *ratio <= 1.0) {
                    return Err(Error::Config(format!(
                        "geometric counts need head >= 1 and ratio in (0, 1], got head={head} ratio={ratio}"
                    )));
                }
                Ok((0..self.class_count)
                    .map(|k| ((*head as f64) * ratio.powi(k as i32)).round().max(1.0) as u64)
                    .collect())
            }
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.class_count).map(|k| format!("class{k:02}")).collect()
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Materialized images in row-major [n, c, h, w] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStore {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    data: Vec<f32>,
}

impl ImageStore {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let row = channels * height * width;
        if row == 0 || data.len() % row != 0 {
            return Err(Error::Data(format!(
                "image store of {} floats is not a multiple of row size {row}",
                data.len()
            )));
        }
        Ok(ImageStore {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.row_len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let len = self.row_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// A generated dataset: manifest plus the pixels backing it, row i of the
/// store belonging to sample i of the manifest.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub store: ImageStore,
}

/// Class template: zero-mean, unit-RMS [c, h, w] pattern, a deterministic
/// function of the class index alone.
pub fn class_template(spec: &SyntheticSpec, class: usize) -> Vec<f32> {
    let (h, w, channels) = (spec.height, spec.width, spec.channels);
    let k = class as f64;
    let c_total = spec.class_count as f64;
    let theta = std::f64::consts::PI * k / c_total;
    let (sin_t, cos_t) = theta.sin_cos();
    let phi = 2.0 * std::f64::consts::PI * k / c_total + std::f64::consts::PI / c_total;
    let (disc_cx, disc_cy) = (0.55 * phi.cos(), 0.55 * phi.sin());

    let ramp = |edge: f64, width: f64, d: f64| ((edge - d) / width).clamp(0.0, 1.0);

    let mut template = vec![0.0f64; channels * h * w];
    for c in 0..channels {
        let a = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * (k / c_total + c as f64 / channels as f64)).cos();
        let b = 0.5 + 0.5 * (4.0 * std::f64::consts::PI * k / c_total + 2.0 * std::f64::consts::PI * c as f64 / channels as f64).sin();
        for y in 0..h {
            let v = 2.0 * (y as f64 + 0.5) / h as f64 - 1.0;
            for x in 0..w {
                let u = 2.0 * (x as f64 + 0.5) / w as f64 - 1.0;
                let bar = ramp(0.30, 0.14, (u * sin_t - v * cos_t).abs());
                let disc = ramp(0.40, 0.16, ((u - disc_cx).powi(2) + (v - disc_cy).powi(2)).sqrt());
                template[(c * h + y) * w + x] = a * bar + b * disc;
            }
        }
    }
    let n = template.len() as f64;
    let mean = template.iter().sum::<f64>() / n;
    for t in template.iter_mut() {
        *t -= mean;
    }
    let rms = (template.iter().map(|t| t * t).sum::<f64>() / n).sqrt().max(1e-9);
    template.iter().map(|t| (t / rms) as f32).collect()
}

/// Pixels for one sample: `signal * template(class) + noise_std * N(0,1)`,
/// driven entirely by the sample seed.
pub fn materialize_sample(spec: &SyntheticSpec, template: &[f32], sample_seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let signal = spec.signal as f32;
    let noise = spec.noise_std as f32;
    template
        .iter()
        .map(|&t| {
            let eps: f32 = rng.sample(StandardNormal);
            signal * t + noise * eps
        })
        .collect()
}

/// Generate the manifest and materialize every sample.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticDataset> {
    spec.validate()?;
    let counts = spec.resolved_counts()?;
    let classes = spec.class_names();

    let mut samples = Vec::new();
    for (class, &count) in counts.iter().enumerate() {
        for j in 0..count {
            let id = format!("s{class:02}_{j:06}");
            let sample_seed = seeds::derive_u64(seed, &["sample", &id]);
            samples.push(Sample {
                id,
                class,
                locator: Locator::Synthetic { class, sample_seed },
                multi_label: false,
            });
        }
    }
    let manifest = DatasetManifest::new(classes, samples)?;
    let store = materialize(spec, &manifest)?;
    Ok(SyntheticDataset { manifest, store })
}

/// Materialize pixels for an arbitrary manifest of synthetic locators,
/// row i of the result matching sample i.
pub fn materialize(spec: &SyntheticSpec, manifest: &DatasetManifest) -> Result<ImageStore> {
    let templates: Vec<Vec<f32>> = (0..spec.class_count)
        .map(|k| class_template(spec, k))
        .collect();
    let row_len = spec.image_len();
    let mut data = vec![0.0f32; manifest.len() * row_len];
    let results: Result<Vec<()>> = data
        .par_chunks_mut(row_len)
        .zip(manifest.samples().par_iter())
        .map(|(row, sample)| match sample.locator {
            Locator::Synthetic { class, sample_seed } => {
                if class >= templates.len() {
                    return Err(Error::Data(format!(
                        "synthetic locator class {class} outside spec ({} classes)",
                        spec.class_count
                    )));
                }
                row.copy_from_slice(&materialize_sample(spec, &templates[class], sample_seed));
                Ok(())
            }
            Locator::Path(ref p) => Err(Error::Data(format!(
                "sample `{}` has a file locator `{p}`; only synthetic recipes can be materialized",
                sample.id
            ))),
        })
        .collect();
    results?;
    ImageStore::new(spec.channels, spec.height, spec.width, data)
}

/// Header line of a split blob file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlobHeader {
    pub shape: [usize; 4],
    pub classes: Vec<String>,
    pub seed: u64,
}

/// Write a split as one binary blob: a JSON header line, then row-major
/// little-endian f32 pixels.
pub fn write_blob(
    path: &Path,
    store: &ImageStore,
    rows: &[usize],
    classes: &[String],
    seed: u64,
) -> Result<()> {
    let header = BlobHeader {
        shape: [rows.len(), store.channels, store.height, store.width],
        classes: classes.to_vec(),
        seed,
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for &row in rows {
        for &v in store.row(row) {
            out.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_blob(path: &Path) -> Result<(BlobHeader, ImageStore)> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Data(format!("{}: missing header line", path.display())))?;
    let header: BlobHeader = serde_json::from_slice(&raw[..newline])?;
    let body = &raw[newline + 1..];
    let [n, c, h, w] = header.shape;
    if body.len() != n * c * h * w * 4 {
        return Err(Error::Data(format!(
            "{}: expected {} pixel bytes, found {}",
            path.display(),
            n * c * h * w * 4,
            body.len()
        )));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((header, ImageStore::new(c, h, w, data)?))
}
