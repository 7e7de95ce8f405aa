//! Dataset manifests: the class list plus one row per sample, with a payload
//! locator that is either a file path or a synthetic recipe.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a sample's pixels come from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Locator {
    /// A file on disk (not interpreted by this crate beyond identity).
    Path(String),
    /// Regeneration recipe: class template index plus the per-sample seed.
    Synthetic { class: usize, sample_seed: u64 },
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locator::Path(p) => write!(f, "{p}"),
            Locator::Synthetic { class, sample_seed } => {
                write!(f, "synthetic://{class}/{sample_seed}")
            }
        }
    }
}

impl Locator {
    pub fn parse(raw: &str) -> Self {
        if let Some(rest) = raw.strip_prefix("synthetic://") {
            if let Some((class, seed)) = rest.split_once('/') {
                if let (Ok(class), Ok(seed)) = (class.parse(), seed.parse()) {
                    return Locator::Synthetic {
                        class,
                        sample_seed: seed,
                    };
                }
            }
        }
        Locator::Path(raw.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub class: usize,
    pub locator: Locator,
    /// Marks rows depicting more than one class; dropped by default filters.
    pub multi_label: bool,
}

/// Ordered class list plus sample rows. The class order here is canonical for
/// every downstream distribution, report, and confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    classes: Vec<String>,
    samples: Vec<Sample>,
}

/// Per-class sample counts in canonical class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    classes: Vec<String>,
    counts: Vec<u64>,
}

/// What `filter` should drop.
#[derive(Debug, Clone, Default)]
pub struct Exclusions {
    pub classes: BTreeSet<String>,
    pub drop_multi_label: bool,
}

/// Result of filtering: the kept manifest, what was removed (classwise), and
/// warnings for exclusions that did not match any class.
#[derive(Debug)]
pub struct FilterOutcome {
    pub kept: DatasetManifest,
    pub removed: ClassDistribution,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn new(classes: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        let mut seen_class = BTreeSet::new();
        for class in &classes {
            if !seen_class.insert(class.clone()) {
                return Err(Error::Data(format!("duplicate class name `{class}`")));
            }
        }
        let mut seen = BTreeSet::new();
        for sample in &samples {
            if sample.class >= classes.len() {
                return Err(Error::Data(format!(
                    "sample `{}` references class index {} but only {} classes exist",
                    sample.id,
                    sample.class,
                    classes.len()
                )));
            }
            if !seen.insert(sample.id.clone()) {
                return Err(Error::Data(format!("duplicate sample id `{}`", sample.id)));
            }
        }
        Ok(DatasetManifest { classes, samples })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn distribution(&self) -> ClassDistribution {
        let mut counts = vec![0u64; self.classes.len()];
        for sample in &self.samples {
            counts[sample.class] += 1;
        }
        ClassDistribution {
            classes: self.classes.clone(),
            counts,
        }
    }

    /// Drop samples of excluded classes and (optionally) multi-label samples.
    /// Remaining classes are re-indexed; the input is untouched.
    pub fn filter(&self, exclusions: &Exclusions) -> FilterOutcome {
        let mut warnings = Vec::new();
        for name in &exclusions.classes {
            if self.class_index(name).is_none() {
                warnings.push(format!("exclusion `{name}` matches no class; ignored"));
            }
        }
        let kept_classes: Vec<String> = self
            .classes
            .iter()
            .filter(|c| !exclusions.classes.contains(*c))
            .cloned()
            .collect();
        let remap: HashMap<&str, usize> = kept_classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();

        let mut removed_counts = vec![0u64; self.classes.len()];
        let mut kept_samples = Vec::new();
        for sample in &self.samples {
            let class_name = &self.classes[sample.class];
            let excluded_class = exclusions.classes.contains(class_name);
            let excluded_multi = exclusions.drop_multi_label && sample.multi_label;
            if excluded_class || excluded_multi {
                removed_counts[sample.class] += 1;
            } else {
                let mut s = sample.clone();
                s.class = remap[class_name.as_str()];
                kept_samples.push(s);
            }
        }
        FilterOutcome {
            kept: DatasetManifest {
                classes: kept_classes,
                samples: kept_samples,
            },
            removed: ClassDistribution {
                classes: self.classes.clone(),
                counts: removed_counts,
            },
            warnings,
        }
    }

    /// Write the sample table as CSV and the canonical class order as a JSON
    /// sidecar (UTF-8, LF line endings).
    pub fn save(&self, csv_path: &Path, classes_path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(csv_path)
            .map_err(Error::Csv)?;
        writer
            .write_record(["id", "class", "locator", "multi"])
            .map_err(Error::Csv)?;
        for sample in &self.samples {
            writer
                .write_record([
                    sample.id.as_str(),
                    self.classes[sample.class].as_str(),
                    &sample.locator.to_string(),
                    if sample.multi_label { "1" } else { "0" },
                ])
                .map_err(Error::Csv)?;
        }
        writer.flush().map_err(|e| Error::io(csv_path.display().to_string(), e))?;
        let json = serde_json::to_string_pretty(&self.classes)?;
        fs::write(classes_path, json + "\n")
            .map_err(|e| Error::io(classes_path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(csv_path: &Path, classes_path: &Path) -> Result<Self> {
        let classes_raw = fs::read_to_string(classes_path)
            .map_err(|e| Error::io(classes_path.display().to_string(), e))?;
        let classes: Vec<String> = serde_json::from_str(&classes_raw)?;
        let index: HashMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(csv_path)
            .map_err(Error::Csv)?;
        let headers = reader.headers().map_err(Error::Csv)?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (id_col, class_col, locator_col) = match (col("id"), col("class"), col("locator")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Data(format!(
                    "manifest {} must have id,class,locator columns",
                    csv_path.display()
                )))
            }
        };
        let multi_col = col("multi");

        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(Error::Csv)?;
            let class_name = record.get(class_col).unwrap_or_default();
            let class = *index.get(class_name).ok_or_else(|| {
                Error::Data(format!(
                    "manifest row references unknown class `{class_name}`"
                ))
            })?;
            samples.push(Sample {
                id: record.get(id_col).unwrap_or_default().to_string(),
                class,
                locator: Locator::parse(record.get(locator_col).unwrap_or_default()),
                multi_label: multi_col
                    .and_then(|c| record.get(c))
                    .map(|v| v == "1" || v.eq_ignore_ascii_case("true"))
                    .unwrap_or(false),
            });
        }
        DatasetManifest::new(classes, samples)
    }
}

impl ClassDistribution {
    pub fn new(classes: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if classes.len() != counts.len() {
            return Err(Error::Data(format!(
                "distribution has {} classes but {} counts",
                classes.len(),
                counts.len()
            )));
        }
        Ok(ClassDistribution { classes, counts })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, class: usize) -> u64 {
        self.counts[class]
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.classes
            .iter()
            .position(|c| c == name)
            .map(|i| self.counts[i])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.classes
            .iter()
            .map(|c| c.as_str())
            .zip(self.counts.iter().copied())
    }
}
