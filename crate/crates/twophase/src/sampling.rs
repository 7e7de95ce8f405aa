//! Rebalancing planners and plan application.
//!
//! Oversampling uses a tiered ratio table: small classes get large
//! multipliers, larger classes smaller ones, everything clipped by a hard cap,
//! and classes at or above the exempt threshold are left alone. Undersampling
//! cuts classes above a threshold down to it. The two compose as long as they
//! touch disjoint count ranges.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::manifest::{ClassDistribution, DatasetManifest, Sample};
use crate::error::{Error, Result};
use crate::seeds;

/// One oversampling tier: counts in `[lo, hi)` get `multiplier`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    pub lo: u64,
    pub hi: u64,
    pub multiplier: u64,
}

/// Tiered oversampling rule table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosTierTable {
    /// Disjoint, sorted tiers covering `[1, exempt_threshold)`.
    pub tiers: Vec<Tier>,
    /// Hard clip on any oversampled target.
    pub cap: u64,
    /// Classes with at least this many samples are untouched.
    pub exempt_threshold: u64,
}

impl Default for RosTierTable {
    /// The tier table used throughout: x10 under 100, x8 under 500, x6 under
    /// 1000, x4 under 5000, capped at 5000, exempt at 5000.
    fn default() -> Self {
        RosTierTable {
            tiers: vec![
                Tier { lo: 1, hi: 100, multiplier: 10 },
                Tier { lo: 100, hi: 500, multiplier: 8 },
                Tier { lo: 500, hi: 1000, multiplier: 6 },
                Tier { lo: 1000, hi: 5000, multiplier: 4 },
            ],
            cap: 5000,
            exempt_threshold: 5000,
        }
    }
}

impl RosTierTable {
    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::Sampling("tier table has no tiers".into()));
        }
        let mut expected_lo = 1;
        for tier in &self.tiers {
            if tier.lo != expected_lo {
                return Err(Error::Sampling(format!(
                    "tiers must be disjoint, sorted, and cover [1, {}); found gap or overlap at {}",
                    self.exempt_threshold, tier.lo
                )));
            }
            if tier.hi <= tier.lo {
                return Err(Error::Sampling(format!(
                    "tier [{}, {}) is empty",
                    tier.lo, tier.hi
                )));
            }
            if tier.multiplier < 1 {
                return Err(Error::Sampling(format!(
                    "tier [{}, {}) multiplier must be >= 1",
                    tier.lo, tier.hi
                )));
            }
            expected_lo = tier.hi;
        }
        if expected_lo != self.exempt_threshold {
            return Err(Error::Sampling(format!(
                "tiers cover [1, {expected_lo}) but the exempt threshold is {}",
                self.exempt_threshold
            )));
        }
        Ok(())
    }

    /// Target for one class count.
    pub fn target(&self, count: u64) -> u64 {
        if count == 0 {
            return 0;
        }
        if count >= self.exempt_threshold {
            return count;
        }
        let tier = self
            .tiers
            .iter()
            .find(|t| t.lo <= count && count < t.hi)
            .expect("validated tiers cover [1, exempt)");
        (count * tier.multiplier).min(self.cap)
    }
}

/// Undersampling rule: classes above the threshold are cut down to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RusRule {
    pub threshold: u64,
}

impl RusRule {
    pub fn validate(&self) -> Result<()> {
        if self.threshold < 1 {
            return Err(Error::Sampling("undersampling threshold must be >= 1".into()));
        }
        Ok(())
    }

    pub fn target(&self, count: u64) -> u64 {
        count.min(self.threshold)
    }
}

/// Which rule produced a class's target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleApplied {
    /// Oversampled by this tier multiplier.
    TierMultiplier(u64),
    /// Oversampled but clipped by the cap.
    Cap,
    /// Undersampled down to the threshold.
    Undersample,
    /// Left alone.
    Untouched,
    /// Class had no samples; flagged rather than an error.
    ZeroCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub class: String,
    pub original: u64,
    pub target: u64,
    pub rule: RuleApplied,
}

impl PlanEntry {
    pub fn is_identity(&self) -> bool {
        self.target == self.original
    }
}

/// Per-class resampling targets with provenance, serializable for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub regime: String,
    pub entries: Vec<PlanEntry>,
}

impl ResamplePlan {
    pub fn identity(dist: &ClassDistribution) -> Self {
        ResamplePlan {
            regime: "identity".to_string(),
            entries: dist
                .iter()
                .map(|(name, count)| PlanEntry {
                    class: name.to_string(),
                    original: count,
                    target: count,
                    rule: if count == 0 {
                        RuleApplied::ZeroCount
                    } else {
                        RuleApplied::Untouched
                    },
                })
                .collect(),
        }
    }

    pub fn original_total(&self) -> u64 {
        self.entries.iter().map(|e| e.original).sum()
    }

    pub fn target_total(&self) -> u64 {
        self.entries.iter().map(|e| e.target).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(|e| e.is_identity())
    }

    pub fn entry(&self, class: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.class == class)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&serde_json::json!({
            "regime": self.regime,
            "entries": self.entries,
            "totals": {
                "original": self.original_total(),
                "target": self.target_total(),
            },
        }))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        #[derive(Deserialize)]
        struct PlanFile {
            regime: String,
            entries: Vec<PlanEntry>,
        }
        let file: PlanFile = serde_json::from_str(&raw)?;
        Ok(ResamplePlan {
            regime: file.regime,
            entries: file.entries,
        })
    }
}

/// Plan tiered oversampling over a distribution.
pub fn plan_ros(dist: &ClassDistribution, table: &RosTierTable) -> Result<ResamplePlan> {
    table.validate()?;
    let entries = dist
        .iter()
        .map(|(name, count)| {
            let target = table.target(count);
            let rule = if count == 0 {
                RuleApplied::ZeroCount
            } else if count >= table.exempt_threshold {
                RuleApplied::Untouched
            } else {
                let tier = table
                    .tiers
                    .iter()
                    .find(|t| t.lo <= count && count < t.hi)
                    .expect("validated");
                if count * tier.multiplier > table.cap {
                    RuleApplied::Cap
                } else {
                    RuleApplied::TierMultiplier(tier.multiplier)
                }
            };
            PlanEntry {
                class: name.to_string(),
                original: count,
                target,
                rule,
            }
        })
        .collect();
    Ok(ResamplePlan {
        regime: "ros".to_string(),
        entries,
    })
}

/// Plan threshold undersampling over a distribution.
pub fn plan_rus(dist: &ClassDistribution, rule: &RusRule) -> Result<ResamplePlan> {
    rule.validate()?;
    let entries = dist
        .iter()
        .map(|(name, count)| {
            let target = rule.target(count);
            PlanEntry {
                class: name.to_string(),
                original: count,
                target,
                rule: if count == 0 {
                    RuleApplied::ZeroCount
                } else if target < count {
                    RuleApplied::Undersample
                } else {
                    RuleApplied::Untouched
                },
            }
        })
        .collect();
    Ok(ResamplePlan {
        regime: "rus".to_string(),
        entries,
    })
}

/// Combine an oversampling plan with an undersampling plan over the same
/// distribution. Per class the non-identity rule wins; both plans touching the
/// same class is an error (the regimes must cover disjoint count ranges).
pub fn compose(ros: &ResamplePlan, rus: &ResamplePlan) -> Result<ResamplePlan> {
    if ros.entries.len() != rus.entries.len()
        || ros
            .entries
            .iter()
            .zip(rus.entries.iter())
            .any(|(a, b)| a.class != b.class || a.original != b.original)
    {
        return Err(Error::Sampling(
            "cannot compose plans over different distributions".into(),
        ));
    }
    let entries = ros
        .entries
        .iter()
        .zip(rus.entries.iter())
        .map(|(a, b)| {
            match (a.is_identity(), b.is_identity()) {
                (false, false) => Err(Error::Sampling(format!(
                    "overlapping regimes: class `{}` is touched by both plans ({} -> {} and {} -> {})",
                    a.class, a.original, a.target, b.original, b.target,
                ))),
                (false, true) => Ok(a.clone()),
                (true, false) => Ok(b.clone()),
                (true, true) => Ok(PlanEntry {
                    class: a.class.clone(),
                    original: a.original,
                    target: a.original,
                    rule: if a.original == 0 {
                        RuleApplied::ZeroCount
                    } else {
                        RuleApplied::Untouched
                    },
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResamplePlan {
        regime: format!("{}+{}", ros.regime, rus.regime),
        entries,
    })
}

/// Apply a plan to a manifest. Undersampled classes keep a uniform
/// no-replacement draw of `target` samples; oversampled classes duplicate
/// every sample `floor(target/n)` times plus a uniform no-replacement draw of
/// `target mod n` extras, so per-class multiplicities differ by at most one
/// and class totals hit the plan exactly. Deterministic under the seed.
pub fn apply_plan(
    manifest: &DatasetManifest,
    plan: &ResamplePlan,
    seed: u64,
) -> Result<DatasetManifest> {
    let dist = manifest.distribution();
    for entry in &plan.entries {
        let Some(actual) = dist.get(&entry.class) else {
            return Err(Error::Sampling(format!(
                "plan covers class `{}` which the manifest lacks",
                entry.class
            )));
        };
        if actual != entry.original {
            return Err(Error::Sampling(format!(
                "plan expects {} samples of `{}`, manifest has {actual}",
                entry.original, entry.class
            )));
        }
        if entry.target > 0 && entry.original == 0 {
            return Err(Error::Sampling(format!(
                "class `{}` has no samples to reach target {}",
                entry.class, entry.target
            )));
        }
    }

    // per-sample multiplicity, indexed like the manifest
    let mut multiplicity = vec![1u64; manifest.len()];
    for (class_idx, class_name) in manifest.classes().iter().enumerate() {
        let Some(entry) = plan.entry(class_name) else {
            continue; // classes outside the plan are untouched
        };
        let members: Vec<usize> = manifest
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.class == class_idx)
            .map(|(i, _)| i)
            .collect();
        let n = members.len() as u64;
        if n == 0 || entry.target == n {
            continue;
        }
        let mut shuffled = members.clone();
        let mut rng = seeds::rng(seed, &["apply_plan", class_name]);
        shuffled.shuffle(&mut rng);
        if entry.target < n {
            for &idx in &shuffled[entry.target as usize..] {
                multiplicity[idx] = 0;
            }
        } else {
            let base = entry.target / n;
            let extras = (entry.target % n) as usize;
            for &idx in &members {
                multiplicity[idx] = base;
            }
            for &idx in &shuffled[..extras] {
                multiplicity[idx] += 1;
            }
        }
    }

    let mut samples = Vec::new();
    for (sample, &m) in manifest.samples().iter().zip(multiplicity.iter()) {
        for copy in 0..m {
            let mut s = sample.clone();
            if copy > 0 {
                s.id = format!("{}~{copy}", sample.id);
            }
            samples.push(s);
        }
    }
    DatasetManifest::new(manifest.classes().to_vec(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::Locator;

    fn dist(pairs: &[(&str, u64)]) -> ClassDistribution {
        ClassDistribution::new(
            pairs.iter().map(|(n, _)| n.to_string()).collect(),
            pairs.iter().map(|(_, c)| *c).collect(),
        )
        .unwrap()
    }

    fn manifest_of(dist: &ClassDistribution) -> DatasetManifest {
        let mut samples = Vec::new();
        for (class, (name, count)) in dist.iter().enumerate() {
            for j in 0..count {
                samples.push(Sample {
                    id: format!("{name}_{j}"),
                    class,
                    locator: Locator::Path(format!("{name}/{j}")),
                    multi_label: false,
                });
            }
        }
        DatasetManifest::new(dist.classes().to_vec(), samples).unwrap()
    }

    #[test]
    fn tier_targets_match_worked_examples() {
        let table = RosTierTable::default();
        assert_eq!(table.target(88), 880); // x10 tier
        assert_eq!(table.target(470), 3760); // x8 tier
        assert_eq!(table.target(608), 3648); // x6 tier
        assert_eq!(table.target(1204), 4816); // x4 tier
        assert_eq!(table.target(2119), 5000); // x4 would give 8476, cap clips
        assert_eq!(table.target(48377), 48377); // exempt
    }

    #[test]
    fn rus_targets_cut_to_threshold() {
        let rule = RusRule { threshold: 15000 };
        assert_eq!(rule.target(48377), 15000);
        assert_eq!(rule.target(4761), 4761);
        let no_op = RusRule { threshold: u64::MAX };
        let d = dist(&[("a", 3), ("b", 900_000)]);
        let plan = plan_rus(&d, &no_op).unwrap();
        assert!(plan.is_identity());
    }

    #[test]
    fn zero_count_classes_are_flagged_not_errors() {
        let d = dist(&[("empty", 0), ("tiny", 2)]);
        let plan = plan_ros(&d, &RosTierTable::default()).unwrap();
        assert_eq!(plan.entry("empty").unwrap().target, 0);
        assert_eq!(plan.entry("empty").unwrap().rule, RuleApplied::ZeroCount);
        assert_eq!(plan.entry("tiny").unwrap().target, 20);
    }

    #[test]
    fn ros_never_decreases_rus_never_increases() {
        let table = RosTierTable::default();
        let rule = RusRule { threshold: 15000 };
        for count in 0..6000 {
            assert!(table.target(count) >= count, "ros decreased {count}");
            assert!(rule.target(count) <= count, "rus increased {count}");
        }
    }

    #[test]
    fn ros_targets_monotone_within_each_tier_and_cap_bounded() {
        // Brute force over counts 1..6000. Global monotonicity across tiers
        // does not hold for the default table (e.g. 478 -> 3824 in the x8
        // tier vs 608 -> 3648 in the x6 tier, exactly as in the reference
        // counts), so the checked property is: non-decreasing within every
        // tier and within the exempt range, never below the original count,
        // and never above the cap before the exempt threshold.
        let table = RosTierTable::default();
        let mut prev_target = 0u64;
        let mut prev_tier = usize::MAX;
        for count in 1..6000u64 {
            let t = table.target(count);
            assert!(t >= count, "target dropped below count at {count}");
            let tier = if count >= table.exempt_threshold {
                table.tiers.len() // exempt "tier"
            } else {
                assert!(t <= table.cap, "count {count} target {t} above cap");
                table
                    .tiers
                    .iter()
                    .position(|ti| ti.lo <= count && count < ti.hi)
                    .unwrap()
            };
            if tier == prev_tier {
                assert!(
                    t >= prev_target,
                    "targets not non-decreasing within tier at count {count}"
                );
            }
            prev_tier = tier;
            prev_target = t;
        }
    }

    #[test]
    fn invalid_tier_tables_are_rejected() {
        let mut table = RosTierTable::default();
        table.tiers[1].lo = 120; // gap
        assert!(table.validate().is_err());
        let mut table = RosTierTable::default();
        table.tiers.pop(); // no longer covers [1, exempt)
        assert!(table.validate().is_err());
        assert!(RosTierTable::default().validate().is_ok());
    }

    #[test]
    fn compose_identity_identity_is_identity() {
        let d = dist(&[("a", 10), ("b", 20)]);
        let left = ResamplePlan::identity(&d);
        let right = ResamplePlan::identity(&d);
        let combined = compose(&left, &right).unwrap();
        assert!(combined.is_identity());
    }

    #[test]
    fn compose_rejects_overlapping_regimes() {
        let d = dist(&[("a", 10)]);
        let ros = plan_ros(&d, &RosTierTable::default()).unwrap();
        let rus = plan_rus(&d, &RusRule { threshold: 5 }).unwrap();
        let err = compose(&ros, &rus).unwrap_err();
        assert!(err.to_string().contains("overlapping"));
    }

    #[test]
    fn apply_plan_hits_targets_exactly() {
        let d = dist(&[("small", 7), ("big", 40), ("same", 11)]);
        let m = manifest_of(&d);
        let plan = ResamplePlan {
            regime: "custom".into(),
            entries: vec![
                PlanEntry { class: "small".into(), original: 7, target: 30, rule: RuleApplied::TierMultiplier(4) },
                PlanEntry { class: "big".into(), original: 40, target: 12, rule: RuleApplied::Undersample },
                PlanEntry { class: "same".into(), original: 11, target: 11, rule: RuleApplied::Untouched },
            ],
        };
        let out = apply_plan(&m, &plan, 5).unwrap();
        let od = out.distribution();
        assert_eq!(od.get("small"), Some(30));
        assert_eq!(od.get("big"), Some(12));
        assert_eq!(od.get("same"), Some(11));
        // ids stay unique (checked by the constructor, but assert anyway)
        assert_eq!(out.len(), 53);
    }

    #[test]
    fn duplicate_multiplicities_differ_by_at_most_one() {
        let d = dist(&[("c", 7)]);
        let m = manifest_of(&d);
        let plan = ResamplePlan {
            regime: "t".into(),
            entries: vec![PlanEntry {
                class: "c".into(),
                original: 7,
                target: 30,
                rule: RuleApplied::TierMultiplier(4),
            }],
        };
        let out = apply_plan(&m, &plan, 1).unwrap();
        let mut per_origin = std::collections::HashMap::new();
        for s in out.samples() {
            let origin = s.id.split('~').next().unwrap().to_string();
            *per_origin.entry(origin).or_insert(0u64) += 1;
        }
        let max = per_origin.values().max().unwrap();
        let min = per_origin.values().min().unwrap();
        assert!(max - min <= 1, "multiplicities {min}..{max}");
        assert_eq!(per_origin.values().sum::<u64>(), 30);
    }

    #[test]
    fn single_sample_class_duplicates_that_sample() {
        let d = dist(&[("rare", 1)]);
        let m = manifest_of(&d);
        let plan = ResamplePlan {
            regime: "t".into(),
            entries: vec![PlanEntry {
                class: "rare".into(),
                original: 1,
                target: 10,
                rule: RuleApplied::TierMultiplier(10),
            }],
        };
        let out = apply_plan(&m, &plan, 0).unwrap();
        assert_eq!(out.len(), 10);
        let first = &out.samples()[0];
        assert!(out
            .samples()
            .iter()
            .all(|s| s.locator == first.locator));
    }

    #[test]
    fn apply_plan_is_deterministic_under_seed() {
        let d = dist(&[("a", 50), ("b", 9)]);
        let m = manifest_of(&d);
        let plan = ResamplePlan {
            regime: "t".into(),
            entries: vec![
                PlanEntry { class: "a".into(), original: 50, target: 20, rule: RuleApplied::Undersample },
                PlanEntry { class: "b".into(), original: 9, target: 31, rule: RuleApplied::TierMultiplier(4) },
            ],
        };
        assert_eq!(apply_plan(&m, &plan, 3).unwrap(), apply_plan(&m, &plan, 3).unwrap());
        assert_ne!(apply_plan(&m, &plan, 3).unwrap(), apply_plan(&m, &plan, 4).unwrap());
    }

    #[test]
    fn replanning_balanced_output_under_rus_is_identity() {
        let d = dist(&[("a", 48377), ("b", 4761), ("c", 220)]);
        let rule = RusRule { threshold: 15000 };
        let plan = plan_rus(&d, &rule).unwrap();
        let after = ClassDistribution::new(
            plan.entries.iter().map(|e| e.class.clone()).collect(),
            plan.entries.iter().map(|e| e.target).collect(),
        )
        .unwrap();
        let replanned = plan_rus(&after, &rule).unwrap();
        assert!(replanned.is_identity());
    }

    #[test]
    fn plan_json_roundtrip() {
        let d = dist(&[("a", 12), ("b", 9000)]);
        let plan = plan_ros(&d, &RosTierTable::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.json");
        plan.save(&path).unwrap();
        let loaded = ResamplePlan::load(&path).unwrap();
        assert_eq!(plan, loaded);
        // audit fields present in the file
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(raw.contains("\"totals\""));
        assert!(raw.contains("\"regime\""));
    }
}
