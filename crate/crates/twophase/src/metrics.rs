//! Confusion-matrix evaluation: per-class precision/recall/F1, macro
//! aggregates over all classes (zero-score classes included), top-1 accuracy,
//! and per-class F1 delta reports between two evaluations.

use serde::{Deserialize, Serialize};

use crate::data::dataset::TensorDataset;
use crate::data::manifest::ClassDistribution;
use crate::data::{normalize, ChannelStats};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::Scalar;

/// C x C counts; rows are the true class, columns the predicted class, in
/// canonical manifest class order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let c = classes.len();
        ConfusionMatrix {
            classes,
            cells: vec![0; c * c],
        }
    }

    pub fn from_cells(classes: Vec<String>, cells: Vec<u64>) -> Result<Self> {
        if cells.len() != classes.len() * classes.len() {
            return Err(Error::Data(format!(
                "{} cells for {} classes",
                cells.len(),
                classes.len()
            )));
        }
        Ok(ConfusionMatrix { classes, cells })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        let c = self.classes.len();
        self.cells[true_class * c + predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.cells[true_class * self.classes.len() + predicted]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    /// Cellwise sum; shards built per batch merge associatively.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::Data("cannot merge confusion matrices over different classes".into()));
        }
        for (a, b) in self.cells.iter_mut().zip(other.cells.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.count(class, class)
    }

    /// Row sum: all samples whose true class is `class`.
    pub fn support(&self, class: usize) -> u64 {
        let c = self.classes.len();
        self.cells[class * c..(class + 1) * c].iter().sum()
    }

    /// Column sum: all samples predicted as `class`.
    pub fn predicted(&self, class: usize) -> u64 {
        let c = self.classes.len();
        (0..c).map(|t| self.cells[t * c + class]).sum()
    }
}

/// Per-class precision, recall, F1 (0/0 resolves to 0), and test support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Full evaluation output: confusion matrix, per-class metrics, and the
/// macro (unweighted over all classes) aggregates plus top-1 accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn classes(&self) -> &[String] {
        self.confusion.classes()
    }
}

/// Derive all metrics from a confusion matrix. Precision and recall use the
/// 0/0 -> 0 convention; macros are the plain mean over every class, including
/// zero-score ones.
pub fn metrics_from_cm(cm: &ConfusionMatrix) -> EvalReport {
    let c = cm.class_count();
    let mut per_class = Vec::with_capacity(c);
    for k in 0..c {
        let tp = cm.true_positives(k) as f64;
        let support = cm.support(k);
        let predicted = cm.predicted(k) as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    let total = cm.total();
    let correct: u64 = (0..c).map(|k| cm.true_positives(k)).sum();
    let n = c as f64;
    EvalReport {
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / n,
        per_class,
        confusion: cm.clone(),
    }
}

/// Index of the row maximum; ties resolve to the lowest class index.
pub fn argmax_tie_lowest<E: Scalar>(row: &[E]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Evaluate a model over a dataset (no augmentation, canonical order).
pub fn evaluate<E: Scalar>(
    model: &Model<E>,
    dataset: &TensorDataset,
    stats: &ChannelStats,
    batch_size: usize,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot evaluate an empty dataset".into()));
    }
    if dataset.classes.len() != model.spec.class_count {
        return Err(Error::Config(format!(
            "model has {} classes, dataset has {}",
            model.spec.class_count,
            dataset.classes.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(dataset.classes.clone());
    let order: Vec<usize> = (0..dataset.len()).collect();
    let mut buffer = Vec::new();
    let plane = model.spec.input.height * model.spec.input.width;
    for chunk in order.chunks(batch_size.max(1)) {
        dataset.gather(chunk, &mut buffer);
        normalize(&mut buffer, model.spec.input.channels, plane, stats);
        let images: Vec<E> = buffer.iter().map(|&v| E::of_f64(v as f64)).collect();
        let logits = model.logits(&images, chunk.len())?;
        let labels = dataset.labels_at(chunk);
        for (row, &label) in logits.chunks_exact(model.spec.class_count).zip(labels.iter()) {
            cm.record(label, argmax_tie_lowest(row));
        }
    }
    Ok(metrics_from_cm(&cm))
}

/// One row of a per-class statistics table (the Tables 4-6 shape).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassRow {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub count_train: u64,
    pub count_test: u64,
}

/// Flatten a report into table rows, attaching train counts.
pub fn per_class_rows(report: &EvalReport, train: &ClassDistribution) -> Result<Vec<PerClassRow>> {
    if report.classes() != train.classes() {
        return Err(Error::Data("report and train distribution class sets differ".into()));
    }
    Ok(report
        .per_class
        .iter()
        .enumerate()
        .map(|(k, m)| PerClassRow {
            name: report.classes()[k].clone(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            count_train: train.count(k),
            count_test: m.support,
        })
        .collect())
}

/// Per-class F1 difference (b - a) plus both delta readings: absolute
/// percentage points and relative percent change (None when F1_a is 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub name: String,
    pub count_train: u64,
    pub count_test: u64,
    pub f1_a: f64,
    pub f1_b: f64,
    pub delta: f64,
    pub relative_pct: Option<f64>,
}

/// Delta table ordered by descending train-split frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub rows: Vec<DeltaRow>,
    /// Mean delta over all classes.
    pub mean_delta: f64,
    /// Mean delta over classes whose F1 did not stay 0 in both evaluations.
    pub mean_delta_active: f64,
    /// Mean delta over classes with a non-zero F1 in evaluation `a`.
    pub mean_delta_nonzero_baseline: f64,
}

/// Compare two per-class tables over the same class set. Rows come back
/// sorted by `a`'s train count, descending, ties in input order.
pub fn delta_report(a: &[PerClassRow], b: &[PerClassRow]) -> Result<DeltaReport> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "class sets differ: {} vs {} classes",
            a.len(),
            b.len()
        )));
    }
    let mut rows = Vec::with_capacity(a.len());
    for row_a in a {
        let row_b = b.iter().find(|r| r.name == row_a.name).ok_or_else(|| {
            Error::Data(format!("class `{}` missing from the second table", row_a.name))
        })?;
        rows.push(DeltaRow {
            name: row_a.name.clone(),
            count_train: row_a.count_train,
            count_test: row_a.count_test,
            f1_a: row_a.f1,
            f1_b: row_b.f1,
            delta: row_b.f1 - row_a.f1,
            relative_pct: if row_a.f1 > 0.0 {
                Some(100.0 * (row_b.f1 - row_a.f1) / row_a.f1)
            } else {
                None
            },
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&x, &y| rows[y].count_train.cmp(&rows[x].count_train).then(x.cmp(&y)));
    let rows: Vec<DeltaRow> = order.into_iter().map(|i| rows[i].clone()).collect();

    let mean = |it: &mut dyn Iterator<Item = f64>| -> f64 {
        let collected: Vec<f64> = it.collect();
        if collected.is_empty() {
            0.0
        } else {
            collected.iter().sum::<f64>() / collected.len() as f64
        }
    };
    let mean_delta = mean(&mut rows.iter().map(|r| r.delta));
    let mean_delta_active = mean(
        &mut rows
            .iter()
            .filter(|r| r.f1_a != 0.0 || r.f1_b != 0.0)
            .map(|r| r.delta),
    );
    let mean_delta_nonzero_baseline =
        mean(&mut rows.iter().filter(|r| r.f1_a > 0.0).map(|r| r.delta));
    Ok(DeltaReport {
        rows,
        mean_delta,
        mean_delta_active,
        mean_delta_nonzero_baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm_from_pairs(classes: usize, pairs: &[(usize, usize)]) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new((0..classes).map(|c| format!("c{c}")).collect());
        for &(t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    #[test]
    fn perfect_predictor_scores_ones() {
        let cm = cm_from_pairs(3, &[(0, 0), (1, 1), (2, 2), (1, 1)]);
        let report = metrics_from_cm(&cm);
        assert_eq!(report.accuracy, 1.0);
        for m in &report.per_class {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(report.macro_f1, 1.0);
    }

    #[test]
    fn two_by_two_matches_hand_calculation() {
        // cm [[8,2],[1,9]]: class 0 has TP 8, FP 1, FN 2
        let cm = ConfusionMatrix::from_cells(
            vec!["a".into(), "b".into()],
            vec![8, 2, 1, 9],
        )
        .unwrap();
        let report = metrics_from_cm(&cm);
        let c0 = report.per_class[0];
        assert!((c0.precision - 8.0 / 9.0).abs() < 1e-15);
        assert!((c0.recall - 0.8).abs() < 1e-15);
        assert!((c0.f1 - 16.0 / 19.0).abs() < 1e-15);
        assert_eq!(c0.support, 10);
        assert!((report.accuracy - 17.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor_on_balanced_two_class_set() {
        // always predicts class 0 on a balanced set: accuracy 1/2,
        // macro F1 = (2/3 + 0)/2 = 1/3
        let cm = ConfusionMatrix::from_cells(
            vec!["a".into(), "b".into()],
            vec![10, 0, 10, 0],
        )
        .unwrap();
        let report = metrics_from_cm(&cm);
        assert!((report.accuracy - 0.5).abs() < 1e-15);
        assert!((report.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_row_and_column_yield_zero_metrics() {
        let cm = ConfusionMatrix::from_cells(
            vec!["a".into(), "b".into(), "ghost".into()],
            vec![5, 0, 0, 1, 4, 0, 0, 0, 0],
        )
        .unwrap();
        let report = metrics_from_cm(&cm);
        let ghost = report.per_class[2];
        assert_eq!((ghost.precision, ghost.recall, ghost.f1), (0.0, 0.0, 0.0));
        assert_eq!(ghost.support, 0);
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        assert_eq!(argmax_tie_lowest(&[1.0f32, 1.0, 1.0]), 0);
        assert_eq!(argmax_tie_lowest(&[0.0f32, 2.0, 2.0]), 1);
        assert_eq!(argmax_tie_lowest(&[0.5f64]), 0);
    }

    #[test]
    fn delta_report_orders_by_train_frequency() {
        let a = vec![
            PerClassRow { name: "rare".into(), precision: 0.0, recall: 0.0, f1: 0.2, count_train: 10, count_test: 2 },
            PerClassRow { name: "common".into(), precision: 0.0, recall: 0.0, f1: 0.9, count_train: 1000, count_test: 100 },
        ];
        let b = vec![
            PerClassRow { name: "common".into(), precision: 0.0, recall: 0.0, f1: 0.8, count_train: 1000, count_test: 100 },
            PerClassRow { name: "rare".into(), precision: 0.0, recall: 0.0, f1: 0.5, count_train: 10, count_test: 2 },
        ];
        let delta = delta_report(&a, &b).unwrap();
        assert_eq!(delta.rows[0].name, "common");
        assert!((delta.rows[0].delta - (-0.1)).abs() < 1e-12);
        assert_eq!(delta.rows[1].name, "rare");
        assert!((delta.rows[1].delta - 0.3).abs() < 1e-12);
        assert!(delta.rows[1].relative_pct.unwrap() - 150.0 < 1e-9);
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let rows = vec![PerClassRow {
            name: "x".into(),
            precision: 0.5,
            recall: 0.5,
            f1: 0.5,
            count_train: 5,
            count_test: 1,
        }];
        let delta = delta_report(&rows, &rows).unwrap();
        assert_eq!(delta.rows[0].delta, 0.0);
        assert_eq!(delta.mean_delta, 0.0);
    }

    #[test]
    fn mismatched_class_sets_error() {
        let a = vec![PerClassRow { name: "x".into(), precision: 0.0, recall: 0.0, f1: 0.0, count_train: 1, count_test: 1 }];
        let b = vec![PerClassRow { name: "y".into(), precision: 0.0, recall: 0.0, f1: 0.0, count_train: 1, count_test: 1 }];
        assert!(delta_report(&a, &b).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// metrics_from_cm agrees with a per-sample brute-force recount.
        #[test]
        fn matches_brute_force_recount(
            classes in 2usize..10,
            pairs in prop::collection::vec((0usize..10, 0usize..10), 1..1000)
        ) {
            let pairs: Vec<(usize, usize)> = pairs
                .into_iter()
                .map(|(t, p)| (t % classes, p % classes))
                .collect();
            let cm = cm_from_pairs(classes, &pairs);
            let report = metrics_from_cm(&cm);

            // independent recount straight from the pairs
            for k in 0..classes {
                let tp = pairs.iter().filter(|&&(t, p)| t == k && p == k).count() as f64;
                let fp = pairs.iter().filter(|&&(t, p)| t != k && p == k).count() as f64;
                let fn_ = pairs.iter().filter(|&&(t, p)| t == k && p != k).count() as f64;
                let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else { 0.0 };
                prop_assert!((report.per_class[k].precision - precision).abs() < 1e-12);
                prop_assert!((report.per_class[k].recall - recall).abs() < 1e-12);
                prop_assert!((report.per_class[k].f1 - f1).abs() < 1e-12);
                prop_assert_eq!(report.per_class[k].support as usize,
                    pairs.iter().filter(|&&(t, _)| t == k).count());
            }
            let correct = pairs.iter().filter(|&&(t, p)| t == p).count() as f64;
            prop_assert!((report.accuracy - correct / pairs.len() as f64).abs() < 1e-12);
        }

        /// Accuracy equals the support-weighted mean of per-class recall.
        #[test]
        fn accuracy_is_support_weighted_recall(
            pairs in prop::collection::vec((0usize..6, 0usize..6), 1..500)
        ) {
            let cm = cm_from_pairs(6, &pairs);
            let report = metrics_from_cm(&cm);
            let total: u64 = report.per_class.iter().map(|m| m.support).sum();
            let weighted: f64 = report
                .per_class
                .iter()
                .map(|m| m.recall * m.support as f64 / total as f64)
                .sum();
            prop_assert!((report.accuracy - weighted).abs() < 1e-12);
        }

        /// F1 lies between min(P, R) and their arithmetic mean.
        #[test]
        fn f1_between_min_and_mean(
            pairs in prop::collection::vec((0usize..5, 0usize..5), 1..500)
        ) {
            let cm = cm_from_pairs(5, &pairs);
            let report = metrics_from_cm(&cm);
            for m in &report.per_class {
                let lo = m.precision.min(m.recall);
                let hi = 0.5 * (m.precision + m.recall);
                prop_assert!(m.f1 >= lo - 1e-12, "f1 {} below min {}", m.f1, lo);
                prop_assert!(m.f1 <= hi + 1e-12, "f1 {} above mean {}", m.f1, hi);
            }
        }

        /// Macro metrics are invariant under simultaneous class permutation.
        #[test]
        fn macro_permutation_invariance(
            pairs in prop::collection::vec((0usize..5, 0usize..5), 1..300),
            rotation in 1usize..5
        ) {
            let cm = cm_from_pairs(5, &pairs);
            let rotated: Vec<(usize, usize)> = pairs
                .iter()
                .map(|&(t, p)| ((t + rotation) % 5, (p + rotation) % 5))
                .collect();
            let cm_rot = cm_from_pairs(5, &rotated);
            let a = metrics_from_cm(&cm);
            let b = metrics_from_cm(&cm_rot);
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
            prop_assert!((a.macro_precision - b.macro_precision).abs() < 1e-12);
            prop_assert!((a.macro_recall - b.macro_recall).abs() < 1e-12);
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
        }
    }
}
