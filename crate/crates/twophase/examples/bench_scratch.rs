// Scratch calibration for the trend-test configuration. Not part of the
// deliverable examples; deleted before release.

use std::sync::Arc;
use std::time::Instant;

use twophase::data::dataset::{locator_rows, TensorDataset};
use twophase::data::{channel_stats, generate, split, CountSpec, SplitSpec, SyntheticSpec};
use twophase::model::{InputShape, ModelSpec, StageSpec};
use twophase::sampling::{plan_rus, RusRule};
use twophase::training::{two_phase, DatasetBundle, Monitor, TrainConfig};

fn bundle_for(spec: &SyntheticSpec, data_seed: u64, split_seed: u64) -> DatasetBundle {
    let ds = generate(spec, data_seed).unwrap();
    let (train_m, val_m, test_m) = split(&ds.manifest, &SplitSpec::standard(split_seed)).unwrap();
    let store = Arc::new(ds.store);
    let rows = locator_rows(&ds.manifest);
    let train = TensorDataset::from_manifest(&train_m, store.clone(), &rows).unwrap();
    let val = TensorDataset::from_manifest(&val_m, store.clone(), &rows).unwrap();
    let test = TensorDataset::from_manifest(&test_m, store.clone(), &rows).unwrap();
    let stats = channel_stats(&store, &train.rows);
    DatasetBundle {
        classes: ds.manifest.classes().to_vec(),
        train_manifest: train_m,
        train_store: store,
        train_locators: rows,
        train,
        val,
        test,
        stats,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let signal: f64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(0.25);
    let noise: f64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(1.0);
    let rus_threshold: u64 = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(512);
    let seeds: Vec<u64> = args
        .get(4)
        .map(|v| v.split(',').map(|s| s.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![1]);
    let max_epochs: usize = args.get(5).and_then(|v| v.parse().ok()).unwrap_or(6);

    let data_spec = SyntheticSpec {
        signal,
        noise_std: noise,
        counts: CountSpec::Geometric { head: 4096, ratio: 0.5 },
        ..SyntheticSpec::default_long_tail()
    };
    eprintln!("signal {signal} noise {noise} rus {rus_threshold} seeds {seeds:?} epochs {max_epochs}");
    let bundle = bundle_for(&data_spec, 42, 1234);

    let model_spec = ModelSpec {
        input: InputShape { height: 16, width: 16, channels: 3 },
        stages: vec![
            StageSpec { blocks: 1, width: 16, residual: true },
            StageSpec { blocks: 1, width: 32, residual: true },
            StageSpec { blocks: 1, width: 64, residual: true },
        ],
        feature_dim: 64,
        class_count: 10,
    };

    for &seed in &seeds {
        let t0 = Instant::now();
        let phase1 = TrainConfig {
            max_epochs,
            patience: 2,
            augment: false,
            monitor: Monitor::ValMacroF1,
            seed,
            ..TrainConfig::default()
        };
        let phase2 = TrainConfig {
            max_epochs: 20,
            patience: 3,
            augment: false,
            monitor: Monitor::ValMacroF1,
            seed: seed + 1000,
            ..TrainConfig::default()
        };

        let baseline = two_phase(&model_spec, &bundle, None, &phase1, &phase2).unwrap();
        let b_eval = baseline.final_eval();
        eprintln!(
            "seed {seed} baseline: acc {:.4} f1 {:.4} ({} epochs, best {}) [{:?}]",
            b_eval.accuracy,
            b_eval.macro_f1,
            baseline.phase1.epochs.len(),
            baseline.phase1.best_epoch,
            t0.elapsed()
        );

        let t1 = Instant::now();
        let plan = plan_rus(
            &bundle.train_distribution(),
            &RusRule { threshold: rus_threshold },
        )
        .unwrap();
        let rus = two_phase(&model_spec, &bundle, Some(&plan), &phase1, &phase2).unwrap();
        let p1 = &rus.phase1_eval;
        let p2 = rus.phase2_eval.as_ref().unwrap();
        eprintln!(
            "seed {seed} rus p1: acc {:.4} f1 {:.4} ({} epochs) | p2: acc {:.4} f1 {:.4} ({} epochs) [{:?}]",
            p1.accuracy,
            p1.macro_f1,
            rus.phase1.epochs.len(),
            p2.accuracy,
            p2.macro_f1,
            rus.phase2.as_ref().unwrap().epochs.len(),
            t1.elapsed()
        );
        eprintln!(
            "seed {seed} TREND: (i) p1acc<=base {} ({:.4} vs {:.4})  (ii) p2acc>=p1acc {}  (iii) p2f1-basef1 {:+.4}  (iv) |p2acc-baseacc| {:.4}",
            p1.accuracy <= b_eval.accuracy,
            p1.accuracy,
            b_eval.accuracy,
            p2.accuracy >= p1.accuracy,
            p2.macro_f1 - b_eval.macro_f1,
            (p2.accuracy - b_eval.accuracy).abs()
        );
    }
}
