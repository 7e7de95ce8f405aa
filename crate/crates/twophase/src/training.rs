//! Seeded training loops with early stopping, and the two-phase orchestration:
//! phase 1 trains every parameter on a rebalanced training set, phase 2
//! freezes the feature extractor and fine-tunes only the classifier head on
//! the original imbalanced training set. Validation and test splits are never
//! resampled.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::dataset::TensorDataset;
use crate::data::manifest::{ClassDistribution, DatasetManifest, Locator};
use crate::data::synthetic::ImageStore;
use crate::data::{augment, normalize, ChannelStats};
use crate::error::{Error, Result};
use crate::metrics::{argmax_tie_lowest, metrics_from_cm, ConfusionMatrix, EvalReport};
use crate::model::{FreezeTarget, Model, ModelSpec};
use crate::nn::{adam_step, AdamConfig, AdamState, Graph, NamedGrads, Tensor};
use crate::sampling::{apply_plan, ResamplePlan};
use crate::seeds;

/// Which validation metric early stopping watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    ValMacroF1,
    ValAccuracy,
    ValLoss,
}

impl Monitor {
    pub fn maximize(self) -> bool {
        !matches!(self, Monitor::ValLoss)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub monitor: Monitor,
    pub seed: u64,
    pub augment: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Print one line per epoch to stderr.
    pub log_progress: bool,
    /// Test hook: disable the cached-feature fast path for frozen-backbone
    /// runs (the fast path is bit-identical; this exists to prove it).
    #[serde(skip)]
    pub disable_feature_cache: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1e-3,
            max_epochs: 30,
            patience: 3,
            monitor: Monitor::ValMacroF1,
            seed: 0,
            augment: true,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            log_progress: false,
            disable_feature_cache: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Early-stopping state machine: strictly-better values reset the strike
/// count; `patience` consecutive non-improving epochs stop the run (patience
/// 0 stops at the first non-improvement).
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    maximize: bool,
    best: Option<f64>,
    best_epoch: usize,
    strikes: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, maximize: bool) -> Self {
        EarlyStopper {
            patience,
            maximize,
            best: None,
            best_epoch: 0,
            strikes: 0,
        }
    }

    /// Record one epoch's monitored value. Returns (improved, stop).
    pub fn observe(&mut self, epoch: usize, value: f64) -> (bool, bool) {
        let improved = match self.best {
            None => true,
            Some(best) => {
                if self.maximize {
                    value > best
                } else {
                    value < best
                }
            }
        };
        if improved {
            self.best = Some(value);
            self.best_epoch = epoch;
            self.strikes = 0;
            (true, false)
        } else {
            self.strikes += 1;
            (false, self.strikes >= self.patience.max(1))
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

/// Per-epoch records and how the run ended. The model handed back to the
/// caller holds the best epoch's weights, not the last epoch's.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseOutcome {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_monitor_value: f64,
    pub stop_reason: StopReason,
    pub trainable_scalars: usize,
}

fn monitor_value(monitor: Monitor, val_loss: f64, report: &EvalReport) -> f64 {
    match monitor {
        Monitor::ValMacroF1 => report.macro_f1,
        Monitor::ValAccuracy => report.accuracy,
        Monitor::ValLoss => val_loss,
    }
}

/// Validation pass: mean cross-entropy plus the full metric report.
fn validate(
    model: &Model<f32>,
    data: &TensorDataset,
    stats: &ChannelStats,
    batch_size: usize,
) -> Result<(f64, EvalReport)> {
    let mut cm = ConfusionMatrix::new(data.classes.clone());
    let order: Vec<usize> = (0..data.len()).collect();
    let plane = model.spec.input.height * model.spec.input.width;
    let mut buffer = Vec::new();
    let mut loss_sum = 0.0f64;
    for chunk in order.chunks(batch_size) {
        data.gather(chunk, &mut buffer);
        normalize(&mut buffer, model.spec.input.channels, plane, stats);
        let labels = data.labels_at(chunk);
        let mut g = Graph::<f32>::new();
        let input = g.leaf(Tensor::new(
            vec![
                chunk.len(),
                model.spec.input.channels,
                model.spec.input.height,
                model.spec.input.width,
            ],
            buffer.clone(),
        )?);
        let handle = model.forward(&mut g, input)?;
        let loss = g.softmax_cross_entropy(handle.logits, &labels)?;
        loss_sum += g.value(loss).data()[0] as f64 * chunk.len() as f64;
        for (row, &label) in g
            .value(handle.logits)
            .data()
            .chunks_exact(model.spec.class_count)
            .zip(labels.iter())
        {
            cm.record(label, argmax_tie_lowest(row));
        }
    }
    Ok((loss_sum / data.len() as f64, metrics_from_cm(&cm)))
}

/// One seeded epoch = one shuffled full pass, partial final batch included.
fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeds::rng(seed, &["shuffle", &epoch.to_string()]);
    order.shuffle(&mut rng);
    order
}

/// Train a model in place. Early stopping restores the best epoch's weights
/// before returning. Deterministic given (config.seed, inputs).
pub fn train(
    model: &mut Model<f32>,
    train_data: &TensorDataset,
    val_data: &TensorDataset,
    stats: &ChannelStats,
    config: &TrainConfig,
) -> Result<PhaseOutcome> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    if val_data.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }

    let head_names: Vec<String> = model.partition().head;
    let trainable: Vec<&String> = model
        .params
        .iter()
        .filter(|(_, t)| t.requires_grad())
        .map(|(n, _)| n)
        .collect();
    let head_only = !config.disable_feature_cache
        && !config.augment
        && trainable.len() == head_names.len()
        && trainable.iter().all(|n| head_names.contains(n));
    if head_only {
        return train_head_on_cached_features(model, train_data, val_data, stats, config);
    }

    let mut state = AdamState::new(config.adam());
    let mut stopper = EarlyStopper::new(config.patience, config.monitor.maximize());
    let mut records = Vec::new();
    let mut best_params = model.params.clone();
    let mut stop_reason = StopReason::MaxEpochs;
    let plane = model.spec.input.height * model.spec.input.width;
    let mut buffer = Vec::new();

    for epoch in 1..=config.max_epochs {
        let order = epoch_order(train_data.len(), config.seed, epoch);
        let mut loss_sum = 0.0f64;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            train_data.gather(chunk, &mut buffer);
            if config.augment {
                let batch_seed = seeds::derive_u64(
                    config.seed,
                    &["augment", &epoch.to_string(), &batch_idx.to_string()],
                );
                augment(
                    &mut buffer,
                    model.spec.input.channels,
                    model.spec.input.height,
                    model.spec.input.width,
                    batch_seed,
                );
            }
            normalize(&mut buffer, model.spec.input.channels, plane, stats);
            let labels = train_data.labels_at(chunk);

            let mut g = Graph::<f32>::new();
            let input = g.leaf(Tensor::new(
                vec![
                    chunk.len(),
                    model.spec.input.channels,
                    model.spec.input.height,
                    model.spec.input.width,
                ],
                buffer.clone(),
            )?);
            let handle = model.forward(&mut g, input)?;
            let loss = g.softmax_cross_entropy(handle.logits, &labels)?;
            let loss_value = g.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::numeric(
                    "train",
                    format!(
                        "loss became {loss_value} at epoch {epoch}, batch {batch_idx} (seed {})",
                        config.seed
                    ),
                ));
            }
            loss_sum += loss_value as f64 * chunk.len() as f64;
            g.backward(loss)?;
            let grads: NamedGrads<f32> = handle
                .param_nodes
                .iter()
                .filter_map(|(name, &node)| g.grad(node).map(|gr| (name.clone(), gr.to_vec())))
                .collect();
            adam_step(&mut model.params, &grads, &mut state)?;
        }

        let (val_loss, report) = validate(model, val_data, stats, config.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_data.len() as f64,
            val_loss,
            val_accuracy: report.accuracy,
            val_macro_f1: report.macro_f1,
        };
        if config.log_progress {
            eprintln!(
                "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  val_acc {:.4}  val_f1 {:.4}",
                record.epoch, record.train_loss, record.val_loss, record.val_accuracy, record.val_macro_f1
            );
        }
        records.push(record);
        let value = monitor_value(config.monitor, val_loss, &report);
        let (improved, stop) = stopper.observe(epoch, value);
        if improved {
            best_params = model.params.clone();
        }
        if stop {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    model.params = best_params;
    Ok(PhaseOutcome {
        epochs: records,
        best_epoch: stopper.best_epoch(),
        best_monitor_value: stopper.best_value().unwrap_or(f64::NAN),
        stop_reason,
        trainable_scalars: model.trainable_scalars(),
    })
}

/// Frozen-backbone fast path: pooled features are constant when the feature
/// extractor is frozen and augmentation is off, so they are computed once and
/// the head trains on them. Produces bit-identical results to the plain loop
/// (same arithmetic in the same order, same RNG streams).
fn train_head_on_cached_features(
    model: &mut Model<f32>,
    train_data: &TensorDataset,
    val_data: &TensorDataset,
    stats: &ChannelStats,
    config: &TrainConfig,
) -> Result<PhaseOutcome> {
    let feature_dim = model.spec.feature_dim;
    let classes = model.spec.class_count;
    let cache = |data: &TensorDataset| -> Result<Vec<f32>> {
        let plane = model.spec.input.height * model.spec.input.width;
        let order: Vec<usize> = (0..data.len()).collect();
        let mut features = Vec::with_capacity(data.len() * feature_dim);
        let mut buffer = Vec::new();
        for chunk in order.chunks(config.batch_size) {
            data.gather(chunk, &mut buffer);
            normalize(&mut buffer, model.spec.input.channels, plane, stats);
            features.extend_from_slice(&model.pooled_features(&buffer, chunk.len())?);
        }
        Ok(features)
    };
    let train_features = cache(train_data)?;
    let val_features = cache(val_data)?;

    let head_loss_pass = |params: &crate::nn::NamedTensors<f32>,
                          features: &[f32],
                          chunk: &[usize],
                          feats_of: &dyn Fn(usize) -> std::ops::Range<usize>,
                          labels: &[usize],
                          want_grads: bool|
     -> Result<(f32, Vec<f32>, Option<NamedGrads<f32>>)> {
        let mut batch = Vec::with_capacity(chunk.len() * feature_dim);
        for &pos in chunk {
            batch.extend_from_slice(&features[feats_of(pos)]);
        }
        let mut g = Graph::<f32>::new();
        let input = g.leaf(Tensor::new(vec![chunk.len(), feature_dim], batch)?);
        let weight = g.leaf(params["head.weight"].clone());
        let bias = g.leaf(params["head.bias"].clone());
        let logits = g.affine(input, weight, bias)?;
        let loss = g.softmax_cross_entropy(logits, labels)?;
        let loss_value = g.value(loss).data()[0];
        let logit_values = g.value(logits).data().to_vec();
        let grads = if want_grads {
            g.backward(loss)?;
            let mut grads = NamedGrads::new();
            if let Some(gr) = g.grad(weight) {
                grads.insert("head.weight".to_string(), gr.to_vec());
            }
            if let Some(gr) = g.grad(bias) {
                grads.insert("head.bias".to_string(), gr.to_vec());
            }
            Some(grads)
        } else {
            None
        };
        Ok((loss_value, logit_values, grads))
    };

    let range_of = |pos: usize| pos * feature_dim..(pos + 1) * feature_dim;
    let mut state = AdamState::new(config.adam());
    let mut stopper = EarlyStopper::new(config.patience, config.monitor.maximize());
    let mut records = Vec::new();
    let mut best_params = model.params.clone();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let order = epoch_order(train_data.len(), config.seed, epoch);
        let mut loss_sum = 0.0f64;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let labels = train_data.labels_at(chunk);
            let (loss_value, _, grads) =
                head_loss_pass(&model.params, &train_features, chunk, &range_of, &labels, true)?;
            if !loss_value.is_finite() {
                return Err(Error::numeric(
                    "train",
                    format!(
                        "loss became {loss_value} at epoch {epoch}, batch {batch_idx} (seed {})",
                        config.seed
                    ),
                ));
            }
            loss_sum += loss_value as f64 * chunk.len() as f64;
            adam_step(&mut model.params, &grads.unwrap(), &mut state)?;
        }

        // validation on cached features
        let order: Vec<usize> = (0..val_data.len()).collect();
        let mut cm = ConfusionMatrix::new(val_data.classes.clone());
        let mut val_loss_sum = 0.0f64;
        for chunk in order.chunks(config.batch_size) {
            let labels = val_data.labels_at(chunk);
            let (loss_value, logits, _) =
                head_loss_pass(&model.params, &val_features, chunk, &range_of, &labels, false)?;
            val_loss_sum += loss_value as f64 * chunk.len() as f64;
            for (row, &label) in logits.chunks_exact(classes).zip(labels.iter()) {
                cm.record(label, argmax_tie_lowest(row));
            }
        }
        let val_loss = val_loss_sum / val_data.len() as f64;
        let report = metrics_from_cm(&cm);
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_data.len() as f64,
            val_loss,
            val_accuracy: report.accuracy,
            val_macro_f1: report.macro_f1,
        };
        if config.log_progress {
            eprintln!(
                "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  val_acc {:.4}  val_f1 {:.4}  (cached features)",
                record.epoch, record.train_loss, record.val_loss, record.val_accuracy, record.val_macro_f1
            );
        }
        records.push(record);
        let value = monitor_value(config.monitor, val_loss, &report);
        let (improved, stop) = stopper.observe(epoch, value);
        if improved {
            best_params = model.params.clone();
        }
        if stop {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    model.params = best_params;
    Ok(PhaseOutcome {
        epochs: records,
        best_epoch: stopper.best_epoch(),
        best_monitor_value: stopper.best_value().unwrap_or(f64::NAN),
        stop_reason,
        trainable_scalars: model.trainable_scalars(),
    })
}

/// Everything a regime cell needs: the original splits (train as manifest so
/// resample plans can be applied to it), the shared image store, and the
/// train-split normalization statistics used by every phase and evaluation.
#[derive(Clone)]
pub struct DatasetBundle {
    pub classes: Vec<String>,
    pub train_manifest: DatasetManifest,
    pub train_store: Arc<ImageStore>,
    pub train_locators: HashMap<Locator, usize>,
    pub train: TensorDataset,
    pub val: TensorDataset,
    pub test: TensorDataset,
    pub stats: ChannelStats,
}

impl DatasetBundle {
    pub fn train_distribution(&self) -> ClassDistribution {
        self.train_manifest.distribution()
    }

    /// Apply a resample plan to the train split only.
    pub fn resampled_train(&self, plan: &ResamplePlan, seed: u64) -> Result<TensorDataset> {
        let resampled = apply_plan(&self.train_manifest, plan, seed)?;
        TensorDataset::from_manifest(&resampled, self.train_store.clone(), &self.train_locators)
    }
}

/// Outcome of one regime cell.
#[derive(Debug, Clone)]
pub struct TwoPhaseOutcome {
    pub regime: String,
    pub plan: Option<ResamplePlan>,
    pub phase1: PhaseOutcome,
    pub phase1_eval: EvalReport,
    pub phase1_model: Model<f32>,
    pub phase2: Option<PhaseOutcome>,
    pub phase2_eval: Option<EvalReport>,
    pub phase2_model: Option<Model<f32>>,
}

impl TwoPhaseOutcome {
    /// The final model's evaluation (phase 2 when it ran, else phase 1).
    pub fn final_eval(&self) -> &EvalReport {
        self.phase2_eval.as_ref().unwrap_or(&self.phase1_eval)
    }
}

/// Run one regime: phase 1 on the (optionally resampled) train split with all
/// parameters trainable; then, unless this is the baseline (no plan), phase 2
/// fine-tunes only the head on the original train split starting from the
/// phase-1 best weights. Test evaluation happens once per phase, after that
/// phase's training finished.
pub fn two_phase(
    spec: &ModelSpec,
    bundle: &DatasetBundle,
    plan: Option<&ResamplePlan>,
    phase1_config: &TrainConfig,
    phase2_config: &TrainConfig,
) -> Result<TwoPhaseOutcome> {
    let phase1_train = match plan {
        Some(plan) => bundle.resampled_train(plan, phase1_config.seed)?,
        None => bundle.train.clone(),
    };

    let mut model = Model::<f32>::build(spec, phase1_config.seed)?;
    model.freeze(FreezeTarget::None);
    let phase1 =
        train(&mut model, &phase1_train, &bundle.val, &bundle.stats, phase1_config)?;
    let phase1_eval = crate::metrics::evaluate(
        &model,
        &bundle.test,
        &bundle.stats,
        phase1_config.batch_size,
    )?;

    if plan.is_none() {
        return Ok(TwoPhaseOutcome {
            regime: "baseline".to_string(),
            plan: None,
            phase1,
            phase1_eval,
            phase1_model: model,
            phase2: None,
            phase2_eval: None,
            phase2_model: None,
        });
    }

    let mut phase2_model = model.clone();
    phase2_model.freeze(FreezeTarget::Feature);
    let phase2 = train(
        &mut phase2_model,
        &bundle.train,
        &bundle.val,
        &bundle.stats,
        phase2_config,
    )?;
    let phase2_eval = crate::metrics::evaluate(
        &phase2_model,
        &bundle.test,
        &bundle.stats,
        phase2_config.batch_size,
    )?;

    Ok(TwoPhaseOutcome {
        regime: plan.map(|p| p.regime.clone()).unwrap_or_default(),
        plan: plan.cloned(),
        phase1,
        phase1_eval,
        phase1_model: model,
        phase2: Some(phase2),
        phase2_eval: Some(phase2_eval),
        phase2_model: Some(phase2_model),
    })
}
