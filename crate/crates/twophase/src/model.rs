//! Configurable residual CNN classifiers with an explicit feature-extractor /
//! classifier-head split, freezing, and checkpointing.
//!
//! The head is always exactly one affine layer (feature dim -> classes);
//! everything else is the feature extractor. Freezing a partition clears
//! `requires_grad` on its tensors, which both masks them from the optimizer
//! and prunes them out of the backward pass.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Graph, NamedTensors, NodeId, Scalar, Tensor};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub blocks: usize,
    pub width: usize,
    pub residual: bool,
}

/// Architecture description. Stages after the first downsample by 2 via a
/// strided first conv; the classifier head is a single affine layer from the
/// pooled feature vector to the class logits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input: InputShape,
    pub stages: Vec<StageSpec>,
    pub feature_dim: usize,
    pub class_count: usize,
}

impl ModelSpec {
    /// Desk-scale default: three residual stages of widths 32/64/128 with two
    /// blocks each on 32x32x3 inputs.
    pub fn desk_default(class_count: usize) -> Self {
        ModelSpec {
            input: InputShape {
                height: 32,
                width: 32,
                channels: 3,
            },
            stages: vec![
                StageSpec { blocks: 2, width: 32, residual: true },
                StageSpec { blocks: 2, width: 64, residual: true },
                StageSpec { blocks: 2, width: 128, residual: true },
            ],
            feature_dim: 128,
            class_count,
        }
    }

    /// Four residual stages of widths 64..512, two blocks each: the familiar
    /// 18-layer layout with a single fully connected head.
    pub fn resnet18_analog(class_count: usize) -> Self {
        ModelSpec {
            input: InputShape {
                height: 32,
                width: 32,
                channels: 3,
            },
            stages: vec![
                StageSpec { blocks: 2, width: 64, residual: true },
                StageSpec { blocks: 2, width: 128, residual: true },
                StageSpec { blocks: 2, width: 256, residual: true },
                StageSpec { blocks: 2, width: 512, residual: true },
            ],
            feature_dim: 512,
            class_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("model needs at least one stage".into()));
        }
        if self.stages.iter().any(|s| s.blocks == 0 || s.width == 0) {
            return Err(Error::Config("stage blocks and widths must be >= 1".into()));
        }
        if self.class_count == 0 {
            return Err(Error::Config("class count must be >= 1".into()));
        }
        let last_width = self.stages.last().unwrap().width;
        if self.feature_dim != last_width {
            return Err(Error::Config(format!(
                "feature dim {} must equal the last stage width {last_width}",
                self.feature_dim
            )));
        }
        let downsamples = self.stages.len() - 1;
        let min_side = 1usize << downsamples;
        if self.input.height < min_side || self.input.width < min_side {
            return Err(Error::Config(format!(
                "input {}x{} cannot survive {downsamples} downsampling stages (needs at least {min_side}x{min_side})",
                self.input.height, self.input.width
            )));
        }
        if self.input.channels == 0 {
            return Err(Error::Config("input channels must be >= 1".into()));
        }
        Ok(())
    }

    /// Scalar count of the head partition: (feature_dim + 1) * classes.
    pub fn head_scalars(&self) -> usize {
        (self.feature_dim + 1) * self.class_count
    }

    /// Canonical hash of the spec, stamped into checkpoints.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Which side of the partition to freeze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezeTarget {
    Feature,
    Head,
    None,
}

/// Named tensor sets: the feature extractor vs. the single affine head.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPartition {
    pub feature: Vec<String>,
    pub head: Vec<String>,
}

/// A built model: spec plus named parameter tensors.
#[derive(Debug, Clone)]
pub struct Model<E: Scalar> {
    pub spec: ModelSpec,
    pub params: NamedTensors<E>,
}

/// Node handles produced by one forward construction.
pub struct ForwardHandle {
    pub logits: NodeId,
    pub param_nodes: BTreeMap<String, NodeId>,
}

const HEAD_WEIGHT: &str = "head.weight";
const HEAD_BIAS: &str = "head.bias";

impl<E: Scalar> Model<E> {
    /// Deterministic initialization: every tensor draws from its own stream
    /// keyed by (seed, tensor name), fan-in-scaled normal for kernels and
    /// weights, zeros for biases.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut params = NamedTensors::new();
        let mut add_kernel = |name: String, shape: Vec<usize>| {
            let fan_in: usize = shape[1..].iter().product();
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("valid std");
            let mut rng = seeds::rng(seed, &["init", &name]);
            let tensor = Tensor::from_fn(shape, |_| E::of_f64(rng.sample(normal))).with_grad();
            params.insert(name, tensor);
        };

        let mut in_c = spec.input.channels;
        add_kernel("stem.kernel".into(), vec![spec.stages[0].width, in_c, 3, 3]);
        in_c = spec.stages[0].width;
        let mut biases = vec![("stem.bias".to_string(), spec.stages[0].width)];

        for (s, stage) in spec.stages.iter().enumerate() {
            for b in 0..stage.blocks {
                let prefix = format!("stage{s}.block{b}");
                let downsample = s > 0 && b == 0;
                add_kernel(
                    format!("{prefix}.conv1.kernel"),
                    vec![stage.width, in_c, 3, 3],
                );
                biases.push((format!("{prefix}.conv1.bias"), stage.width));
                add_kernel(
                    format!("{prefix}.conv2.kernel"),
                    vec![stage.width, stage.width, 3, 3],
                );
                biases.push((format!("{prefix}.conv2.bias"), stage.width));
                if stage.residual && (downsample || in_c != stage.width) {
                    add_kernel(format!("{prefix}.proj.kernel"), vec![stage.width, in_c, 1, 1]);
                }
                in_c = stage.width;
            }
        }
        add_kernel(
            HEAD_WEIGHT.into(),
            vec![spec.class_count, spec.feature_dim],
        );
        biases.push((HEAD_BIAS.into(), spec.class_count));

        for (name, len) in biases {
            params.insert(name, Tensor::zeros(vec![len]).with_grad());
        }
        Ok(Model {
            spec: spec.clone(),
            params,
        })
    }

    fn leaf_params(&self, g: &mut Graph<E>) -> BTreeMap<String, NodeId> {
        self.params
            .iter()
            .map(|(name, tensor)| (name.clone(), g.leaf(tensor.clone())))
            .collect()
    }

    fn features_from(
        &self,
        g: &mut Graph<E>,
        input: NodeId,
        nodes: &BTreeMap<String, NodeId>,
    ) -> Result<NodeId> {
        let conv = |g: &mut Graph<E>,
                    x: NodeId,
                    name: &str,
                    stride: usize,
                    padding: usize,
                    bias: bool|
         -> Result<NodeId> {
            let kernel = nodes[&format!("{name}.kernel")];
            let bias = bias.then(|| nodes[&format!("{name}.bias")]);
            g.conv2d(x, kernel, bias, stride, padding)
        };

        let mut x = conv(g, input, "stem", 1, 1, true)?;
        x = g.relu(x);
        let mut in_c = self.spec.stages[0].width;
        for (s, stage) in self.spec.stages.iter().enumerate() {
            for b in 0..stage.blocks {
                let prefix = format!("stage{s}.block{b}");
                let downsample = s > 0 && b == 0;
                let stride = if downsample { 2 } else { 1 };
                let mut y = conv(g, x, &format!("{prefix}.conv1"), stride, 1, true)?;
                y = g.relu(y);
                y = conv(g, y, &format!("{prefix}.conv2"), 1, 1, true)?;
                if stage.residual {
                    let shortcut = if downsample || in_c != stage.width {
                        conv(g, x, &format!("{prefix}.proj"), stride, 0, false)?
                    } else {
                        x
                    };
                    y = g.residual_add(y, shortcut)?;
                }
                x = g.relu(y);
                in_c = stage.width;
            }
        }
        g.global_avg_pool(x)
    }

    /// Build the feature trunk for a batch node: everything up to and
    /// including the global average pool, [n, feature_dim].
    pub fn features(&self, g: &mut Graph<E>, input: NodeId) -> Result<NodeId> {
        let nodes = self.leaf_params(g);
        self.features_from(g, input, &nodes)
    }

    /// Build the forward graph for a batch node, leafing every parameter in.
    /// Returns the logits node and the parameter leaf ids for gradient reads.
    pub fn forward(&self, g: &mut Graph<E>, input: NodeId) -> Result<ForwardHandle> {
        let nodes = self.leaf_params(g);
        let pooled = self.features_from(g, input, &nodes)?;
        let logits = g.affine(pooled, nodes[HEAD_WEIGHT], nodes[HEAD_BIAS])?;
        Ok(ForwardHandle {
            logits,
            param_nodes: nodes,
        })
    }

    /// Run the model on a raw [n, c, h, w] buffer and return the logits.
    pub fn logits(&self, images: &[E], batch: usize) -> Result<Vec<E>> {
        let shape = vec![
            batch,
            self.spec.input.channels,
            self.spec.input.height,
            self.spec.input.width,
        ];
        let mut g = Graph::new();
        let input = g.leaf(Tensor::new(shape, images.to_vec())?);
        let handle = self.forward(&mut g, input)?;
        Ok(g.value(handle.logits).data().to_vec())
    }

    /// Pooled feature vectors [n, feature_dim] for a raw batch: the forward
    /// pass up to but not including the classifier head.
    pub fn pooled_features(&self, images: &[E], batch: usize) -> Result<Vec<E>> {
        let shape = vec![
            batch,
            self.spec.input.channels,
            self.spec.input.height,
            self.spec.input.width,
        ];
        let mut g = Graph::new();
        let input = g.leaf(Tensor::new(shape, images.to_vec())?);
        let pooled = self.features(&mut g, input)?;
        Ok(g.value(pooled).data().to_vec())
    }

    /// Head = the final affine layer; feature = everything else.
    pub fn partition(&self) -> ParameterPartition {
        let mut feature = Vec::new();
        let mut head = Vec::new();
        for name in self.params.keys() {
            if name == HEAD_WEIGHT || name == HEAD_BIAS {
                head.push(name.clone());
            } else {
                feature.push(name.clone());
            }
        }
        ParameterPartition { feature, head }
    }

    pub fn scalar_count(&self, names: &[String]) -> usize {
        names.iter().map(|n| self.params[n].numel()).sum()
    }

    pub fn total_scalars(&self) -> usize {
        self.params.values().map(|t| t.numel()).sum()
    }

    pub fn trainable_scalars(&self) -> usize {
        self.params
            .values()
            .filter(|t| t.requires_grad())
            .map(|t| t.numel())
            .sum()
    }

    /// Apply a trainability mask. Frozen tensors receive no gradients and the
    /// optimizer never touches them. Returns the trainable scalar count.
    pub fn freeze(&mut self, which: FreezeTarget) -> usize {
        let partition = self.partition();
        let frozen: &[String] = match which {
            FreezeTarget::Feature => &partition.feature,
            FreezeTarget::Head => &partition.head,
            FreezeTarget::None => &[],
        };
        for (name, tensor) in self.params.iter_mut() {
            tensor.set_requires_grad(!frozen.contains(name));
        }
        self.trainable_scalars()
    }

    /// Hex digest over the named tensors in sorted order (names and bytes).
    pub fn tensor_hash(&self, names: &[String]) -> String {
        let mut hasher = Sha256::new();
        for name in names {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            for v in self.params[name].data() {
                hasher.update(v.as_f64().to_le_bytes());
            }
        }
        hex(&hasher.finalize())
    }

    pub fn feature_hash(&self) -> String {
        self.tensor_hash(&self.partition().feature)
    }
}

/// Checkpoint metadata stamped next to the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub seed: u64,
    pub phase: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    spec: ModelSpec,
    spec_hash: String,
    tensors: Vec<(String, Vec<usize>)>,
    meta: CheckpointMeta,
}

const CHECKPOINT_FORMAT: &str = "twophase-checkpoint-v1";

/// Write a checkpoint: one JSON header line, then little-endian f32 tensor
/// data concatenated in sorted tensor-name order.
pub fn save_checkpoint(model: &Model<f32>, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        spec: model.spec.clone(),
        spec_hash: model.spec.hash(),
        tensors: model
            .params
            .iter()
            .map(|(name, t)| (name.clone(), t.shape().to_vec()))
            .collect(),
        meta: meta.clone(),
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for tensor in model.params.values() {
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Load a checkpoint saved by [`save_checkpoint`]. All tensors come back
/// trainable; apply [`Model::freeze`] afterwards as needed.
pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, CheckpointMeta)> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Data(format!("{}: missing header line", path.display())))?;
    let header: CheckpointHeader = serde_json::from_slice(&raw[..newline])?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Data(format!(
            "{}: unknown checkpoint format `{}`",
            path.display(),
            header.format
        )));
    }
    if header.spec_hash != header.spec.hash() {
        return Err(Error::Data(format!(
            "{}: spec hash mismatch; checkpoint is corrupt",
            path.display()
        )));
    }
    let mut body = &raw[newline + 1..];
    let mut params = NamedTensors::new();
    for (name, shape) in &header.tensors {
        let numel: usize = shape.iter().product();
        if body.len() < numel * 4 {
            return Err(Error::Data(format!(
                "{}: truncated tensor data for `{name}`",
                path.display()
            )));
        }
        let data: Vec<f32> = body[..numel * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        body = &body[numel * 4..];
        params.insert(name.clone(), Tensor::new(shape.clone(), data)?.with_grad());
    }
    if !body.is_empty() {
        return Err(Error::Data(format!(
            "{}: {} trailing bytes after tensor data",
            path.display(),
            body.len()
        )));
    }
    Ok((
        Model {
            spec: header.spec,
            params,
        },
        header.meta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            input: InputShape { height: 8, width: 8, channels: 2 },
            stages: vec![
                StageSpec { blocks: 1, width: 4, residual: true },
                StageSpec { blocks: 1, width: 6, residual: true },
            ],
            feature_dim: 6,
            class_count: 3,
        }
    }

    #[test]
    fn head_scalar_counts_match_closed_form() {
        assert_eq!(ModelSpec::resnet18_analog(52).head_scalars(), 26_676);
        assert_eq!(ModelSpec::desk_default(10).head_scalars(), 1_290);
        let mut spec = ModelSpec::desk_default(10);
        spec.stages.last_mut().unwrap().width = 64;
        spec.feature_dim = 64;
        assert_eq!(spec.head_scalars(), 650);
    }

    #[test]
    fn analog_feature_partition_is_around_11m_scalars() {
        let model = Model::<f32>::build(&ModelSpec::resnet18_analog(52), 0).unwrap();
        let partition = model.partition();
        let feature = model.scalar_count(&partition.feature);
        let head = model.scalar_count(&partition.head);
        assert_eq!(head, 26_676);
        assert!(
            (11_000_000..11_350_000).contains(&feature),
            "feature scalars {feature}"
        );
    }

    #[test]
    fn partition_union_covers_all_parameters() {
        let model = Model::<f32>::build(&tiny_spec(), 1).unwrap();
        let partition = model.partition();
        let union = partition.feature.len() + partition.head.len();
        assert_eq!(union, model.params.len());
        assert_eq!(
            model.scalar_count(&partition.feature) + model.scalar_count(&partition.head),
            model.total_scalars()
        );
        assert_eq!(partition.head.len(), 2);
    }

    #[test]
    fn same_seed_builds_bit_identical_weights() {
        let a = Model::<f32>::build(&tiny_spec(), 9).unwrap();
        let b = Model::<f32>::build(&tiny_spec(), 9).unwrap();
        for (name, t) in &a.params {
            assert_eq!(t.data(), b.params[name].data(), "{name}");
        }
        let c = Model::<f32>::build(&tiny_spec(), 10).unwrap();
        assert_ne!(
            a.params["stem.kernel"].data(),
            c.params["stem.kernel"].data()
        );
    }

    #[test]
    fn forward_emits_batch_by_class_logits() {
        let spec = tiny_spec();
        let model = Model::<f32>::build(&spec, 3).unwrap();
        for batch in [1usize, 2, 5] {
            let images = vec![0.1f32; batch * 2 * 8 * 8];
            let logits = model.logits(&images, batch).unwrap();
            assert_eq!(logits.len(), batch * 3);
            assert!(logits.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn freeze_feature_reports_head_count_and_masks_gradients() {
        let mut model = Model::<f32>::build(&tiny_spec(), 4).unwrap();
        let total = model.total_scalars();
        assert_eq!(model.freeze(FreezeTarget::None), total);
        let trainable = model.freeze(FreezeTarget::Feature);
        assert_eq!(trainable, model.spec.head_scalars());
        assert!(model.params["head.weight"].requires_grad());
        assert!(!model.params["stem.kernel"].requires_grad());
    }

    #[test]
    fn incompatible_input_shape_is_rejected() {
        let mut spec = tiny_spec();
        spec.input.height = 1; // cannot downsample once
        assert!(Model::<f32>::build(&spec, 0).is_err());
        let mut spec = tiny_spec();
        spec.feature_dim = 5; // must equal last width
        assert!(spec.validate().is_err());
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_identical() {
        let spec = tiny_spec();
        let model = Model::<f32>::build(&spec, 7).unwrap();
        let meta = CheckpointMeta {
            epoch: 3,
            seed: 7,
            phase: "phase1".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &meta, &path).unwrap();
        let (loaded, loaded_meta) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded_meta, meta);
        for (name, t) in &model.params {
            assert_eq!(t.data(), loaded.params[name].data(), "{name}");
        }
        // logits on a probe batch are bit-identical
        let probe = vec![0.25f32; 2 * 2 * 8 * 8];
        assert_eq!(
            model.logits(&probe, 2).unwrap(),
            loaded.logits(&probe, 2).unwrap()
        );
    }

    #[test]
    fn feature_hash_ignores_head_changes() {
        let mut model = Model::<f32>::build(&tiny_spec(), 2).unwrap();
        let before = model.feature_hash();
        model
            .params
            .get_mut("head.weight")
            .unwrap()
            .data_mut()[0] += 1.0;
        assert_eq!(model.feature_hash(), before);
        model
            .params
            .get_mut("stem.kernel")
            .unwrap()
            .data_mut()[0] += 1.0;
        assert_ne!(model.feature_hash(), before);
    }
}
