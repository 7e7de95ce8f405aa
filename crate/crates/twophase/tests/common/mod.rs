//! Shared helpers for integration tests.

#![allow(dead_code)]

use rand::Rng;

use twophase::model::{InputShape, Model, ModelSpec, StageSpec};
use twophase::nn::{Graph, NamedGrads, Scalar, Tensor};
use twophase::seeds;

/// Scalar cross-entropy loss of a model on a fixed batch, built through the
/// forward graph. Used both to read autodiff gradients and as the function
/// the finite-difference oracle probes.
pub fn batch_loss_and_grads(
    model: &Model<f64>,
    images: &[f64],
    batch: usize,
    targets: &[usize],
) -> (f64, NamedGrads<f64>) {
    let mut g = Graph::<f64>::new();
    let input = g.leaf(
        Tensor::new(
            vec![
                batch,
                model.spec.input.channels,
                model.spec.input.height,
                model.spec.input.width,
            ],
            images.to_vec(),
        )
        .unwrap(),
    );
    let handle = model.forward(&mut g, input).unwrap();
    let loss = g.softmax_cross_entropy(handle.logits, targets).unwrap();
    g.backward(loss).unwrap();
    let grads: NamedGrads<f64> = handle
        .param_nodes
        .iter()
        .filter_map(|(name, &node)| g.grad(node).map(|gr| (name.clone(), gr.to_vec())))
        .collect();
    (g.value(loss).data()[0], grads)
}

fn batch_loss(model: &Model<f64>, images: &[f64], batch: usize, targets: &[usize]) -> f64 {
    let mut g = Graph::<f64>::new();
    let input = g.leaf(
        Tensor::new(
            vec![
                batch,
                model.spec.input.channels,
                model.spec.input.height,
                model.spec.input.width,
            ],
            images.to_vec(),
        )
        .unwrap(),
    );
    let handle = model.forward(&mut g, input).unwrap();
    let loss = g.softmax_cross_entropy(handle.logits, targets).unwrap();
    g.value(loss).data()[0]
}

/// Central-difference gradient check over every parameter of a 64-bit model.
/// Returns the maximum relative error, where the relative error uses an
/// absolute guard of 1e-3 in the denominator so that finite-difference
/// truncation noise (about h^2 = 1e-8) on near-zero gradients does not
/// register as disagreement.
pub fn finite_difference_max_rel_err(spec: &ModelSpec, seed: u64, batch: usize) -> f64 {
    let h = 1e-4;
    let mut model = Model::<f64>::build(spec, seed).unwrap();
    let image_len = spec.input.channels * spec.input.height * spec.input.width;
    let mut rng = seeds::rng(seed, &["gradcheck", "batch"]);
    let images: Vec<f64> = (0..batch * image_len)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let targets: Vec<usize> = (0..batch)
        .map(|_| rng.gen_range(0..spec.class_count))
        .collect();

    let (_, grads) = batch_loss_and_grads(&model, &images, batch, &targets);
    let names: Vec<String> = model.params.keys().cloned().collect();
    let mut max_rel = 0.0f64;
    for name in names {
        let len = model.params[&name].numel();
        for i in 0..len {
            let original = model.params[&name].data()[i];
            model.params.get_mut(&name).unwrap().data_mut()[i] = original + h;
            let up = batch_loss(&model, &images, batch, &targets);
            model.params.get_mut(&name).unwrap().data_mut()[i] = original - h;
            let down = batch_loss(&model, &images, batch, &targets);
            model.params.get_mut(&name).unwrap().data_mut()[i] = original;
            let fd = (up - down) / (2.0 * h);
            let ad = grads[&name][i];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-3);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

/// A small random architecture with every op kind in play (residual blocks,
/// downsampling, projection shortcuts), kept under 10k parameters.
pub fn random_small_spec(seed: u64) -> ModelSpec {
    let mut rng = seeds::rng(seed, &["gradcheck", "spec"]);
    let stages = rng.gen_range(2..=3);
    let mut specs = Vec::new();
    let mut width = 2 * rng.gen_range(1..=2);
    for _ in 0..stages {
        specs.push(StageSpec {
            blocks: rng.gen_range(1..=2),
            width,
            residual: rng.gen_bool(0.7),
        });
        width *= 2;
    }
    let feature_dim = specs.last().unwrap().width;
    ModelSpec {
        input: InputShape {
            height: 8,
            width: 8,
            channels: rng.gen_range(1..=3),
        },
        stages: specs,
        feature_dim,
        class_count: rng.gen_range(2..=5),
    }
}
