//! Define-by-run reverse-mode autodiff over the op set needed for small CNNs.
//!
//! A [`Graph`] is rebuilt per batch: leaves go in (inputs, parameters), ops
//! append nodes in execution order, and [`Graph::backward`] walks the nodes in
//! reverse insertion order exactly once, accumulating gradients additively
//! across fan-out. Gradients are only materialized for nodes that transitively
//! depend on a `requires_grad` leaf, so freezing parameters also prunes the
//! backward pass (training a frozen-backbone head never touches conv kernels).
//!
//! Conv kernels parallelize over fixed-size batch chunks and merge partial
//! results in chunk order, so outputs are bit-identical for any thread count.

use rayon::prelude::*;

use super::kernels::{col2im_accumulate, im2col, matmul_nn, matmul_nt, matmul_tn, ConvGeometry};
use super::tensor::{shape_string, Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Batch chunk size for parallel conv kernels. Fixed (not thread-dependent)
/// so that partial-sum merge order never changes.
const CONV_CHUNK: usize = 16;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Affine {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
        geo: ConvGeometry,
    },
    Relu {
        input: NodeId,
    },
    MaxPool2d {
        input: NodeId,
        argmax: Vec<u32>,
    },
    GlobalAvgPool {
        input: NodeId,
    },
    ResidualAdd {
        a: NodeId,
        b: NodeId,
    },
    Flatten {
        input: NodeId,
    },
    SoftmaxCrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
    },
}

struct Node<E: Scalar> {
    value: Tensor<E>,
    grad: Option<Vec<E>>,
    requires_grad: bool,
    op: Op,
    /// Saved softmax probabilities for the cross-entropy backward.
    saved: Option<Vec<E>>,
}

/// A single-use computation graph (Wengert list).
pub struct Graph<E: Scalar> {
    nodes: Vec<Node<E>>,
    backward_done: bool,
}

impl<E: Scalar> Default for Graph<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Scalar> Graph<E> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a leaf tensor. Its `requires_grad` flag decides whether the
    /// backward pass will produce a gradient for it.
    pub fn leaf(&mut self, value: Tensor<E>) -> NodeId {
        let requires_grad = value.requires_grad();
        self.push(value, requires_grad, Op::Leaf, None)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<E> {
        &self.nodes[id.0].value
    }

    /// Gradient of a node, if backward produced one.
    pub fn grad(&self, id: NodeId) -> Option<&[E]> {
        self.nodes[id.0].grad.as_deref()
    }

    fn push(
        &mut self,
        value: Tensor<E>,
        requires_grad: bool,
        op: Op,
        saved: Option<Vec<E>>,
    ) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
            saved,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn shape_of(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    // ------------------------------------------------------------------
    // Forward ops
    // ------------------------------------------------------------------

    /// Fully connected layer: `y[b,o] = sum_i x[b,i] * w[o,i] + bias[o]`.
    pub fn affine(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x_shape, w_shape, b_shape) = (
            self.shape_of(input).to_vec(),
            self.shape_of(weight).to_vec(),
            self.shape_of(bias).to_vec(),
        );
        if x_shape.len() != 2 || w_shape.len() != 2 || b_shape.len() != 1 {
            return Err(Error::shape(
                "affine",
                "input [b,in], weight [out,in], bias [out]",
                format!("{:?}, {:?}, {:?}", x_shape, w_shape, b_shape),
            ));
        }
        let (b, input_dim) = (x_shape[0], x_shape[1]);
        let (out_dim, w_in) = (w_shape[0], w_shape[1]);
        if w_in != input_dim || b_shape[0] != out_dim {
            return Err(Error::shape(
                "affine",
                format!("weight [*, {input_dim}], bias [{out_dim}]"),
                format!("weight {:?}, bias {:?}", w_shape, b_shape),
            ));
        }
        let mut out = vec![E::zero(); b * out_dim];
        matmul_nt(
            b,
            input_dim,
            out_dim,
            self.nodes[input.0].value.data(),
            self.nodes[weight.0].value.data(),
            &mut out,
        );
        let bias_data = self.nodes[bias.0].value.data();
        for row in out.chunks_exact_mut(out_dim) {
            for (y, &bv) in row.iter_mut().zip(bias_data.iter()) {
                *y = *y + bv;
            }
        }
        let rg = self.needs_grad(&[input, weight, bias]);
        Ok(self.push(
            Tensor::new(vec![b, out_dim], out)?,
            rg,
            Op::Affine {
                input,
                weight,
                bias,
            },
            None,
        ))
    }

    /// 2-D convolution over NCHW input with an OIHW kernel.
    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let x_shape = self.shape_of(input).to_vec();
        let k_shape = self.shape_of(kernel).to_vec();
        if x_shape.len() != 4 || k_shape.len() != 4 {
            return Err(Error::shape(
                "conv2d",
                "input [n,c,h,w], kernel [o,c,kh,kw]",
                format!("input {:?}, kernel {:?}", x_shape, k_shape),
            ));
        }
        let (n, cin, h, w) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
        let (cout, kcin, kh, kw) = (k_shape[0], k_shape[1], k_shape[2], k_shape[3]);
        if kcin != cin {
            return Err(Error::shape(
                "conv2d",
                format!("kernel [*, {cin}, *, *]"),
                shape_string(&k_shape),
            ));
        }
        if let Some(bias_id) = bias {
            let b_shape = self.shape_of(bias_id);
            if b_shape != [cout] {
                return Err(Error::shape(
                    "conv2d",
                    format!("bias [{cout}]"),
                    shape_string(b_shape),
                ));
            }
        }
        let geo = ConvGeometry::new(cin, h, w, kh, kw, stride, padding).ok_or_else(|| {
            Error::shape(
                "conv2d",
                format!("input at least {kh}x{kw} after padding {padding}, stride >= 1"),
                format!("input {h}x{w}, stride {stride}"),
            )
        })?;

        let positions = geo.out_positions();
        let patch = geo.patch_len();
        let image_len = cin * h * w;
        let out_image_len = cout * positions;
        let kernel_data = self.nodes[kernel.0].value.data();
        let input_data = self.nodes[input.0].value.data();
        let mut out = vec![E::zero(); n * out_image_len];

        input_data
            .par_chunks(image_len)
            .zip(out.par_chunks_mut(out_image_len))
            .for_each(|(image, out_image)| {
                let mut col = vec![E::zero(); patch * positions];
                im2col(&geo, image, &mut col);
                matmul_nn(cout, patch, positions, kernel_data, &col, out_image);
            });

        if let Some(bias_id) = bias {
            let bias_data = self.nodes[bias_id.0].value.data();
            for out_image in out.chunks_exact_mut(out_image_len) {
                for (c, plane) in out_image.chunks_exact_mut(positions).enumerate() {
                    let bv = bias_data[c];
                    for y in plane.iter_mut() {
                        *y = *y + bv;
                    }
                }
            }
        }

        let mut dep = vec![input, kernel];
        if let Some(b) = bias {
            dep.push(b);
        }
        let rg = self.needs_grad(&dep);
        Ok(self.push(
            Tensor::new(vec![n, cout, geo.oh, geo.ow], out)?,
            rg,
            Op::Conv2d {
                input,
                kernel,
                bias,
                geo,
            },
            None,
        ))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let value = Tensor::from_fn(self.shape_of(input).to_vec(), |i| {
            let v = self.nodes[input.0].value.data()[i];
            if v > E::zero() {
                v
            } else {
                E::zero()
            }
        });
        let rg = self.needs_grad(&[input]);
        self.push(value, rg, Op::Relu { input }, None)
    }

    /// Max pooling with square window and no padding. Ties resolve to the
    /// first element in scan order, so the op is deterministic.
    pub fn max_pool2d(&mut self, input: NodeId, kernel: usize, stride: usize) -> Result<NodeId> {
        let x_shape = self.shape_of(input).to_vec();
        if x_shape.len() != 4 {
            return Err(Error::shape(
                "max_pool2d",
                "input [n,c,h,w]",
                shape_string(&x_shape),
            ));
        }
        let (n, c, h, w) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
        if kernel == 0 || stride == 0 || h < kernel || w < kernel {
            return Err(Error::shape(
                "max_pool2d",
                format!("window {kernel} within {h}x{w}, stride >= 1"),
                format!("kernel {kernel}, stride {stride}"),
            ));
        }
        let oh = (h - kernel) / stride + 1;
        let ow = (w - kernel) / stride + 1;
        let data = self.nodes[input.0].value.data();
        let mut out = vec![E::zero(); n * c * oh * ow];
        let mut argmax = vec![0u32; n * c * oh * ow];
        for plane_idx in 0..n * c {
            let plane = &data[plane_idx * h * w..(plane_idx + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = E::neg_infinity();
                    let mut best_at = 0usize;
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let at = (oy * stride + ky) * w + ox * stride + kx;
                            if plane[at] > best {
                                best = plane[at];
                                best_at = at;
                            }
                        }
                    }
                    let out_at = (plane_idx * oh + oy) * ow + ox;
                    out[out_at] = best;
                    argmax[out_at] = best_at as u32;
                }
            }
        }
        let rg = self.needs_grad(&[input]);
        Ok(self.push(
            Tensor::new(vec![n, c, oh, ow], out)?,
            rg,
            Op::MaxPool2d { input, argmax },
            None,
        ))
    }

    /// Mean over the spatial dimensions: [n,c,h,w] -> [n,c].
    pub fn global_avg_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let x_shape = self.shape_of(input).to_vec();
        if x_shape.len() != 4 {
            return Err(Error::shape(
                "global_avg_pool",
                "input [n,c,h,w]",
                shape_string(&x_shape),
            ));
        }
        let (n, c, h, w) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
        let area = E::from_usize(h * w).unwrap();
        let data = self.nodes[input.0].value.data();
        let mut out = vec![E::zero(); n * c];
        for (plane_idx, plane) in data.chunks_exact(h * w).enumerate() {
            let mut acc = E::zero();
            for &v in plane {
                acc = acc + v;
            }
            out[plane_idx] = acc / area;
        }
        let rg = self.needs_grad(&[input]);
        Ok(self.push(
            Tensor::new(vec![n, c], out)?,
            rg,
            Op::GlobalAvgPool { input },
            None,
        ))
    }

    /// Elementwise sum of two same-shape tensors (residual shortcut join).
    pub fn residual_add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape_of(a) != self.shape_of(b) {
            return Err(Error::shape(
                "residual_add",
                shape_string(self.shape_of(a)),
                shape_string(self.shape_of(b)),
            ));
        }
        let b_data = self.nodes[b.0].value.data();
        let value = Tensor::from_fn(self.shape_of(a).to_vec(), |i| {
            self.nodes[a.0].value.data()[i] + b_data[i]
        });
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(value, rg, Op::ResidualAdd { a, b }, None))
    }

    /// Collapse all non-batch dimensions: [n, ...] -> [n, prod(...)].
    pub fn flatten(&mut self, input: NodeId) -> Result<NodeId> {
        let x_shape = self.shape_of(input).to_vec();
        if x_shape.is_empty() {
            return Err(Error::shape("flatten", "rank >= 1", shape_string(&x_shape)));
        }
        let n = x_shape[0];
        let rest: usize = x_shape[1..].iter().product();
        let value = Tensor::new(
            vec![n, rest],
            self.nodes[input.0].value.data().to_vec(),
        )?;
        let rg = self.needs_grad(&[input]);
        Ok(self.push(value, rg, Op::Flatten { input }, None))
    }

    /// Mean categorical cross-entropy with a log-sum-exp-stabilized softmax.
    /// Returns a scalar node.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let shape = self.shape_of(logits).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape(
                "softmax_cross_entropy",
                "logits [n, classes]",
                shape_string(&shape),
            ));
        }
        let (n, classes) = (shape[0], shape[1]);
        if targets.len() != n {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{n} targets"),
                format!("{} targets", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::Data(format!(
                "cross-entropy target {bad} out of range for {classes} classes"
            )));
        }
        let data = self.nodes[logits.0].value.data();
        let mut probs = vec![E::zero(); n * classes];
        let mut total = E::zero();
        for (i, (row, prow)) in data
            .chunks_exact(classes)
            .zip(probs.chunks_exact_mut(classes))
            .enumerate()
        {
            let mut max = E::neg_infinity();
            for &v in row {
                if v > max {
                    max = v;
                }
            }
            let mut sum = E::zero();
            for (&v, p) in row.iter().zip(prow.iter_mut()) {
                let e = (v - max).exp();
                *p = e;
                sum = sum + e;
            }
            let lse = sum.ln() + max;
            for p in prow.iter_mut() {
                *p = *p / sum;
            }
            total = total + (lse - row[targets[i]]);
        }
        let loss = total / E::from_usize(n).unwrap();
        let rg = self.needs_grad(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
            Some(probs),
        ))
    }

    // ------------------------------------------------------------------
    // Backward
    // ------------------------------------------------------------------

    fn accumulate(&mut self, id: NodeId, contribution: &[E]) {
        let node = &mut self.nodes[id.0];
        match node.grad.as_mut() {
            Some(g) => {
                for (gi, &ci) in g.iter_mut().zip(contribution.iter()) {
                    *gi = *gi + ci;
                }
            }
            None => node.grad = Some(contribution.to_vec()),
        }
    }

    /// Reverse pass from a scalar loss node. Gradients accumulate additively
    /// across fan-out; tensors with `requires_grad == false` receive none.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.backward_done {
            return Err(Error::numeric("backward", "backward already run on this graph"));
        }
        self.backward_done = true;
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::shape(
                "backward",
                "scalar loss",
                shape_string(self.nodes[loss.0].value.shape()),
            ));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(()); // nothing trainable feeds the loss
        }
        self.nodes[loss.0].grad = Some(vec![E::one()]);

        for idx in (0..=loss.0).rev() {
            if self.nodes[idx].grad.is_none() || !self.nodes[idx].requires_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::Affine {
                    input,
                    weight,
                    bias,
                } => self.backward_affine(idx, input, weight, bias),
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    geo,
                } => self.backward_conv2d(idx, input, kernel, bias, &geo),
                Op::Relu { input } => {
                    if self.nodes[input.0].requires_grad {
                        let grad = self.nodes[idx].grad.as_ref().unwrap();
                        let x = self.nodes[input.0].value.data();
                        let contribution: Vec<E> = grad
                            .iter()
                            .zip(x.iter())
                            .map(|(&g, &v)| if v > E::zero() { g } else { E::zero() })
                            .collect();
                        self.accumulate(input, &contribution);
                    }
                }
                Op::MaxPool2d { input, argmax } => {
                    if self.nodes[input.0].requires_grad {
                        let shape = self.nodes[input.0].value.shape().to_vec();
                        let (h, w) = (shape[2], shape[3]);
                        let out_shape = self.nodes[idx].value.shape().to_vec();
                        let (oh, ow) = (out_shape[2], out_shape[3]);
                        let grad = self.nodes[idx].grad.as_ref().unwrap();
                        let mut contribution = vec![E::zero(); shape.iter().product()];
                        for plane_idx in 0..shape[0] * shape[1] {
                            let base_in = plane_idx * h * w;
                            let base_out = plane_idx * oh * ow;
                            for o in 0..oh * ow {
                                let at = base_in + argmax[base_out + o] as usize;
                                contribution[at] = contribution[at] + grad[base_out + o];
                            }
                        }
                        self.accumulate(input, &contribution);
                    }
                }
                Op::GlobalAvgPool { input } => {
                    if self.nodes[input.0].requires_grad {
                        let shape = self.nodes[input.0].value.shape().to_vec();
                        let area = shape[2] * shape[3];
                        let scale = E::one() / E::from_usize(area).unwrap();
                        let grad = self.nodes[idx].grad.as_ref().unwrap();
                        let mut contribution = vec![E::zero(); shape.iter().product()];
                        for (plane, &g) in contribution.chunks_exact_mut(area).zip(grad.iter()) {
                            let v = g * scale;
                            plane.fill(v);
                        }
                        self.accumulate(input, &contribution);
                    }
                }
                Op::ResidualAdd { a, b } => {
                    let grad = self.nodes[idx].grad.clone().unwrap();
                    if self.nodes[a.0].requires_grad {
                        self.accumulate(a, &grad);
                    }
                    if self.nodes[b.0].requires_grad {
                        self.accumulate(b, &grad);
                    }
                }
                Op::Flatten { input } => {
                    if self.nodes[input.0].requires_grad {
                        let grad = self.nodes[idx].grad.clone().unwrap();
                        self.accumulate(input, &grad);
                    }
                }
                Op::SoftmaxCrossEntropy { logits, targets } => {
                    if self.nodes[logits.0].requires_grad {
                        let upstream = self.nodes[idx].grad.as_ref().unwrap()[0];
                        let probs = self.nodes[idx].saved.as_ref().unwrap();
                        let classes = self.nodes[logits.0].value.shape()[1];
                        let inv_n = E::one() / E::from_usize(targets.len()).unwrap();
                        let mut contribution = probs.clone();
                        for (i, row) in contribution.chunks_exact_mut(classes).enumerate() {
                            row[targets[i]] = row[targets[i]] - E::one();
                            for v in row.iter_mut() {
                                *v = *v * inv_n * upstream;
                            }
                        }
                        self.accumulate(logits, &contribution);
                    }
                }
            }
        }
        Ok(())
    }

    fn backward_affine(&mut self, idx: usize, input: NodeId, weight: NodeId, bias: NodeId) {
        let grad = self.nodes[idx].grad.clone().unwrap();
        let x_shape = self.nodes[input.0].value.shape().to_vec();
        let (b, input_dim) = (x_shape[0], x_shape[1]);
        let out_dim = self.nodes[weight.0].value.shape()[0];

        if self.nodes[input.0].requires_grad {
            let mut dx = vec![E::zero(); b * input_dim];
            matmul_nn(
                b,
                out_dim,
                input_dim,
                &grad,
                self.nodes[weight.0].value.data(),
                &mut dx,
            );
            self.accumulate(input, &dx);
        }
        if self.nodes[weight.0].requires_grad {
            let mut dw = vec![E::zero(); out_dim * input_dim];
            matmul_tn(
                out_dim,
                b,
                input_dim,
                &grad,
                self.nodes[input.0].value.data(),
                &mut dw,
            );
            self.accumulate(weight, &dw);
        }
        if self.nodes[bias.0].requires_grad {
            let mut db = vec![E::zero(); out_dim];
            for row in grad.chunks_exact(out_dim) {
                for (d, &g) in db.iter_mut().zip(row.iter()) {
                    *d = *d + g;
                }
            }
            self.accumulate(bias, &db);
        }
    }

    fn backward_conv2d(
        &mut self,
        idx: usize,
        input: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
        geo: &ConvGeometry,
    ) {
        let grad = self.nodes[idx].grad.clone().unwrap();
        let n = self.nodes[input.0].value.shape()[0];
        let positions = geo.out_positions();
        let patch = geo.patch_len();
        let cout = self.nodes[kernel.0].value.shape()[0];
        let image_len = geo.cin * geo.h * geo.w;
        let out_image_len = cout * positions;

        if let Some(bias_id) = bias {
            if self.nodes[bias_id.0].requires_grad {
                let mut db = vec![E::zero(); cout];
                for out_image in grad.chunks_exact(out_image_len) {
                    for (c, plane) in out_image.chunks_exact(positions).enumerate() {
                        let mut acc = E::zero();
                        for &g in plane {
                            acc = acc + g;
                        }
                        db[c] = db[c] + acc;
                    }
                }
                self.accumulate(bias_id, &db);
            }
        }

        if self.nodes[kernel.0].requires_grad {
            let input_data = self.nodes[input.0].value.data();
            // one partial dK per fixed-size chunk, merged in chunk order
            let partials: Vec<Vec<E>> = input_data
                .par_chunks(CONV_CHUNK * image_len)
                .zip(grad.par_chunks(CONV_CHUNK * out_image_len))
                .map(|(images, grads)| {
                    let mut dk = vec![E::zero(); cout * patch];
                    let mut col = vec![E::zero(); patch * positions];
                    for (image, g) in images
                        .chunks_exact(image_len)
                        .zip(grads.chunks_exact(out_image_len))
                    {
                        im2col(geo, image, &mut col);
                        matmul_nt(cout, positions, patch, g, &col, &mut dk);
                    }
                    dk
                })
                .collect();
            let mut dk = vec![E::zero(); cout * patch];
            for partial in partials {
                for (d, p) in dk.iter_mut().zip(partial.iter()) {
                    *d = *d + *p;
                }
            }
            self.accumulate(kernel, &dk);
        }

        if self.nodes[input.0].requires_grad {
            let kernel_data = self.nodes[kernel.0].value.data();
            let mut dx = vec![E::zero(); n * image_len];
            dx.par_chunks_mut(image_len)
                .zip(grad.par_chunks(out_image_len))
                .for_each(|(dx_image, g)| {
                    let mut dcol = vec![E::zero(); patch * positions];
                    matmul_tn(patch, cout, positions, kernel_data, g, &mut dcol);
                    col2im_accumulate(geo, &dcol, dx_image);
                });
            self.accumulate(input, &dx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf64(g: &mut Graph<f64>, shape: Vec<usize>, data: Vec<f64>, grad: bool) -> NodeId {
        let mut t = Tensor::new(shape, data).unwrap();
        t.set_requires_grad(grad);
        g.leaf(t)
    }

    #[test]
    fn relu_forward_matches_definition() {
        let mut g = Graph::<f64>::new();
        let x = leaf64(&mut g, vec![3], vec![-1.0, 0.0, 2.0], false);
        let y = g.relu(x);
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_subgradient_at_definition_points() {
        let mut g = Graph::<f64>::new();
        let x = leaf64(&mut g, vec![1, 2], vec![-1.0, 2.0], true);
        let r = g.relu(x);
        let loss = g.softmax_cross_entropy(r, &[1]).unwrap();
        g.backward(loss).unwrap();
        let dx = g.grad(x).unwrap();
        assert_eq!(dx[0], 0.0, "negative input blocks gradient");
        assert!(dx[1] != 0.0, "positive input passes gradient");

        // d(relu)/dx at a positive point is exactly 1: upstream passes through
        let mut g = Graph::<f64>::new();
        let x = leaf64(&mut g, vec![1, 2], vec![2.0, 1.0], true);
        let r = g.relu(x);
        let loss = g.softmax_cross_entropy(r, &[0]).unwrap();
        g.backward(loss).unwrap();
        let dr_expected = {
            // softmax gradient for logits (2,1), target 0
            let p0 = (2.0f64).exp() / ((2.0f64).exp() + (1.0f64).exp());
            [p0 - 1.0, 1.0 - p0]
        };
        let dx = g.grad(x).unwrap();
        assert!((dx[0] - dr_expected[0]).abs() < 1e-12);
        assert!((dx[1] - dr_expected[1]).abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        for classes in [2usize, 5, 52] {
            let mut g = Graph::<f64>::new();
            let logits = leaf64(&mut g, vec![1, classes], vec![0.7; classes], true);
            let loss = g.softmax_cross_entropy(logits, &[0]).unwrap();
            let got = g.value(loss).data()[0];
            assert!(
                (got - (classes as f64).ln()).abs() < 1e-12,
                "classes={classes} loss={got}"
            );
        }
    }

    #[test]
    fn uniform_logits_gradient_is_softmax_minus_onehot() {
        let classes = 4;
        let mut g = Graph::<f64>::new();
        let logits = leaf64(&mut g, vec![1, classes], vec![0.0; classes], true);
        let loss = g.softmax_cross_entropy(logits, &[2]).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad(logits).unwrap();
        for (c, &gv) in grad.iter().enumerate() {
            let expect = if c == 2 { 0.25 - 1.0 } else { 0.25 };
            assert!((gv - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_stable_for_huge_logits() {
        let mut g = Graph::<f64>::new();
        let logits = leaf64(&mut g, vec![1, 3], vec![1e4, -1e4, 0.0], true);
        let loss = g.softmax_cross_entropy(logits, &[1]).unwrap();
        let v = g.value(loss).data()[0];
        assert!(v.is_finite());
        assert!(v > 0.0);
        g.backward(loss).unwrap();
        assert!(g.grad(logits).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cross_entropy_nonnegative_and_zero_only_in_one_hot_limit() {
        let mut g = Graph::<f64>::new();
        let logits = leaf64(&mut g, vec![1, 2], vec![30.0, -30.0], false);
        let loss = g.softmax_cross_entropy(logits, &[0]).unwrap();
        let v = g.value(loss).data()[0];
        assert!(v >= 0.0 && v < 1e-12);
        let mut g = Graph::<f64>::new();
        let logits = leaf64(&mut g, vec![1, 2], vec![1.0, 0.5], false);
        let loss = g.softmax_cross_entropy(logits, &[0]).unwrap();
        assert!(g.value(loss).data()[0] > 0.0);
    }

    #[test]
    fn conv_of_ones_sums_kernel_window() {
        let mut g = Graph::<f64>::new();
        let x = leaf64(&mut g, vec![1, 1, 3, 3], vec![1.0; 9], false);
        let k = leaf64(&mut g, vec![1, 1, 3, 3], vec![1.0; 9], false);
        let y = g.conv2d(x, k, None, 1, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 1, 1]);
        assert_eq!(g.value(y).data(), &[9.0]);
    }

    #[test]
    fn fanout_gradients_accumulate() {
        // y = x + x doubles the gradient
        let mut g = Graph::<f64>::new();
        let x = leaf64(&mut g, vec![1, 2], vec![0.3, -0.7], true);
        let y = g.residual_add(x, x).unwrap();
        let loss = g.softmax_cross_entropy(y, &[0]).unwrap();
        g.backward(loss).unwrap();
        let dx = g.grad(x).unwrap().to_vec();

        // same function, no fan-out: scale logits by 2 via x' = x + x-copy
        let mut g2 = Graph::<f64>::new();
        let x1 = leaf64(&mut g2, vec![1, 2], vec![0.3, -0.7], true);
        let x2 = leaf64(&mut g2, vec![1, 2], vec![0.3, -0.7], true);
        let y2 = g2.residual_add(x1, x2).unwrap();
        let loss2 = g2.softmax_cross_entropy(y2, &[0]).unwrap();
        g2.backward(loss2).unwrap();
        let d1 = g2.grad(x1).unwrap();
        let d2 = g2.grad(x2).unwrap();
        for i in 0..2 {
            assert!((dx[i] - (d1[i] + d2[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::<f64>::new();
        let x = leaf64(&mut g, vec![1, 2], vec![0.0, 1.0], true);
        let err = g.backward(x).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn frozen_leaves_receive_no_gradient() {
        let mut g = Graph::<f64>::new();
        let x = leaf64(&mut g, vec![1, 2], vec![0.1, 0.2], false);
        let w = leaf64(&mut g, vec![2, 2], vec![1.0, 0.0, 0.0, 1.0], true);
        let b = leaf64(&mut g, vec![2], vec![0.0, 0.0], true);
        let y = g.affine(x, w, b).unwrap();
        let loss = g.softmax_cross_entropy(y, &[1]).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(x).is_none());
        assert!(g.grad(w).is_some());
        assert!(g.grad(b).is_some());
    }

    #[test]
    fn shape_mismatch_error_names_op_and_shapes() {
        let mut g = Graph::<f64>::new();
        let a = leaf64(&mut g, vec![1, 2], vec![0.0; 2], false);
        let b = leaf64(&mut g, vec![1, 3], vec![0.0; 3], false);
        let err = g.residual_add(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("residual_add"));
        assert!(msg.contains("[1, 2]"));
        assert!(msg.contains("[1, 3]"));
    }

    #[test]
    fn max_pool_forward_and_backward_route_to_argmax() {
        let mut g = Graph::<f64>::new();
        let x = leaf64(
            &mut g,
            vec![1, 1, 2, 4],
            vec![1.0, 5.0, 0.0, 3.0, 3.0, 2.0, 4.0, 1.0],
            true,
        );
        let y = g.max_pool2d(x, 2, 2).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 1, 2]);
        assert_eq!(g.value(y).data(), &[5.0, 4.0]);
        let f = g.flatten(y).unwrap();
        let loss = g.softmax_cross_entropy(f, &[0]).unwrap();
        g.backward(loss).unwrap();
        let dx = g.grad(x).unwrap();
        // only the two argmax positions (index 1 and 6) carry gradient
        for (i, &v) in dx.iter().enumerate() {
            if i == 1 || i == 6 {
                assert!(v != 0.0, "argmax position {i} must carry gradient");
            } else {
                assert_eq!(v, 0.0, "non-argmax position {i} must be zero");
            }
        }
    }
}
