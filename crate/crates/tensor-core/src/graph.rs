//! Reverse-mode autodiff over a tape of tensor operations.
//!
//! Nodes are appended in execution order, so the tape index order is a
//! topological order and `backward` is a single reverse sweep. A graph is
//! built per forward pass, confined to one thread, and dropped after the
//! optimizer step. `backward` resets all gradients before the sweep;
//! repeated calls never accumulate.

use crate::conv;
use crate::error::TensorError;
use crate::tensor::{Element, Tensor};
use crate::Result;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d {
        input: TensorId,
        weight: TensorId,
        bias: TensorId,
        pad: usize,
    },
    Relu(TensorId),
    Sigmoid(TensorId),
    Add(TensorId, TensorId),
    ScaleChannels {
        input: TensorId,
        scale: TensorId,
    },
    ConcatChannels(Vec<TensorId>),
    GlobalAvgPool(TensorId),
    Reshape(TensorId),
    MseLoss {
        pred: TensorId,
        target: TensorId,
    },
    TemplateMix {
        coeffs: TensorId,
        templates: Vec<TensorId>,
    },
}

struct Node<T: Element> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    op: Op,
}

/// Computation tape. All operations append a node and return its id.
pub struct Graph<T: Element> {
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op) -> TensorId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    /// Registers an input or parameter tensor.
    pub fn leaf(&mut self, value: Tensor<T>) -> TensorId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: TensorId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` call, `None` before any call.
    pub fn grad(&self, id: TensorId) -> Option<&[T]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Same-size zero-padded convolution. `weight` is `[Cout,Cin,S,S]` with
    /// S odd and `pad` must equal `(S-1)/2`.
    pub fn conv2d(
        &mut self,
        input: TensorId,
        weight: TensorId,
        bias: TensorId,
        pad: usize,
    ) -> Result<TensorId> {
        let (_, cin, h, w) = self.value(input).dims4("conv2d")?;
        let (cout, wc, s, s2) = self.value(weight).dims4("conv2d")?;
        if s != s2 {
            return Err(TensorError::shape(
                "conv2d",
                format!("kernel must be square, got {s}x{s2}"),
            ));
        }
        if s % 2 == 0 {
            return Err(TensorError::arg(
                "conv2d",
                format!("kernel size must be odd, got {s}"),
            ));
        }
        if pad != (s - 1) / 2 {
            return Err(TensorError::arg(
                "conv2d",
                format!("pad must be (S-1)/2 = {}, got {pad}", (s - 1) / 2),
            ));
        }
        if wc != cin {
            return Err(TensorError::shape(
                "conv2d",
                format!("weight expects {wc} input channels (dim 1), input has {cin}"),
            ));
        }
        if self.value(bias).shape() != [cout] {
            return Err(TensorError::shape(
                "conv2d",
                format!(
                    "bias shape {:?} does not match {cout} output channels",
                    self.value(bias).shape()
                ),
            ));
        }
        let _ = (h, w);
        let value = conv::forward(self.value(input), self.value(weight), self.value(bias), pad);
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                weight,
                bias,
                pad,
            },
        ))
    }

    pub fn relu(&mut self, input: TensorId) -> TensorId {
        let v = self.value(input);
        let data = v.data().iter().map(|x| x.max(T::zero())).collect();
        let value = Tensor::new(v.shape().to_vec(), data).unwrap();
        self.push(value, Op::Relu(input))
    }

    pub fn sigmoid(&mut self, input: TensorId) -> TensorId {
        let v = self.value(input);
        let one = T::one();
        let data = v.data().iter().map(|x| one / (one + (-*x).exp())).collect();
        let value = Tensor::new(v.shape().to_vec(), data).unwrap();
        self.push(value, Op::Sigmoid(input))
    }

    /// Elementwise sum of two tensors of identical shape.
    pub fn add(&mut self, lhs: TensorId, rhs: TensorId) -> Result<TensorId> {
        if self.value(lhs).shape() != self.value(rhs).shape() {
            return Err(TensorError::shape(
                "add",
                format!(
                    "operand shapes differ: {:?} vs {:?}",
                    self.value(lhs).shape(),
                    self.value(rhs).shape()
                ),
            ));
        }
        let data = self
            .value(lhs)
            .data()
            .iter()
            .zip(self.value(rhs).data())
            .map(|(a, b)| *a + *b)
            .collect();
        let value = Tensor::new(self.value(lhs).shape().to_vec(), data).unwrap();
        Ok(self.push(value, Op::Add(lhs, rhs)))
    }

    /// Multiplies every `[h,w]` plane of `input` by the matching `scale[b,c]`.
    pub fn scale_channels(&mut self, input: TensorId, scale: TensorId) -> Result<TensorId> {
        let (b, c, h, w) = self.value(input).dims4("scale_channels")?;
        let (sb, sc) = self.value(scale).dims2("scale_channels")?;
        if (sb, sc) != (b, c) {
            return Err(TensorError::shape(
                "scale_channels",
                format!("scale shape [{sb}, {sc}] does not match input [{b}, {c}, ..]"),
            ));
        }
        let plane = h * w;
        let mut data = self.value(input).data().to_vec();
        for bc in 0..b * c {
            let s = self.value(scale).data()[bc];
            for x in &mut data[bc * plane..(bc + 1) * plane] {
                *x *= s;
            }
        }
        let value = Tensor::new(vec![b, c, h, w], data).unwrap();
        Ok(self.push(value, Op::ScaleChannels { input, scale }))
    }

    /// Concatenates rank-4 tensors along the channel axis, preserving
    /// operand order.
    pub fn concat_channels(&mut self, inputs: &[TensorId]) -> Result<TensorId> {
        if inputs.is_empty() {
            return Err(TensorError::arg("concat_channels", "empty input list"));
        }
        let (b, _, h, w) = self.value(inputs[0]).dims4("concat_channels")?;
        let mut total_c = 0;
        for &id in inputs {
            let (ib, ic, ih, iw) = self.value(id).dims4("concat_channels")?;
            if (ib, ih, iw) != (b, h, w) {
                return Err(TensorError::shape(
                    "concat_channels",
                    format!(
                        "operand shape {:?} incompatible with [{b}, _, {h}, {w}]",
                        self.value(id).shape()
                    ),
                ));
            }
            total_c += ic;
        }
        let plane = h * w;
        let mut data = vec![T::zero(); b * total_c * plane];
        for bi in 0..b {
            let mut c_off = 0;
            for &id in inputs {
                let ic = self.value(id).shape()[1];
                let src = &self.value(id).data()[bi * ic * plane..(bi + 1) * ic * plane];
                data[(bi * total_c + c_off) * plane..][..ic * plane].copy_from_slice(src);
                c_off += ic;
            }
        }
        let value = Tensor::new(vec![b, total_c, h, w], data).unwrap();
        Ok(self.push(value, Op::ConcatChannels(inputs.to_vec())))
    }

    /// Spatial mean per channel: `[B,C,H,W] -> [B,C]`.
    pub fn global_avg_pool(&mut self, input: TensorId) -> Result<TensorId> {
        let (b, c, h, w) = self.value(input).dims4("global_avg_pool")?;
        let plane = h * w;
        let inv = T::from_f64(1.0 / plane as f64);
        let mut data = vec![T::zero(); b * c];
        for (bc, out) in data.iter_mut().enumerate() {
            let mut acc = T::zero();
            for x in &self.value(input).data()[bc * plane..(bc + 1) * plane] {
                acc += *x;
            }
            *out = acc * inv;
        }
        let value = Tensor::new(vec![b, c], data).unwrap();
        Ok(self.push(value, Op::GlobalAvgPool(input)))
    }

    /// Reinterprets the data in a new shape with the same element count.
    pub fn reshape(&mut self, input: TensorId, shape: Vec<usize>) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.value(input).numel() {
            return Err(TensorError::shape(
                "reshape",
                format!(
                    "cannot reshape {:?} ({} elements) to {:?} ({} elements)",
                    self.value(input).shape(),
                    self.value(input).numel(),
                    shape,
                    numel
                ),
            ));
        }
        let value = Tensor::new(shape, self.value(input).data().to_vec()).unwrap();
        Ok(self.push(value, Op::Reshape(input)))
    }

    /// Mean of squared differences over all elements; returns a scalar.
    pub fn mse_loss(&mut self, pred: TensorId, target: TensorId) -> Result<TensorId> {
        if self.value(pred).shape() != self.value(target).shape() {
            return Err(TensorError::shape(
                "mse_loss",
                format!(
                    "prediction shape {:?} does not match target shape {:?}",
                    self.value(pred).shape(),
                    self.value(target).shape()
                ),
            ));
        }
        let n = self.value(pred).numel();
        let mut acc = T::zero();
        for (p, t) in self.value(pred).data().iter().zip(self.value(target).data()) {
            let d = *p - *t;
            acc += d * d;
        }
        let value = Tensor::scalar(acc * T::from_f64(1.0 / n as f64));
        Ok(self.push(value, Op::MseLoss { pred, target }))
    }

    /// Weight generation by template mixing: `W = sum_j coeffs[j] * templates[j]`.
    /// Differentiable in both the coefficients and every template; a template
    /// referenced by several layers accumulates gradient from each of them.
    pub fn template_mix(&mut self, coeffs: TensorId, templates: &[TensorId]) -> Result<TensorId> {
        if templates.is_empty() {
            return Err(TensorError::arg("template_mix", "empty template list"));
        }
        let k = match self.value(coeffs).shape() {
            [k] => *k,
            other => {
                return Err(TensorError::shape(
                    "template_mix",
                    format!("coefficients must be rank 1, got shape {other:?}"),
                ))
            }
        };
        if k != templates.len() {
            return Err(TensorError::shape(
                "template_mix",
                format!("{k} coefficients but {} templates", templates.len()),
            ));
        }
        let shape = self.value(templates[0]).shape().to_vec();
        for &t in templates {
            if self.value(t).shape() != shape {
                return Err(TensorError::shape(
                    "template_mix",
                    format!(
                        "template shape {:?} differs from {:?}",
                        self.value(t).shape(),
                        shape
                    ),
                ));
            }
        }
        let mut data = vec![T::zero(); self.value(templates[0]).numel()];
        for (j, &t) in templates.iter().enumerate() {
            let a = self.value(coeffs).data()[j];
            for (d, x) in data.iter_mut().zip(self.value(t).data()) {
                *d += a * *x;
            }
        }
        let value = Tensor::new(shape, data).unwrap();
        Ok(self.push(
            value,
            Op::TemplateMix {
                coeffs,
                templates: templates.to_vec(),
            },
        ))
    }

    /// Backpropagates from a scalar loss. Every node's gradient is reset to
    /// zero first, the loss is seeded with one, and the tape is swept once
    /// in reverse. Leaves not on a path to the loss end up with zero
    /// gradients.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 || !self.nodes[loss.0].value.shape().is_empty() {
            return Err(TensorError::NonScalarLoss(
                self.nodes[loss.0].value.shape().to_vec(),
            ));
        }

        let mut grads: Vec<Vec<T>> = self
            .nodes
            .iter()
            .map(|n| vec![T::zero(); n.value.numel()])
            .collect();
        grads[loss.0][0] = T::one();

        for idx in (0..=loss.0).rev() {
            // Inputs always precede idx on the tape, so moving the output
            // gradient out makes the input slots freely borrowable.
            let gout = std::mem::take(&mut grads[idx]);
            self.backprop_node(idx, &gout, &mut grads);
            grads[idx] = gout;
        }

        for (node, grad) in self.nodes.iter_mut().zip(grads) {
            node.grad = Some(grad);
        }
        Ok(())
    }

    fn backprop_node(&self, idx: usize, gout: &[T], grads: &mut [Vec<T>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                pad,
            } => {
                conv::backward_input(
                    gout,
                    self.value(*weight),
                    self.value(*input).shape(),
                    *pad,
                    &mut grads[input.0],
                );
                // Weight and bias grads may alias the same slot only if the
                // caller passed the same id twice, which shape checks forbid.
                let (gw, gb) = if weight.0 < bias.0 {
                    let (a, b) = grads.split_at_mut(bias.0);
                    (&mut a[weight.0], &mut b[0])
                } else {
                    let (a, b) = grads.split_at_mut(weight.0);
                    (&mut b[0], &mut a[bias.0])
                };
                conv::backward_weight_bias(
                    gout,
                    self.value(*input),
                    self.value(*weight).shape(),
                    *pad,
                    gw,
                    gb,
                );
            }
            Op::Relu(input) => {
                let x = self.value(*input).data();
                let gin = &mut grads[input.0];
                for i in 0..gout.len() {
                    if x[i] > T::zero() {
                        gin[i] += gout[i];
                    }
                }
            }
            Op::Sigmoid(input) => {
                let y = self.nodes[idx].value.data();
                let gin = &mut grads[input.0];
                for i in 0..gout.len() {
                    gin[i] += gout[i] * y[i] * (T::one() - y[i]);
                }
            }
            Op::Add(lhs, rhs) => {
                for (g, go) in grads[lhs.0].iter_mut().zip(gout) {
                    *g += *go;
                }
                for (g, go) in grads[rhs.0].iter_mut().zip(gout) {
                    *g += *go;
                }
            }
            Op::ScaleChannels { input, scale } => {
                let (b, c, h, w) = self.value(*input).dims4("scale_channels").unwrap();
                let plane = h * w;
                let x = self.value(*input).data();
                let s = self.value(*scale).data();
                {
                    let gin = &mut grads[input.0];
                    for bc in 0..b * c {
                        let sv = s[bc];
                        for (g, go) in gin[bc * plane..(bc + 1) * plane]
                            .iter_mut()
                            .zip(&gout[bc * plane..(bc + 1) * plane])
                        {
                            *g += *go * sv;
                        }
                    }
                }
                {
                    let gscale = &mut grads[scale.0];
                    for bc in 0..b * c {
                        let mut acc = T::zero();
                        for (xv, go) in x[bc * plane..(bc + 1) * plane]
                            .iter()
                            .zip(&gout[bc * plane..(bc + 1) * plane])
                        {
                            acc += *xv * *go;
                        }
                        gscale[bc] += acc;
                    }
                }
            }
            Op::ConcatChannels(inputs) => {
                let out_shape = self.nodes[idx].value.shape();
                let (b, total_c, h, w) = (out_shape[0], out_shape[1], out_shape[2], out_shape[3]);
                let plane = h * w;
                for bi in 0..b {
                    let mut c_off = 0;
                    for &id in inputs {
                        let ic = self.value(id).shape()[1];
                        let src = &gout[(bi * total_c + c_off) * plane..][..ic * plane];
                        let dst = &mut grads[id.0][bi * ic * plane..(bi + 1) * ic * plane];
                        for (g, go) in dst.iter_mut().zip(src) {
                            *g += *go;
                        }
                        c_off += ic;
                    }
                }
            }
            Op::GlobalAvgPool(input) => {
                let (b, c, h, w) = self.value(*input).dims4("global_avg_pool").unwrap();
                let plane = h * w;
                let inv = T::from_f64(1.0 / plane as f64);
                let gin = &mut grads[input.0];
                for bc in 0..b * c {
                    let g = gout[bc] * inv;
                    for gi in &mut gin[bc * plane..(bc + 1) * plane] {
                        *gi += g;
                    }
                }
            }
            Op::Reshape(input) => {
                for (g, go) in grads[input.0].iter_mut().zip(gout) {
                    *g += *go;
                }
            }
            Op::MseLoss { pred, target } => {
                let n = self.value(*pred).numel();
                let scale = gout[0] * T::from_f64(2.0 / n as f64);
                let p = self.value(*pred).data();
                let t = self.value(*target).data();
                {
                    let gp = &mut grads[pred.0];
                    for i in 0..n {
                        gp[i] += scale * (p[i] - t[i]);
                    }
                }
                {
                    let gt = &mut grads[target.0];
                    for i in 0..n {
                        gt[i] -= scale * (p[i] - t[i]);
                    }
                }
            }
            Op::TemplateMix { coeffs, templates } => {
                let a = self.value(*coeffs).data();
                for (j, &t) in templates.iter().enumerate() {
                    // d/d coeff_j = <gout, template_j>
                    let mut acc = T::zero();
                    for (go, tv) in gout.iter().zip(self.value(t).data()) {
                        acc += *go * *tv;
                    }
                    grads[coeffs.0][j] += acc;
                    // d/d template_j = coeff_j * gout
                    let gt = &mut grads[t.0];
                    for (g, go) in gt.iter_mut().zip(gout) {
                        *g += a[j] * *go;
                    }
                }
            }
        }
    }
}
