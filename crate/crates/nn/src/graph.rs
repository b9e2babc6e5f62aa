use std::sync::Arc;

use crate::kernels as k;
use crate::kernels::ConvSpec;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// Differentiable operations. Every linear op appears together with its
/// exact adjoint, and every vjp below is expressed in terms of these same
/// ops, so gradients of gradients (the gradient-penalty path) need no
/// special casing.
#[derive(Debug, Clone)]
enum Op<S: Scalar> {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, S),
    Recip(NodeId),
    Sqrt(NodeId),
    Exp(NodeId),
    Abs(NodeId),
    Sign(NodeId),
    Elu(NodeId),
    EluPrime(NodeId),
    EluCurve(NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    SumTo(NodeId),
    BroadcastTo(NodeId),
    Reshape(NodeId),
    Conv { x: NodeId, w: NodeId, spec: ConvSpec },
    ConvGradData { gy: NodeId, w: NodeId, spec: ConvSpec },
    ConvGradWeight { x: NodeId, gy: NodeId, spec: ConvSpec },
    PadMirror { x: NodeId, pad: usize },
    PadMirrorAdj { x: NodeId, pad: usize },
    PadZero { x: NodeId, pad: usize },
    CropCenter { x: NodeId, pad: usize },
    CropSpatial { x: NodeId, r0: usize, c0: usize },
    EmbedSpatial { x: NodeId, r0: usize, c0: usize },
    UpBilinear { x: NodeId, factor: usize },
    UpBilinearAdj { x: NodeId, factor: usize },
    Im2col { x: NodeId, k: usize, spec: ConvSpec },
    Col2im { x: NodeId, k: usize, spec: ConvSpec },
    SliceDim0 { x: NodeId, b0: usize },
    EmbedDim0 { x: NodeId, b0: usize },
    SliceCh { x: NodeId, c0: usize },
    EmbedCh { x: NodeId, c0: usize },
    GatherCols { x: NodeId, indices: Arc<Vec<usize>> },
    ScatterCols { x: NodeId, indices: Arc<Vec<usize>> },
}

struct Node<S: Scalar> {
    op: Op<S>,
    value: Tensor<S>,
    needs_grad: bool,
}

/// Eagerly evaluated computation tape.
pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].value.shape
    }

    /// Debug-only op label of a node.
    pub fn op_name(&self, id: NodeId) -> String {
        format!("{:?}", self.nodes[id.0].op)
            .split(['(', '{', ' '])
            .next()
            .unwrap_or("?")
            .to_string()
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Inserts a tensor; `trainable` marks it as a differentiation target.
    pub fn leaf(&mut self, value: Tensor<S>, trainable: bool) -> NodeId {
        self.push(Op::Leaf, value, trainable)
    }

    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.leaf(value, false)
    }

    /// Copies a node's value into a fresh constant leaf, cutting the tape.
    pub fn detach(&mut self, id: NodeId) -> NodeId {
        let value = self.nodes[id.0].value.clone();
        self.constant(value)
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "add")?;
        let value = self.zip(a, b, |x, y| x + y);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), value, ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "sub")?;
        let value = self.zip(a, b, |x, y| x - y);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Sub(a, b), value, ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "mul")?;
        let value = self.zip(a, b, |x, y| x * y);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Mul(a, b), value, ng))
    }

    /// Single-pass fused elementwise combination of two same-shape nodes.
    fn zip(&self, a: NodeId, b: NodeId, f: impl Fn(S, S) -> S) -> Tensor<S> {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut out = Tensor::uninit(&av.shape);
        for i in 0..out.data.len() {
            out.data[i] = f(av.data[i], bv.data[i]);
        }
        out
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|v| -v);
        let ng = self.needs(a);
        self.push(Op::Neg(a), value, ng)
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> NodeId {
        let value = self.nodes[a.0].value.map(|v| v * c);
        let ng = self.needs(a);
        self.push(Op::Scale(a, c), value, ng)
    }

    pub fn recip(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|v| S::ONE / v);
        let ng = self.needs(a);
        self.push(Op::Recip(a), value, ng)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(Scalar::sqrt);
        let ng = self.needs(a);
        self.push(Op::Sqrt(a), value, ng)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(Scalar::exp);
        let ng = self.needs(a);
        self.push(Op::Exp(a), value, ng)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(Scalar::abs);
        let ng = self.needs(a);
        self.push(Op::Abs(a), value, ng)
    }

    pub fn sign(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|v| {
            if v > S::ZERO {
                S::ONE
            } else if v < S::ZERO {
                -S::ONE
            } else {
                S::ZERO
            }
        });
        self.push(Op::Sign(a), value, false)
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|v| {
            if v > S::ZERO {
                v
            } else {
                v.exp() - S::ONE
            }
        });
        let ng = self.needs(a);
        self.push(Op::Elu(a), value, ng)
    }

    fn elu_prime(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|v| if v > S::ZERO { S::ONE } else { v.exp() });
        let ng = self.needs(a);
        self.push(Op::EluPrime(a), value, ng)
    }

    fn elu_curve(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.map(|v| if v > S::ZERO { S::ZERO } else { v.exp() });
        let ng = self.needs(a);
        self.push(Op::EluCurve(a), value, ng)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (_, ka) = self.nodes[a.0].value.dims2();
        let (kb, _) = self.nodes[b.0].value.dims2();
        if ka != kb {
            return Err(NnError::Shape(format!("matmul inner dims {ka} vs {kb}")));
        }
        let value = k::matmul(&self.nodes[a.0].value, &self.nodes[b.0].value);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul(a, b), value, ng))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = k::transpose2d(&self.nodes[a.0].value);
        let ng = self.needs(a);
        self.push(Op::Transpose(a), value, ng)
    }

    pub fn sum_to(&mut self, a: NodeId, target: &[usize]) -> Result<NodeId> {
        if target.len() != self.shape(a).len()
            || self.shape(a).iter().zip(target).any(|(s, t)| s != t && *t != 1)
        {
            return Err(NnError::Shape(format!("sum_to {:?} -> {target:?}", self.shape(a))));
        }
        let value = k::sum_to(&self.nodes[a.0].value, target);
        let ng = self.needs(a);
        Ok(self.push(Op::SumTo(a), value, ng))
    }

    pub fn broadcast_to(&mut self, a: NodeId, target: &[usize]) -> Result<NodeId> {
        if target.len() != self.shape(a).len()
            || self.shape(a).iter().zip(target).any(|(s, t)| s != t && *s != 1)
        {
            return Err(NnError::Shape(format!("broadcast {:?} -> {target:?}", self.shape(a))));
        }
        let value = k::broadcast_to(&self.nodes[a.0].value, target);
        let ng = self.needs(a);
        Ok(self.push(Op::BroadcastTo(a), value, ng))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        if shape.iter().product::<usize>() != self.nodes[a.0].value.numel() {
            return Err(NnError::Shape(format!(
                "reshape {:?} -> {shape:?}",
                self.shape(a)
            )));
        }
        let mut value = self.nodes[a.0].value.clone();
        value.shape = shape.to_vec();
        let ng = self.needs(a);
        Ok(self.push(Op::Reshape(a), value, ng))
    }

    /// Valid (unpadded) convolution.
    pub fn conv(&mut self, x: NodeId, w: NodeId, spec: ConvSpec) -> Result<NodeId> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(NnError::Shape(format!("conv x {xs:?} w {ws:?}")));
        }
        let span_h = spec.dilation * (ws[2] - 1) + 1;
        let span_w = spec.dilation * (ws[3] - 1) + 1;
        if xs[2] < span_h || xs[3] < span_w {
            return Err(NnError::Shape(format!(
                "conv input {xs:?} smaller than kernel span {span_h}x{span_w}"
            )));
        }
        let value = k::conv_forward(&self.nodes[x.0].value, &self.nodes[w.0].value, spec);
        let ng = self.needs(x) || self.needs(w);
        Ok(self.push(Op::Conv { x, w, spec }, value, ng))
    }

    fn conv_grad_data(
        &mut self,
        gy: NodeId,
        w: NodeId,
        spec: ConvSpec,
        in_hw: (usize, usize),
    ) -> NodeId {
        let value = k::conv_grad_data(&self.nodes[gy.0].value, &self.nodes[w.0].value, spec, in_hw);
        let ng = self.needs(gy) || self.needs(w);
        self.push(Op::ConvGradData { gy, w, spec }, value, ng)
    }

    fn conv_grad_weight(
        &mut self,
        x: NodeId,
        gy: NodeId,
        spec: ConvSpec,
        k_hw: (usize, usize),
    ) -> NodeId {
        let value = k::conv_grad_weight(&self.nodes[x.0].value, &self.nodes[gy.0].value, spec, k_hw);
        let ng = self.needs(x) || self.needs(gy);
        self.push(Op::ConvGradWeight { x, gy, spec }, value, ng)
    }

    pub fn pad_mirror(&mut self, x: NodeId, pad: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 4 || pad >= s[2] || pad >= s[3] {
            return Err(NnError::Shape(format!("pad_mirror {pad} on {s:?}")));
        }
        if pad == 0 {
            return Ok(x);
        }
        let value = k::pad_mirror(&self.nodes[x.0].value, pad);
        let ng = self.needs(x);
        Ok(self.push(Op::PadMirror { x, pad }, value, ng))
    }

    fn pad_mirror_adj(&mut self, x: NodeId, pad: usize) -> NodeId {
        let value = k::pad_mirror_adjoint(&self.nodes[x.0].value, pad);
        let ng = self.needs(x);
        self.push(Op::PadMirrorAdj { x, pad }, value, ng)
    }

    pub fn pad_zero(&mut self, x: NodeId, pad: usize) -> Result<NodeId> {
        if self.shape(x).len() != 4 {
            return Err(NnError::Shape("pad_zero expects rank 4".into()));
        }
        if pad == 0 {
            return Ok(x);
        }
        let value = k::pad_zero(&self.nodes[x.0].value, pad);
        let ng = self.needs(x);
        Ok(self.push(Op::PadZero { x, pad }, value, ng))
    }

    fn crop_center(&mut self, x: NodeId, pad: usize) -> NodeId {
        let value = k::crop_center(&self.nodes[x.0].value, pad);
        let ng = self.needs(x);
        self.push(Op::CropCenter { x, pad }, value, ng)
    }

    pub fn crop_spatial(
        &mut self,
        x: NodeId,
        r0: usize,
        c0: usize,
        h: usize,
        w: usize,
    ) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 4 || r0 + h > s[2] || c0 + w > s[3] {
            return Err(NnError::Shape(format!("crop ({r0},{c0},{h},{w}) on {s:?}")));
        }
        let value = k::crop_spatial(&self.nodes[x.0].value, r0, c0, h, w);
        let ng = self.needs(x);
        Ok(self.push(Op::CropSpatial { x, r0, c0 }, value, ng))
    }

    pub fn embed_spatial(
        &mut self,
        x: NodeId,
        r0: usize,
        c0: usize,
        out_h: usize,
        out_w: usize,
    ) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 4 || r0 + s[2] > out_h || c0 + s[3] > out_w {
            return Err(NnError::Shape(format!("embed ({r0},{c0}) into {out_h}x{out_w}")));
        }
        let value = k::embed_spatial(&self.nodes[x.0].value, r0, c0, out_h, out_w);
        let ng = self.needs(x);
        Ok(self.push(Op::EmbedSpatial { x, r0, c0 }, value, ng))
    }

    pub fn upsample_bilinear(&mut self, x: NodeId, factor: usize) -> Result<NodeId> {
        if self.shape(x).len() != 4 || !(factor == 2 || factor == 4) {
            return Err(NnError::Shape(format!("upsample factor {factor} on {:?}", self.shape(x))));
        }
        let value = k::upsample_bilinear(&self.nodes[x.0].value, factor);
        let ng = self.needs(x);
        Ok(self.push(Op::UpBilinear { x, factor }, value, ng))
    }

    fn upsample_bilinear_adj(&mut self, x: NodeId, factor: usize) -> NodeId {
        let value = k::upsample_bilinear_adjoint(&self.nodes[x.0].value, factor);
        let ng = self.needs(x);
        self.push(Op::UpBilinearAdj { x, factor }, value, ng)
    }

    pub fn im2col(&mut self, x: NodeId, kernel: usize, spec: ConvSpec) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 4 {
            return Err(NnError::Shape("im2col expects rank 4".into()));
        }
        let value = k::im2col_op(&self.nodes[x.0].value, kernel, spec);
        let ng = self.needs(x);
        Ok(self.push(Op::Im2col { x, k: kernel, spec }, value, ng))
    }

    pub fn col2im(
        &mut self,
        x: NodeId,
        kernel: usize,
        spec: ConvSpec,
        channels: usize,
        out_hw: (usize, usize),
    ) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 3 || s[1] != channels * kernel * kernel {
            return Err(NnError::Shape(format!("col2im on {s:?}")));
        }
        let value = k::col2im_op(&self.nodes[x.0].value, kernel, spec, channels, out_hw);
        let ng = self.needs(x);
        Ok(self.push(Op::Col2im { x, k: kernel, spec }, value, ng))
    }

    pub fn slice_dim0(&mut self, x: NodeId, b0: usize, len: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if b0 + len > s[0] {
            return Err(NnError::Shape(format!("slice_dim0 {b0}+{len} on {s:?}")));
        }
        let value = k::slice_dim0(&self.nodes[x.0].value, b0, len);
        let ng = self.needs(x);
        Ok(self.push(Op::SliceDim0 { x, b0 }, value, ng))
    }

    pub fn embed_dim0(&mut self, x: NodeId, b0: usize, total: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if b0 + s[0] > total {
            return Err(NnError::Shape(format!("embed_dim0 {b0} on {s:?} into {total}")));
        }
        let value = k::embed_dim0(&self.nodes[x.0].value, b0, total);
        let ng = self.needs(x);
        Ok(self.push(Op::EmbedDim0 { x, b0 }, value, ng))
    }

    pub fn slice_ch(&mut self, x: NodeId, c0: usize, len: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 4 || c0 + len > s[1] {
            return Err(NnError::Shape(format!("slice_ch {c0}+{len} on {s:?}")));
        }
        let value = k::slice_ch(&self.nodes[x.0].value, c0, len);
        let ng = self.needs(x);
        Ok(self.push(Op::SliceCh { x, c0 }, value, ng))
    }

    pub fn embed_ch(&mut self, x: NodeId, c0: usize, total: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 4 || c0 + s[1] > total {
            return Err(NnError::Shape(format!("embed_ch {c0} on {s:?} into {total}")));
        }
        let value = k::embed_ch(&self.nodes[x.0].value, c0, total);
        let ng = self.needs(x);
        Ok(self.push(Op::EmbedCh { x, c0 }, value, ng))
    }

    pub fn gather_cols(&mut self, x: NodeId, indices: Arc<Vec<usize>>) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 2 || indices.iter().any(|&i| i >= s[1]) {
            return Err(NnError::Shape(format!("gather_cols on {s:?}")));
        }
        let value = k::gather_cols(&self.nodes[x.0].value, &indices);
        let ng = self.needs(x);
        Ok(self.push(Op::GatherCols { x, indices }, value, ng))
    }

    pub fn scatter_cols(&mut self, x: NodeId, indices: Arc<Vec<usize>>, n: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 2 || s[1] != indices.len() || indices.iter().any(|&i| i >= n) {
            return Err(NnError::Shape(format!("scatter_cols on {s:?}")));
        }
        let value = k::scatter_cols(&self.nodes[x.0].value, &indices, n);
        let ng = self.needs(x);
        Ok(self.push(Op::ScatterCols { x, indices }, value, ng))
    }

    // ---- composite helpers ----

    /// Sum of all entries as a [1] tensor.
    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        let ones = vec![1usize; self.shape(a).len()];
        let s = self.sum_to(a, &ones)?;
        self.reshape(s, &[1])
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.nodes[a.0].value.numel();
        let s = self.sum_all(a)?;
        Ok(self.scale(s, S::from_f64(1.0 / n as f64)))
    }

    /// Mean of |a| as a [1] tensor.
    pub fn mean_abs(&mut self, a: NodeId) -> Result<NodeId> {
        let abs = self.abs(a);
        self.mean_all(abs)
    }

    /// Same-padding convolution with mirror padding.
    pub fn conv2d_same(
        &mut self,
        x: NodeId,
        w: NodeId,
        stride: usize,
        dilation: usize,
    ) -> Result<NodeId> {
        let ws = self.shape(w);
        if ws.len() != 4 || ws[2] % 2 == 0 || ws[3] % 2 == 0 {
            return Err(NnError::Shape(format!("same-conv kernel must be odd, got {ws:?}")));
        }
        let pad = dilation * (ws[2] - 1) / 2;
        let padded = self.pad_mirror(x, pad)?;
        self.conv(padded, w, ConvSpec { stride, dilation })
    }

    /// Strided decimation by `factor` (down_stride resampling).
    pub fn downsample_stride(&mut self, x: NodeId, factor: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 4 || !(factor == 2 || factor == 4) {
            return Err(NnError::Shape(format!("downsample factor {factor}")));
        }
        if s[2] % factor != 0 || s[3] % factor != 0 {
            return Err(NnError::Shape(format!(
                "downsample factor {factor} does not divide {}x{}",
                s[2], s[3]
            )));
        }
        let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
        let col = self.im2col(x, 1, ConvSpec { stride: factor, dilation: 1 })?;
        self.reshape(col, &[b, c, h / factor, w / factor])
    }

    // ---- differentiation ----

    /// Reverse-mode gradients of a scalar `output` w.r.t. `wrt`. Gradient
    /// nodes are appended to the graph and can be differentiated again.
    pub fn backward(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        if self.nodes[output.0].value.numel() != 1 {
            return Err(NnError::Shape(format!(
                "backward needs a scalar output, got {:?}",
                self.shape(output)
            )));
        }

        // Active nodes: reachable from the output and carrying gradient.
        let horizon = output.0 + 1;
        let mut reachable = vec![false; horizon];
        reachable[output.0] = true;
        for i in (0..horizon).rev() {
            if !reachable[i] {
                continue;
            }
            for p in self.parents(i) {
                if p.0 < horizon {
                    reachable[p.0] = true;
                }
            }
        }
        let active: Vec<bool> =
            (0..horizon).map(|i| reachable[i] && self.nodes[i].needs_grad).collect();

        let mut grads: Vec<Option<NodeId>> = vec![None; horizon];
        let seed = self.constant(Tensor::filled(&[1], S::ONE));
        grads[output.0] = Some(seed);

        for i in (0..horizon).rev() {
            let Some(g) = grads[i] else { continue };
            if !reachable[i] {
                continue;
            }
            let contribs = self.vjp(i, g, &active)?;
            for (parent, contrib) in contribs {
                grads[parent.0] = Some(match grads[parent.0] {
                    Some(acc) => self.add(acc, contrib)?,
                    None => contrib,
                });
            }
        }

        wrt.iter()
            .map(|&id| {
                Ok(match grads.get(id.0).copied().flatten() {
                    Some(g) => g,
                    None => {
                        let zeros = Tensor::zeros(self.shape(id));
                        self.constant(zeros)
                    }
                })
            })
            .collect()
    }

    fn parents(&self, i: usize) -> Vec<NodeId> {
        match &self.nodes[i].op {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::Recip(a)
            | Op::Sqrt(a)
            | Op::Exp(a)
            | Op::Abs(a)
            | Op::Sign(a)
            | Op::Elu(a)
            | Op::EluPrime(a)
            | Op::EluCurve(a)
            | Op::Transpose(a)
            | Op::SumTo(a)
            | Op::BroadcastTo(a)
            | Op::Reshape(a) => vec![*a],
            Op::Conv { x, w, .. } => vec![*x, *w],
            Op::ConvGradData { gy, w, .. } => vec![*gy, *w],
            Op::ConvGradWeight { x, gy, .. } => vec![*x, *gy],
            Op::PadMirror { x, .. }
            | Op::PadMirrorAdj { x, .. }
            | Op::PadZero { x, .. }
            | Op::CropCenter { x, .. }
            | Op::CropSpatial { x, .. }
            | Op::EmbedSpatial { x, .. }
            | Op::UpBilinear { x, .. }
            | Op::UpBilinearAdj { x, .. }
            | Op::Im2col { x, .. }
            | Op::Col2im { x, .. }
            | Op::SliceDim0 { x, .. }
            | Op::EmbedDim0 { x, .. }
            | Op::SliceCh { x, .. }
            | Op::EmbedCh { x, .. }
            | Op::GatherCols { x, .. }
            | Op::ScatterCols { x, .. } => vec![*x],
        }
    }

    /// Gradient contributions of node `i` to its active parents.
    fn vjp(&mut self, i: usize, g: NodeId, active: &[bool]) -> Result<Vec<(NodeId, NodeId)>> {
        let is_active = |id: NodeId, active: &[bool]| id.0 < active.len() && active[id.0];
        let mut out = Vec::with_capacity(2);
        let op = self.nodes[i].op.clone();
        let this = NodeId(i);
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if is_active(a, active) {
                    out.push((a, g));
                }
                if is_active(b, active) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if is_active(a, active) {
                    out.push((a, g));
                }
                if is_active(b, active) {
                    out.push((b, self.neg(g)));
                }
            }
            Op::Mul(a, b) => {
                if is_active(a, active) {
                    out.push((a, self.mul(g, b)?));
                }
                if is_active(b, active) {
                    out.push((b, self.mul(g, a)?));
                }
            }
            Op::Neg(a) => {
                if is_active(a, active) {
                    out.push((a, self.neg(g)));
                }
            }
            Op::Scale(a, c) => {
                if is_active(a, active) {
                    out.push((a, self.scale(g, c)));
                }
            }
            Op::Recip(a) => {
                if is_active(a, active) {
                    // d(1/x) = −y² dx with y = 1/x.
                    let y2 = self.mul(this, this)?;
                    let gy = self.mul(g, y2)?;
                    out.push((a, self.neg(gy)));
                }
            }
            Op::Sqrt(a) => {
                if is_active(a, active) {
                    // d(√x) = dx / (2√x).
                    let inv = self.recip(this);
                    let half = self.scale(inv, S::from_f64(0.5));
                    out.push((a, self.mul(g, half)?));
                }
            }
            Op::Exp(a) => {
                if is_active(a, active) {
                    out.push((a, self.mul(g, this)?));
                }
            }
            Op::Abs(a) => {
                if is_active(a, active) {
                    let s = self.sign(a);
                    out.push((a, self.mul(g, s)?));
                }
            }
            Op::Sign(_) => {}
            Op::Elu(a) => {
                if is_active(a, active) {
                    let d = self.elu_prime(a);
                    out.push((a, self.mul(g, d)?));
                }
            }
            Op::EluPrime(a) => {
                if is_active(a, active) {
                    let d = self.elu_curve(a);
                    out.push((a, self.mul(g, d)?));
                }
            }
            Op::EluCurve(a) => {
                if is_active(a, active) {
                    // For x < 0 the curvature is its own derivative; for
                    // x > 0 everything is zero.
                    let d = self.elu_curve(a);
                    out.push((a, self.mul(g, d)?));
                }
            }
            Op::MatMul(a, b) => {
                if is_active(a, active) {
                    let bt = self.transpose(b);
                    out.push((a, self.matmul(g, bt)?));
                }
                if is_active(b, active) {
                    let at = self.transpose(a);
                    out.push((b, self.matmul(at, g)?));
                }
            }
            Op::Transpose(a) => {
                if is_active(a, active) {
                    out.push((a, self.transpose(g)));
                }
            }
            Op::SumTo(a) => {
                if is_active(a, active) {
                    let target = self.shape(a).to_vec();
                    out.push((a, self.broadcast_to(g, &target)?));
                }
            }
            Op::BroadcastTo(a) => {
                if is_active(a, active) {
                    let target = self.shape(a).to_vec();
                    out.push((a, self.sum_to(g, &target)?));
                }
            }
            Op::Reshape(a) => {
                if is_active(a, active) {
                    let target = self.shape(a).to_vec();
                    out.push((a, self.reshape(g, &target)?));
                }
            }
            Op::Conv { x, w, spec } => {
                if is_active(x, active) {
                    let in_hw = (self.shape(x)[2], self.shape(x)[3]);
                    out.push((x, self.conv_grad_data(g, w, spec, in_hw)));
                }
                if is_active(w, active) {
                    let k_hw = (self.shape(w)[2], self.shape(w)[3]);
                    out.push((w, self.conv_grad_weight(x, g, spec, k_hw)));
                }
            }
            Op::ConvGradData { gy, w, spec } => {
                if is_active(gy, active) {
                    out.push((gy, self.conv(g, w, spec)?));
                }
                if is_active(w, active) {
                    let k_hw = (self.shape(w)[2], self.shape(w)[3]);
                    out.push((w, self.conv_grad_weight(g, gy, spec, k_hw)));
                }
            }
            Op::ConvGradWeight { x, gy, spec } => {
                if is_active(x, active) {
                    let in_hw = (self.shape(x)[2], self.shape(x)[3]);
                    out.push((x, self.conv_grad_data(gy, g, spec, in_hw)));
                }
                if is_active(gy, active) {
                    out.push((gy, self.conv(x, g, spec)?));
                }
            }
            Op::PadMirror { x, pad } => {
                if is_active(x, active) {
                    out.push((x, self.pad_mirror_adj(g, pad)));
                }
            }
            Op::PadMirrorAdj { x, pad } => {
                if is_active(x, active) {
                    out.push((x, self.pad_mirror(g, pad)?));
                }
            }
            Op::PadZero { x, pad } => {
                if is_active(x, active) {
                    out.push((x, self.crop_center(g, pad)));
                }
            }
            Op::CropCenter { x, pad } => {
                if is_active(x, active) {
                    out.push((x, self.pad_zero(g, pad)?));
                }
            }
            Op::CropSpatial { x, r0, c0 } => {
                if is_active(x, active) {
                    let (oh, ow) = (self.shape(x)[2], self.shape(x)[3]);
                    out.push((x, self.embed_spatial(g, r0, c0, oh, ow)?));
                }
            }
            Op::EmbedSpatial { x, r0, c0 } => {
                if is_active(x, active) {
                    let (h, w) = (self.shape(x)[2], self.shape(x)[3]);
                    out.push((x, self.crop_spatial(g, r0, c0, h, w)?));
                }
            }
            Op::UpBilinear { x, factor } => {
                if is_active(x, active) {
                    out.push((x, self.upsample_bilinear_adj(g, factor)));
                }
            }
            Op::UpBilinearAdj { x, factor } => {
                if is_active(x, active) {
                    out.push((x, self.upsample_bilinear(g, factor)?));
                }
            }
            Op::Im2col { x, k, spec } => {
                if is_active(x, active) {
                    let channels = self.shape(x)[1];
                    let out_hw = (self.shape(x)[2], self.shape(x)[3]);
                    out.push((x, self.col2im(g, k, spec, channels, out_hw)?));
                }
            }
            Op::Col2im { x, k, spec } => {
                if is_active(x, active) {
                    out.push((x, self.im2col(g, k, spec)?));
                }
            }
            Op::SliceDim0 { x, b0 } => {
                if is_active(x, active) {
                    let total = self.shape(x)[0];
                    out.push((x, self.embed_dim0(g, b0, total)?));
                }
            }
            Op::EmbedDim0 { x, b0 } => {
                if is_active(x, active) {
                    let len = self.shape(x)[0];
                    out.push((x, self.slice_dim0(g, b0, len)?));
                }
            }
            Op::SliceCh { x, c0 } => {
                if is_active(x, active) {
                    let total = self.shape(x)[1];
                    out.push((x, self.embed_ch(g, c0, total)?));
                }
            }
            Op::EmbedCh { x, c0 } => {
                if is_active(x, active) {
                    let len = self.shape(x)[1];
                    out.push((x, self.slice_ch(g, c0, len)?));
                }
            }
            Op::GatherCols { x, indices } => {
                if is_active(x, active) {
                    let n = self.shape(x)[1];
                    out.push((x, self.scatter_cols(g, indices, n)?));
                }
            }
            Op::ScatterCols { x, indices } => {
                if is_active(x, active) {
                    out.push((x, self.gather_cols(g, indices)?));
                }
            }
        }
        Ok(out)
    }
}
