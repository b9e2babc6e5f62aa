use field_core::Mask;
use nn::{contextual_attention, AttentionSpec, Graph, NodeId, Scalar, Tensor};
use tasks::LocalPatchSet;

use crate::config::TrainConfig;
use crate::params::GeneratorLayout;
use crate::{GanError, Result};

/// Network inputs for one batch: the masked field plus the mask channel,
/// all in normalized units.
pub struct BatchInput<S: Scalar> {
    /// [B, 3, H, W] masked field.
    pub masked: Tensor<S>,
    /// [B, 1, H, W] binary mask, 1 = missing.
    pub mask: Tensor<S>,
    pub masks: Vec<Mask>,
}

impl<S: Scalar> BatchInput<S> {
    pub fn dims(&self) -> (usize, usize, usize) {
        let (b, _, h, w) = self.masked.dims4();
        (b, h, w)
    }
}

fn elu_conv<S: Scalar>(
    g: &mut Graph<S>,
    x: NodeId,
    w: NodeId,
    stride: usize,
    dilation: usize,
) -> Result<NodeId> {
    let y = g.conv2d_same(x, w, stride, dilation)?;
    Ok(g.elu(y))
}

/// Concatenates the field channels with the mask channel into [B, 4, H, W].
pub fn concat_mask_channel<S: Scalar>(
    g: &mut Graph<S>,
    field: NodeId,
    mask: NodeId,
) -> Result<NodeId> {
    let s = g.shape(field).to_vec();
    let f4 = g.embed_ch(field, 0, 4)?;
    let mb = g.broadcast_to(mask, &[s[0], 1, s[2], s[3]])?;
    let m4 = g.embed_ch(mb, 3, 4)?;
    Ok(g.add(f4, m4)?)
}

/// Coarse generator: encode to quarter resolution, dilated convolutions for
/// field of view, decode with bilinear upsampling. Output is a full 3-channel
/// plane with a linear final layer.
pub fn generator_coarse<S: Scalar>(
    g: &mut Graph<S>,
    config: &TrainConfig,
    params: &[NodeId],
    layout: &GeneratorLayout,
    input4: NodeId,
) -> Result<NodeId> {
    let p = |i: usize| params[layout.coarse[i]];
    let mut idx = 0;
    let mut next = || {
        let v = idx;
        idx += 1;
        v
    };

    let x = elu_conv(g, input4, p(next()), 2, 1)?; // stem, half res
    let x = elu_conv(g, x, p(next()), 1, 1)?;
    let x = elu_conv(g, x, p(next()), 2, 1)?; // quarter res
    let mut x = elu_conv(g, x, p(next()), 1, 1)?;
    for &rate in &config.dilation_rates {
        x = elu_conv(g, x, p(next()), 1, rate)?;
    }
    let x = elu_conv(g, x, p(next()), 1, 1)?;
    let x = g.upsample_bilinear(x, 2)?;
    let x = elu_conv(g, x, p(next()), 1, 1)?;
    let x = elu_conv(g, x, p(next()), 1, 1)?;
    let x = g.upsample_bilinear(x, 2)?;
    Ok(g.conv2d_same(x, p(next()), 1, 1)?)
}

/// Fine generator: a dilated conv branch and a contextual-attention branch
/// at quarter resolution, concatenated and decoded. When the mask leaves no
/// fully-known candidate patch (dense point-wise outpainting), the attention
/// branch passes its features through unchanged.
pub fn generator_fine<S: Scalar>(
    g: &mut Graph<S>,
    config: &TrainConfig,
    params: &[NodeId],
    layout: &GeneratorLayout,
    input4: NodeId,
    mask_quarter: &[Vec<u8>],
) -> Result<NodeId> {
    // Conv branch.
    let cp = |i: usize| params[layout.fine_conv[i]];
    let mut x = elu_conv(g, input4, cp(0), 2, 1)?; // stem, half res
    x = elu_conv(g, x, cp(1), 1, 1)?;
    x = elu_conv(g, x, cp(2), 2, 1)?; // quarter res
    for (i, &rate) in config.dilation_rates.iter().enumerate() {
        x = elu_conv(g, x, cp(3 + i), 1, rate)?;
    }
    let conv_feat = x;

    // Attention branch, applied per sample since masks differ in a batch.
    let ap = |i: usize| params[layout.fine_attn[i]];
    let mut a = elu_conv(g, input4, ap(0), 2, 1)?;
    a = elu_conv(g, a, ap(1), 2, 1)?;
    let spec = AttentionSpec {
        patch_size: 3,
        stride: config.attention_stride,
        softmax_temp: 10.0,
    };
    let b = g.shape(a)[0];
    if mask_quarter.len() != b {
        return Err(GanError::Shape(format!(
            "{} quarter masks for batch of {b}",
            mask_quarter.len()
        )));
    }
    let mut attended: Option<NodeId> = None;
    for bi in 0..b {
        let sample = g.slice_dim0(a, bi, 1)?;
        let att = match contextual_attention(g, sample, &mask_quarter[bi], &spec) {
            Ok(node) => node,
            // No usable background patches (e.g. 1-pixel outpaint regions
            // at quarter resolution): the branch degrades to its features.
            Err(nn::NnError::Attention(_)) => sample,
            Err(e) => return Err(GanError::Nn(e)),
        };
        let embedded = g.embed_dim0(att, bi, b)?;
        attended = Some(match attended {
            Some(acc) => g.add(acc, embedded)?,
            None => embedded,
        });
    }
    let attended = attended.expect("non-empty batch");
    let attn_feat = elu_conv(g, attended, ap(2), 1, 1)?;

    // Merge and decode.
    let cshape = g.shape(conv_feat).to_vec();
    let channels = cshape[1];
    let left = g.embed_ch(conv_feat, 0, 2 * channels)?;
    let right = g.embed_ch(attn_feat, channels, 2 * channels)?;
    let merged = g.add(left, right)?;

    let mp = |i: usize| params[layout.fine_merge[i]];
    let x = elu_conv(g, merged, mp(0), 1, 1)?;
    let x = g.upsample_bilinear(x, 2)?;
    let x = elu_conv(g, x, mp(1), 1, 1)?;
    let x = elu_conv(g, x, mp(2), 1, 1)?;
    let x = g.upsample_bilinear(x, 2)?;
    Ok(g.conv2d_same(x, mp(3), 1, 1)?)
}

/// Two-stage residual-style generation: the coarse result composed over the
/// input feeds the fine stage. Returns (coarse, fine) full planes.
pub fn generate<S: Scalar>(
    g: &mut Graph<S>,
    config: &TrainConfig,
    params: &[NodeId],
    layout: &GeneratorLayout,
    masked: NodeId,
    mask: NodeId,
    mask_quarter: &[Vec<u8>],
) -> Result<(NodeId, NodeId)> {
    let shape = g.shape(masked).to_vec();
    if shape[2] % 4 != 0 || shape[3] % 4 != 0 {
        return Err(GanError::Shape(format!(
            "generator needs H, W divisible by 4, got {}x{}",
            shape[2], shape[3]
        )));
    }
    let input4 = concat_mask_channel(g, masked, mask)?;
    let coarse = generator_coarse(g, config, params, layout, input4)?;

    // B_coarse ⊙ m + B_in ⊙ (1 − m)
    let mask3 = g.broadcast_to(mask, &[shape[0], 3, shape[2], shape[3]])?;
    let coarse_missing = g.mul(coarse, mask3)?;
    let composed_coarse = g.add(masked, coarse_missing)?;

    let fine_input = concat_mask_channel(g, composed_coarse, mask)?;
    let fine = generator_fine(g, config, params, layout, fine_input, mask_quarter)?;
    Ok((coarse, fine))
}

/// Composition in graph space: `input + fine ⊙ m`.
pub fn compose_on_graph<S: Scalar>(
    g: &mut Graph<S>,
    masked: NodeId,
    fine: NodeId,
    mask: NodeId,
) -> Result<NodeId> {
    let shape = g.shape(masked).to_vec();
    let mask3 = g.broadcast_to(mask, &[shape[0], 3, shape[2], shape[3]])?;
    let missing = g.mul(fine, mask3)?;
    Ok(g.add(masked, missing)?)
}

fn critic_stack<S: Scalar>(
    g: &mut Graph<S>,
    params: &[NodeId],
    layers: &[usize],
    input3: NodeId,
) -> Result<NodeId> {
    let mut x = input3;
    for &layer in &layers[..layers.len() - 1] {
        // Strided layers apply only while the input supports the mirror
        // padding of their 5x5 kernels; tiny local patches pool early.
        let s = g.shape(x);
        let pad = (g.shape(params[layer])[2] - 1) / 2;
        if s[2] <= pad || s[3] <= pad {
            break;
        }
        x = elu_conv(g, x, params[layer], 2, 1)?;
    }
    // Head: global mean pool, channel alignment, 1x1 projection to a scalar.
    let head = params[*layers.last().expect("critic stack has a head")];
    let head_in = g.shape(head)[1];
    let s = g.shape(x).to_vec();
    let pooled = g.sum_to(x, &[s[0], s[1], 1, 1])?;
    let mut pooled = g.scale(pooled, S::from_f64(1.0 / (s[2] * s[3]) as f64));
    if s[1] < head_in {
        pooled = g.embed_ch(pooled, 0, head_in)?;
    }
    Ok(g.conv(pooled, head, nn::ConvSpec { stride: 1, dilation: 1 })?)
}

/// Global critic score per batch element, [B, 1, 1, 1].
pub fn critic_global<S: Scalar>(
    g: &mut Graph<S>,
    params: &[NodeId],
    global_layers: &[usize],
    plane: NodeId,
) -> Result<NodeId> {
    critic_stack(g, params, global_layers, plane)
}

/// Local critic: one score per patch, averaged per sample, [B, 1, 1, 1].
pub fn critic_local<S: Scalar>(
    g: &mut Graph<S>,
    params: &[NodeId],
    local_layers: &[usize],
    plane: NodeId,
    patches: &[LocalPatchSet],
) -> Result<NodeId> {
    let shape = g.shape(plane).to_vec();
    let b = shape[0];
    if patches.len() != b {
        return Err(GanError::Shape(format!(
            "{} patch sets for batch of {b}",
            patches.len()
        )));
    }
    let mut out: Option<NodeId> = None;
    for (bi, set) in patches.iter().enumerate() {
        if set.rects.is_empty() {
            return Err(GanError::Shape("empty local patch set".into()));
        }
        let sample = g.slice_dim0(plane, bi, 1)?;
        let mut acc: Option<NodeId> = None;
        for rect in &set.rects {
            let crop = g.crop_spatial(sample, rect.row0, rect.col0, rect.height, rect.width)?;
            let score = critic_stack(g, params, local_layers, crop)?;
            acc = Some(match acc {
                Some(a) => g.add(a, score)?,
                None => score,
            });
        }
        let mean = g.scale(acc.expect("at least one patch"), S::from_f64(1.0 / set.rects.len() as f64));
        let embedded = g.embed_dim0(mean, bi, b)?;
        out = Some(match out {
            Some(a) => g.add(a, embedded)?,
            None => embedded,
        });
    }
    Ok(out.expect("non-empty batch"))
}

/// Combined critic output: global score plus mean local score, [B, 1, 1, 1].
pub fn critic_scores<S: Scalar>(
    g: &mut Graph<S>,
    params: &[NodeId],
    global_layers: &[usize],
    local_layers: &[usize],
    plane: NodeId,
    patches: &[LocalPatchSet],
) -> Result<NodeId> {
    let global = critic_global(g, params, global_layers, plane)?;
    let local = critic_local(g, params, local_layers, plane, patches)?;
    Ok(g.add(global, local)?)
}

/// Downsamples a mask to quarter resolution; a quarter-res pixel counts as
/// missing when any pixel of its 4x4 block is missing.
pub fn mask_quarter_res(mask: &Mask) -> Vec<u8> {
    let (h, w) = (mask.h() / 4, mask.w() / 4);
    let mut out = vec![0u8; h * w];
    for r in 0..h {
        for c in 0..w {
            'block: for dr in 0..4 {
                for dc in 0..4 {
                    if mask.get(r * 4 + dr, c * 4 + dc) == 1 {
                        out[r * w + c] = 1;
                        break 'block;
                    }
                }
            }
        }
    }
    out
}
