use std::sync::Arc;

use crate::graph::{Graph, NodeId};
use crate::kernels::{col2im_op, ConvSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionSpec {
    pub patch_size: usize,
    /// Stride of candidate-patch extraction from the known region.
    pub stride: usize,
    pub softmax_temp: f64,
}

impl Default for AttentionSpec {
    fn default() -> Self {
        Self { patch_size: 3, stride: 1, softmax_temp: 10.0 }
    }
}

/// Contextual attention: copies feature patches from the known region into
/// missing locations, weighted by a softmax over cosine similarities.
///
/// `mask_feat` is the binary mask at feature resolution (1 = missing). The
/// known region passes through unchanged; for every location the known
/// patches are compared against the local feature patch, and missing
/// features are rebuilt as the attention-weighted overlap-average of the
/// matched patches.
pub fn contextual_attention<S: Scalar>(
    g: &mut Graph<S>,
    features: NodeId,
    mask_feat: &[u8],
    spec: &AttentionSpec,
) -> Result<NodeId> {
    let shape = g.shape(features).to_vec();
    if shape.len() != 4 {
        return Err(NnError::Shape("attention expects [B, C, h, w] features".into()));
    }
    let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    if mask_feat.len() != h * w {
        return Err(NnError::Shape(format!(
            "mask length {} does not match feature plane {h}x{w}",
            mask_feat.len()
        )));
    }
    let k = spec.patch_size;
    if k % 2 == 0 || k > h.min(w) {
        return Err(NnError::Shape(format!("patch size {k} invalid for {h}x{w}")));
    }
    let pad = (k - 1) / 2;

    // Candidate patches: stride-grid centers whose full window is known.
    let mut known_idx = Vec::new();
    for r in (0..h).step_by(spec.stride) {
        for cc in (0..w).step_by(spec.stride) {
            if r < pad || r + pad >= h || cc < pad || cc + pad >= w {
                continue;
            }
            let mut all_known = true;
            'win: for dr in 0..k {
                for dc in 0..k {
                    if mask_feat[(r + dr - pad) * w + (cc + dc - pad)] == 1 {
                        all_known = false;
                        break 'win;
                    }
                }
            }
            if all_known {
                known_idx.push(r * w + cc);
            }
        }
    }
    if known_idx.is_empty() {
        return Err(NnError::Attention(
            "no fully-known candidate patches for contextual attention".into(),
        ));
    }
    let known_idx = Arc::new(known_idx);

    // Constant planes shared by every batch element.
    let known_plane: Vec<f64> =
        mask_feat.iter().map(|&m| if m == 0 { 1.0 } else { 0.0 }).collect();
    let missing_plane: Vec<f64> =
        mask_feat.iter().map(|&m| if m == 1 { 1.0 } else { 0.0 }).collect();
    let known_const = g.constant(Tensor::from_f64_slice(&[1, 1, h, w], &known_plane));
    let missing_const = g.constant(Tensor::from_f64_slice(&[1, 1, h, w], &missing_plane));

    // Overlap counts of the stride-1 patch layout, for averaging col2im.
    let ones_col = Tensor::filled(&[1, k * k, h * w], S::ONE);
    let counts = col2im_op(&ones_col, k, ConvSpec { stride: 1, dilation: 1 }, 1, (h + 2 * pad, w + 2 * pad));
    let counts = crate::kernels::crop_center(&counts, pad);
    let inv_counts = counts.map(|v| S::ONE / v);
    let inv_counts = g.constant(inv_counts);

    let eps = g.constant(Tensor::filled(&[1, 1], S::from_f64(1e-12)));
    let unit = ConvSpec { stride: 1, dilation: 1 };

    let mut result: Option<NodeId> = None;
    for bi in 0..b {
        let f = g.slice_dim0(features, bi, 1)?;
        let padded = g.pad_zero(f, pad)?;
        let cols4 = g.im2col(padded, k, unit)?;
        let cols = g.reshape(cols4, &[c * k * k, h * w])?;

        let patches = g.gather_cols(cols, known_idx.clone())?;
        let patches_hat = normalize_columns(g, patches, eps)?;
        let queries_hat = normalize_columns(g, cols, eps)?;

        let pt = g.transpose(patches_hat);
        let sims = g.matmul(pt, queries_hat)?;
        let scaled = g.scale(sims, S::from_f64(spec.softmax_temp));
        let e = g.exp(scaled);
        let denom = g.sum_to(e, &[1, h * w])?;
        let dinv = g.recip(denom);
        let dbc = g.broadcast_to(dinv, &[known_idx.len(), h * w])?;
        let att = g.mul(e, dbc)?;

        let recon_cols = g.matmul(patches, att)?;
        let recon4 = g.reshape(recon_cols, &[1, c * k * k, h * w])?;
        let recon_pad = g.col2im(recon4, k, unit, c, (h + 2 * pad, w + 2 * pad))?;
        let recon_full = crop(g, recon_pad, pad)?;
        let invc = g.broadcast_to(inv_counts, &[1, c, h, w])?;
        let recon = g.mul(recon_full, invc)?;

        let keep = g.broadcast_to(known_const, &[1, c, h, w])?;
        let fill = g.broadcast_to(missing_const, &[1, c, h, w])?;
        let kept = g.mul(f, keep)?;
        let filled = g.mul(recon, fill)?;
        let combined = g.add(kept, filled)?;

        let embedded = g.embed_dim0(combined, bi, b)?;
        result = Some(match result {
            Some(acc) => g.add(acc, embedded)?,
            None => embedded,
        });
    }
    Ok(result.expect("batch is non-empty"))
}

/// Divides each column of a [m, n] tensor by its L2 norm (plus epsilon).
fn normalize_columns<S: Scalar>(g: &mut Graph<S>, x: NodeId, eps: NodeId) -> Result<NodeId> {
    let shape = g.shape(x).to_vec();
    let sq = g.mul(x, x)?;
    let colsum = g.sum_to(sq, &[1, shape[1]])?;
    let eps_b = g.broadcast_to(eps, &[1, shape[1]])?;
    let safe = g.add(colsum, eps_b)?;
    let norm = g.sqrt(safe);
    let inv = g.recip(norm);
    let inv_b = g.broadcast_to(inv, &shape)?;
    g.mul(x, inv_b)
}

fn crop<S: Scalar>(g: &mut Graph<S>, x: NodeId, pad: usize) -> Result<NodeId> {
    if pad == 0 {
        return Ok(x);
    }
    let s = g.shape(x).to_vec();
    g.crop_spatial(x, pad, pad, s[2] - 2 * pad, s[3] - 2 * pad)
}
