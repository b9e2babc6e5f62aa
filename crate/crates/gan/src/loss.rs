use nn::{ConvSpec, Graph, NodeId, Scalar, Tensor};
use rand::Rng;

use crate::config::GpMode;
use crate::{GanError, Result};

/// Mean over the batch of a [B, 1, 1, 1] score tensor, as a [1] scalar node.
pub fn batch_mean<S: Scalar>(g: &mut Graph<S>, scores: NodeId) -> Result<NodeId> {
    Ok(g.mean_all(scores)?)
}

/// Critic objective: `E[D(fake)] − E[D(real)] + λ_GP · penalty`. Minimizing
/// it maximizes the Wasserstein estimate `E[D(real)] − E[D(fake)]`.
pub fn critic_loss<S: Scalar>(
    g: &mut Graph<S>,
    scores_real: NodeId,
    scores_fake: NodeId,
    gp_term: Option<NodeId>,
    lambda_gp: f64,
) -> Result<NodeId> {
    let mean_real = batch_mean(g, scores_real)?;
    let mean_fake = batch_mean(g, scores_fake)?;
    let mut loss = g.sub(mean_fake, mean_real)?;
    if let Some(gp) = gp_term {
        let scaled = g.scale(gp, S::from_f64(lambda_gp));
        loss = g.add(loss, scaled)?;
    }
    Ok(loss)
}

/// The WGAN-GP gradient penalty `E[(‖∇_x̂ D(x̂)‖₂ − 1)²]` on per-sample
/// interpolates `x̂ = u·real + (1−u)·fake`. The critic is any graph
/// function mapping a [B, 3, H, W] plane to [B, 1, 1, 1] scores.
///
/// `double_backward` differentiates the critic's input gradient exactly;
/// `pair_difference` measures the finite slope between the interpolate and a
/// nearby second point displaced along the detached input gradient, giving a
/// first-order surrogate of the same quantity.
pub fn gradient_penalty<S: Scalar>(
    g: &mut Graph<S>,
    mode: GpMode,
    critic_fn: &dyn Fn(&mut Graph<S>, NodeId) -> Result<NodeId>,
    real: &Tensor<S>,
    fake: &Tensor<S>,
    rng: &mut impl Rng,
) -> Result<NodeId> {
    if real.shape != fake.shape {
        return Err(GanError::Shape(format!(
            "gradient penalty shapes {:?} vs {:?}",
            real.shape, fake.shape
        )));
    }
    let (b, c, h, w) = real.dims4();
    let per = c * h * w;

    // Per-sample interpolation factor.
    let mut interp = Tensor::zeros(&real.shape);
    for bi in 0..b {
        let u = S::from_f64(rng.random_range(0.0..1.0));
        for i in 0..per {
            let idx = bi * per + i;
            interp.data[idx] = u * real.data[idx] + (S::ONE - u) * fake.data[idx];
        }
    }

    match mode {
        GpMode::DoubleBackward => {
            let x_hat = g.leaf(interp, true);
            let scores = critic_fn(g, x_hat)?;
            let total = g.sum_all(scores)?;
            // Scores are separable per sample, so the gradient of the sum is
            // the stack of per-sample input gradients.
            let grad = g.backward(total, &[x_hat])?[0];
            let grad_sq = g.mul(grad, grad)?;
            let per_sample = g.sum_to(grad_sq, &[b, 1, 1, 1])?;
            // Tiny epsilon keeps sqrt differentiable at exactly zero
            // gradient without disturbing the penalty value.
            let eps = g.constant(Tensor::filled(&[b, 1, 1, 1], S::from_f64(1e-24)));
            let safe = g.add(per_sample, eps)?;
            let norm_node = g.sqrt(safe);
            let ones = g.constant(Tensor::filled(&[b, 1, 1, 1], S::ONE));
            let diff = g.sub(norm_node, ones)?;
            let sq = g.mul(diff, diff)?;
            Ok(g.mean_all(sq)?)
        }
        GpMode::PairDifference => {
            // Direction: detached input gradient of the critic at x̂. The
            // probe's scores double as D(x̂₁); they already carry the
            // parameter-gradient path.
            let probe = g.leaf(interp.clone(), true);
            let s1 = critic_fn(g, probe)?;
            let total = g.sum_all(s1)?;
            let grad_node = g.backward(total, &[probe])?[0];
            let grad = g.value(grad_node).clone();

            // Data scale sets the probe radius.
            let data_scale = real
                .data
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.to_f64().abs()))
                .max(1e-6);
            let radius = 1e-3 * data_scale;

            let mut second = interp.clone();
            for bi in 0..b {
                let slice = &grad.data[bi * per..(bi + 1) * per];
                let mut norm = slice.iter().fold(0.0, |acc, v| acc + v.to_f64() * v.to_f64());
                norm = norm.sqrt();
                if norm < 1e-30 {
                    // Zero-distance pair: resample a random direction.
                    let dir: Vec<f64> = (0..per).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
                    for i in 0..per {
                        second.data[bi * per + i] += S::from_f64(dir[i] / dn * radius);
                    }
                } else {
                    for i in 0..per {
                        let d = slice[i].to_f64() / norm * radius;
                        second.data[bi * per + i] += S::from_f64(d);
                    }
                }
            }

            let x2 = g.constant(second);
            let s2 = critic_fn(g, x2)?;
            let diff = g.sub(s2, s1)?;
            let slope = g.scale(diff, S::from_f64(1.0 / radius));
            let slope_abs = g.abs(slope);
            let ones = g.constant(Tensor::filled(&[b, 1, 1, 1], S::ONE));
            let dev = g.sub(slope_abs, ones)?;
            let sq = g.mul(dev, dev)?;
            Ok(g.mean_all(sq)?)
        }
    }
}

/// In-plane x-derivative with second-order one-sided stencils at the edges,
/// on a [B, 1, H, W] plane in pixel units.
pub fn d_dx<S: Scalar>(g: &mut Graph<S>, plane: NodeId) -> Result<NodeId> {
    let s = g.shape(plane).to_vec();
    let (b, _, h, w) = (s[0], s[1], s[2], s[3]);
    let kernel = g.constant(Tensor::from_f64_slice(&[1, 1, 1, 3], &[-0.5, 0.0, 0.5]));
    let interior = g.conv(plane, kernel, ConvSpec { stride: 1, dilation: 1 })?;
    let interior = g.embed_spatial(interior, 0, 1, h, w)?;

    // Left edge: (−3f0 + 4f1 − f2) / 2; right edge mirrored.
    let f0 = g.crop_spatial(plane, 0, 0, h, 1)?;
    let f1 = g.crop_spatial(plane, 0, 1, h, 1)?;
    let f2 = g.crop_spatial(plane, 0, 2, h, 1)?;
    let left = edge_combo(g, f0, f1, f2)?;
    let left = g.embed_spatial(left, 0, 0, h, w)?;

    let g0 = g.crop_spatial(plane, 0, w - 1, h, 1)?;
    let g1 = g.crop_spatial(plane, 0, w - 2, h, 1)?;
    let g2 = g.crop_spatial(plane, 0, w - 3, h, 1)?;
    let right = edge_combo(g, g0, g1, g2)?;
    let right = g.neg(right);
    let right = g.embed_spatial(right, 0, w - 1, h, w)?;

    let sum = g.add(interior, left)?;
    let out = g.add(sum, right)?;
    debug_assert_eq!(g.shape(out), &[b, 1, h, w]);
    Ok(out)
}

/// In-plane y-derivative, same construction down columns.
pub fn d_dy<S: Scalar>(g: &mut Graph<S>, plane: NodeId) -> Result<NodeId> {
    let s = g.shape(plane).to_vec();
    let (_, _, h, w) = (s[0], s[1], s[2], s[3]);
    let kernel = g.constant(Tensor::from_f64_slice(&[1, 1, 3, 1], &[-0.5, 0.0, 0.5]));
    let interior = g.conv(plane, kernel, ConvSpec { stride: 1, dilation: 1 })?;
    let interior = g.embed_spatial(interior, 1, 0, h, w)?;

    let f0 = g.crop_spatial(plane, 0, 0, 1, w)?;
    let f1 = g.crop_spatial(plane, 1, 0, 1, w)?;
    let f2 = g.crop_spatial(plane, 2, 0, 1, w)?;
    let top = edge_combo(g, f0, f1, f2)?;
    let top = g.embed_spatial(top, 0, 0, h, w)?;

    let g0 = g.crop_spatial(plane, h - 1, 0, 1, w)?;
    let g1 = g.crop_spatial(plane, h - 2, 0, 1, w)?;
    let g2 = g.crop_spatial(plane, h - 3, 0, 1, w)?;
    let bottom = edge_combo(g, g0, g1, g2)?;
    let bottom = g.neg(bottom);
    let bottom = g.embed_spatial(bottom, h - 1, 0, h, w)?;

    let sum = g.add(interior, top)?;
    Ok(g.add(sum, bottom)?)
}

fn edge_combo<S: Scalar>(g: &mut Graph<S>, f0: NodeId, f1: NodeId, f2: NodeId) -> Result<NodeId> {
    let a = g.scale(f0, S::from_f64(-1.5));
    let b = g.scale(f1, S::from_f64(2.0));
    let c = g.scale(f2, S::from_f64(-0.5));
    let ab = g.add(a, b)?;
    Ok(g.add(ab, c)?)
}

/// Physics residual losses of a composed 3-channel plane. The z-derivative
/// terms come from the ground-truth flanking layers, passed as constants in
/// pixel units: `d*_dz[k] = (layer2 − layer0) / 2`.
pub struct FlankingDerivatives<S: Scalar> {
    /// [B, 1, H, W] per component: dBx/dz, dBy/dz, dBz/dz.
    pub ddz: [Tensor<S>; 3],
}

pub fn physics_losses<S: Scalar>(
    g: &mut Graph<S>,
    composed: NodeId,
    flanking: &FlankingDerivatives<S>,
) -> Result<(NodeId, NodeId)> {
    let bx = g.slice_ch(composed, 0, 1)?;
    let by = g.slice_ch(composed, 1, 1)?;
    let bz = g.slice_ch(composed, 2, 1)?;
    let dbx_dz = g.constant(flanking.ddz[0].clone());
    let dby_dz = g.constant(flanking.ddz[1].clone());
    let dbz_dz = g.constant(flanking.ddz[2].clone());

    let dbx_dx = d_dx(g, bx)?;
    let dby_dy = d_dy(g, by)?;
    let div_xy = g.add(dbx_dx, dby_dy)?;
    let div = g.add(div_xy, dbz_dz)?;
    let l_div = g.mean_abs(div)?;

    let dbz_dy = d_dy(g, bz)?;
    let dbz_dx = d_dx(g, bz)?;
    let dby_dx = d_dx(g, by)?;
    let dbx_dy = d_dy(g, bx)?;
    let cx = g.sub(dbz_dy, dby_dz)?;
    let cy = g.sub(dbx_dz, dbz_dx)?;
    let cz = g.sub(dby_dx, dbx_dy)?;
    let mx = g.mean_abs(cx)?;
    let my = g.mean_abs(cy)?;
    let mz = g.mean_abs(cz)?;
    let mxy = g.add(mx, my)?;
    let l_curl = g.add(mxy, mz)?;
    Ok((l_div, l_curl))
}
