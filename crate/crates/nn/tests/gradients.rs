use nn::{grad_check, max_rel_error, ConvSpec, Graph, NodeId, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_vec(shape, (0..shape.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn random_tensor_f32(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_vec(shape, (0..shape.iter().product()).map(|_| rng.random_range(-1.0f32..1.0)).collect())
}

#[test]
fn linear_map_gradient_is_machine_exact() {
    let inputs = vec![random_tensor(&[2, 3, 4, 4], 1)];
    let err = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| {
            let s = g.scale(ids[0], 3.7);
            g.sum_all(s)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-9, "linear map error {err}");
}

#[test]
fn conv_gradient_matches_finite_differences() {
    let inputs = vec![random_tensor(&[1, 2, 4, 4], 2), random_tensor(&[3, 2, 3, 3], 3)];
    let err = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| {
            let y = g.conv(ids[0], ids[1], ConvSpec { stride: 1, dilation: 1 })?;
            // Square to exercise a nonlinear reduction.
            let sq = g.mul(y, y)?;
            g.mean_all(sq)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "conv gradient error {err}");
}

#[test]
fn strided_dilated_conv_with_mirror_padding_gradcheck() {
    let inputs = vec![
        random_tensor(&[2, 2, 8, 8], 4),
        random_tensor(&[3, 2, 3, 3], 5),
        random_tensor(&[2, 3, 3, 3], 15),
    ];
    let err = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| {
            let y = g.conv2d_same(ids[0], ids[1], 2, 1)?;
            let e = g.elu(y);
            let z = g.conv2d_same(e, ids[2], 1, 2)?;
            let sq = g.mul(z, z)?;
            g.mean_all(sq)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "strided/dilated stack error {err}");
}

#[test]
fn resample_gradients_match_finite_differences() {
    let inputs = vec![random_tensor(&[1, 2, 4, 4], 6)];
    let err = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| {
            let up = g.upsample_bilinear(ids[0], 2)?;
            let sq = g.mul(up, up)?;
            g.mean_all(sq)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-8, "upsample gradient error {err}");

    let err = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| {
            let down = g.downsample_stride(ids[0], 2)?;
            let sq = g.mul(down, down)?;
            g.sum_all(sq)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-8, "downsample gradient error {err}");
}

#[test]
fn elu_activation_stack_gradcheck() {
    // Mixed-sign pre-activations so both ELU branches are exercised.
    let inputs = vec![random_tensor(&[1, 3, 5, 5], 7)];
    let err = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| {
            let e = g.elu(ids[0]);
            let e2 = g.elu(e);
            let sq = g.mul(e2, e2)?;
            g.mean_all(sq)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "elu stack error {err}");
}

#[test]
fn attention_gradcheck() {
    let (h, w) = (8usize, 8usize);
    let mut mask = vec![0u8; h * w];
    for r in 4..6 {
        for c in 4..6 {
            mask[r * w + c] = 1;
        }
    }
    let inputs = vec![random_tensor(&[1, 2, h, w], 8)];
    let spec = nn::AttentionSpec::default();
    let err = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| {
            let a = nn::contextual_attention(g, ids[0], &mask, &spec)?;
            let sq = g.mul(a, a)?;
            g.mean_all(sq)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "attention gradient error {err}");
}

#[test]
fn double_backward_matches_finite_differences_of_gradient_norm() {
    // d/dx of ‖∇_x f‖² for f = mean((x ⋆ w)², checked by differencing the
    // first-order gradient. This is the mechanism the gradient penalty uses.
    let x0 = random_tensor(&[1, 1, 4, 4], 9);
    let w0 = random_tensor(&[1, 1, 3, 3], 10);

    let grad_norm_sq = |x: &Tensor<f64>| -> (f64, Vec<f64>) {
        let mut g: Graph<f64> = Graph::new();
        let xid = g.leaf(x.clone(), true);
        let wid = g.constant(w0.clone());
        let y = g.conv(xid, wid, ConvSpec { stride: 1, dilation: 1 }).unwrap();
        let sq = g.mul(y, y).unwrap();
        let f = g.mean_all(sq).unwrap();
        let gx = g.backward(f, &[xid]).unwrap()[0];
        let gsq = g.mul(gx, gx).unwrap();
        let norm = g.sum_all(gsq).unwrap();
        // Differentiate the gradient-norm scalar again w.r.t. x.
        let ggx = g.backward(norm, &[xid]).unwrap()[0];
        (g.value(norm).item(), g.value(ggx).to_f64_vec())
    };

    let (_, analytic) = grad_norm_sq(&x0);
    let eps = 1e-5;
    let mut numeric = vec![0.0; x0.numel()];
    for i in 0..x0.numel() {
        let mut xp = x0.clone();
        xp.data[i] += eps;
        let mut xm = x0.clone();
        xm.data[i] -= eps;
        numeric[i] = (grad_norm_sq(&xp).0 - grad_norm_sq(&xm).0) / (2.0 * eps);
    }
    let err = max_rel_error(&analytic, &numeric);
    assert!(err < 1e-6, "double backward error {err}");
}

#[test]
fn deliberately_broken_backward_is_flagged() {
    // Corrupt one analytic entry by a factor of two: the comparator must
    // report an error far above the pass threshold.
    let inputs = vec![random_tensor(&[2, 2], 11)];
    let mut g: Graph<f64> = Graph::new();
    let x = g.leaf(inputs[0].clone(), true);
    let sq = g.mul(x, x).unwrap();
    let out = g.sum_all(sq).unwrap();
    let grad = g.backward(out, &[x]).unwrap()[0];
    let mut analytic = g.value(grad).to_f64_vec();

    let numeric = analytic.clone(); // exact for this quadratic
    analytic[0] *= 2.0;
    let err = max_rel_error(&analytic, &numeric);
    assert!(err > 1e-2, "mutation must be flagged, got {err}");
}

#[test]
fn epsilon_outside_range_is_domain_error() {
    let inputs = vec![random_tensor(&[2, 2], 12)];
    let res = grad_check(
        |g: &mut Graph<f64>, ids: &[NodeId]| g.sum_all(ids[0]),
        &inputs,
        1e-8,
    );
    assert!(res.is_err());
}

#[test]
fn single_precision_gradcheck_within_relaxed_tolerance() {
    let inputs = vec![random_tensor_f32(&[1, 2, 6, 6], 13), random_tensor_f32(&[2, 2, 3, 3], 14)];
    let err = grad_check(
        |g: &mut Graph<f32>, ids: &[NodeId]| {
            let y = g.conv2d_same(ids[0], ids[1], 2, 1)?;
            let e = g.elu(y);
            let sq = g.mul(e, e)?;
            g.mean_all(sq)
        },
        &inputs,
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-3, "f32 gradient error {err}");
}
