use gan::{critic_loss, gradient_penalty, physics_losses, FlankingDerivatives, GpMode};
use nn::{Graph, NodeId, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Linear critic `D(x) = ⟨w, x⟩` per sample, as a graph function.
fn linear_critic(
    weights: Tensor<f64>,
) -> impl Fn(&mut Graph<f64>, NodeId) -> gan::Result<NodeId> {
    move |g: &mut Graph<f64>, plane: NodeId| {
        let s = g.shape(plane).to_vec();
        let w = g.constant(weights.clone());
        let wb = g.broadcast_to(w, &s)?;
        let prod = g.mul(plane, wb)?;
        Ok(g.sum_to(prod, &[s[0], 1, 1, 1])?)
    }
}

fn unit_norm_weights(shape: &[usize], k: f64, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    let mut data: Vec<f64> =
        (0..shape.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut data {
        *v *= k / norm;
    }
    Tensor::from_vec(shape, data)
}

#[test]
fn gradient_penalty_is_exact_for_linear_critics() {
    // ‖∇D‖ = ‖w‖ = k everywhere, so the penalty is exactly (k−1)².
    for &k in &[0.5f64, 1.0, 2.0] {
        let w = unit_norm_weights(&[1, 3, 6, 6], k, 3);
        let critic = linear_critic(w);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut g: Graph<f64> = Graph::new();
        let real = unit_norm_weights(&[2, 3, 6, 6], 5.0, 7);
        let fake = unit_norm_weights(&[2, 3, 6, 6], 4.0, 8);
        let gp = gradient_penalty(&mut g, GpMode::DoubleBackward, &critic, &real, &fake, &mut rng)
            .unwrap();
        let expected = (k - 1.0) * (k - 1.0);
        let got = g.value(gp).item();
        assert!(
            (got - expected).abs() <= 1e-10,
            "k = {k}: penalty {got} vs {expected}"
        );
    }
}

#[test]
fn pair_difference_agrees_with_double_backward_on_tiny_critics() {
    // Random small convolutional critics: the two modes estimate the same
    // quantity within 5% relative.
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let cw: Vec<f64> = (0..2 * 3 * 9).map(|_| rng.random_range(-0.4..0.4)).collect();
        let conv_w = Tensor::from_vec(&[2, 3, 3, 3], cw);
        let head: Vec<f64> = (0..2).map(|_| rng.random_range(-0.8..0.8)).collect();
        let head_w = Tensor::from_vec(&[1, 2, 1, 1], head);

        let critic = move |g: &mut Graph<f64>, plane: NodeId| -> gan::Result<NodeId> {
            let s = g.shape(plane).to_vec();
            let w = g.constant(conv_w.clone());
            let h = g.constant(head_w.clone());
            let y = g.conv2d_same(plane, w, 1, 1)?;
            let e = g.elu(y);
            let pooled = g.sum_to(e, &[s[0], 2, 1, 1])?;
            let pooled = g.scale(pooled, 1.0 / (s[2] * s[3]) as f64);
            Ok(g.conv(pooled, h, nn::ConvSpec { stride: 1, dilation: 1 })?)
        };

        let real = unit_norm_weights(&[2, 3, 8, 8], 6.0, seed + 100);
        let fake = unit_norm_weights(&[2, 3, 8, 8], 5.0, seed + 200);

        let mut g1: Graph<f64> = Graph::new();
        let mut rng1 = ChaCha8Rng::seed_from_u64(999);
        let exact =
            gradient_penalty(&mut g1, GpMode::DoubleBackward, &critic, &real, &fake, &mut rng1)
                .unwrap();
        let exact = g1.value(exact).item();

        let mut g2: Graph<f64> = Graph::new();
        let mut rng2 = ChaCha8Rng::seed_from_u64(999);
        let surrogate =
            gradient_penalty(&mut g2, GpMode::PairDifference, &critic, &real, &fake, &mut rng2)
                .unwrap();
        let surrogate = g2.value(surrogate).item();

        let rel = (exact - surrogate).abs() / exact.abs().max(1e-12);
        assert!(rel < 0.05, "seed {seed}: exact {exact} vs surrogate {surrogate} (rel {rel})");
    }
}

#[test]
fn critic_loss_trivial_cases() {
    let mut g: Graph<f64> = Graph::new();
    let same = g.constant(Tensor::filled(&[4, 1, 1, 1], 0.3));
    let loss = critic_loss(&mut g, same, same, None, 10.0).unwrap();
    assert_eq!(g.value(loss).item(), 0.0);

    let real = g.constant(Tensor::filled(&[4, 1, 1, 1], 1.0));
    let fake = g.constant(Tensor::filled(&[4, 1, 1, 1], 0.0));
    let loss = critic_loss(&mut g, real, fake, None, 10.0).unwrap();
    assert_eq!(g.value(loss).item(), -1.0);
}

#[test]
fn critic_step_increases_wasserstein_estimate_on_frozen_batch() {
    // A single small gradient step on the critic loss must not decrease
    // E[D(real)] − E[D(fake)] for a frozen batch.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    use rand::Rng;
    let w0: Vec<f64> = (0..1 * 3 * 1 * 1).map(|_| rng.random_range(-0.3..0.3)).collect();
    let real = unit_norm_weights(&[3, 3, 4, 4], 2.0, 5);
    let fake = unit_norm_weights(&[3, 3, 4, 4], 1.5, 6);

    let estimate = |weights: &[f64]| -> (f64, Vec<f64>) {
        let mut g: Graph<f64> = Graph::new();
        let w = g.leaf(Tensor::from_vec(&[1, 3, 1, 1], weights.to_vec()), true);
        let critic = |g: &mut Graph<f64>, plane: NodeId| -> gan::Result<NodeId> {
            let s = g.shape(plane).to_vec();
            let y = g.conv(plane, w, nn::ConvSpec { stride: 1, dilation: 1 })?;
            let pooled = g.sum_to(y, &[s[0], 1, 1, 1])?;
            Ok(pooled)
        };
        let r = g.constant(real.clone());
        let f = g.constant(fake.clone());
        let sr = critic(&mut g, r).unwrap();
        let sf = critic(&mut g, f).unwrap();
        let loss = critic_loss(&mut g, sr, sf, None, 0.0).unwrap();
        let grads = g.backward(loss, &[w]).unwrap();
        let grad = g.value(grads[0]).data.clone();
        (-g.value(loss).item(), grad)
    };

    let (before, grad) = estimate(&w0);
    let lr = 1e-6;
    let stepped: Vec<f64> = w0.iter().zip(&grad).map(|(w, g)| w - lr * g).collect();
    let (after, _) = estimate(&stepped);
    assert!(after >= before, "estimate decreased: {before} -> {after}");
}

#[test]
fn physics_losses_match_operator_module_on_truth() {
    // Composed plane = truth: the graph losses equal the finite-difference
    // residuals computed by the metrics code on a unit-spacing grid.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    use rand::Rng;
    let (h, w) = (12usize, 12usize);
    let grid = field_core::FieldGrid::from_fn(h, w, 1.0, 1.0, 1.0, |_, _, _| {
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    })
    .unwrap();

    let plane = grid.center_plane();
    let mut truth = Tensor::zeros(&[1, 3, h, w]);
    for comp in 0..3 {
        for i in 0..h * w {
            truth.data[comp * h * w + i] = plane.component(comp)[i];
        }
    }
    let mut ddz = [
        Tensor::zeros(&[1, 1, h, w]),
        Tensor::zeros(&[1, 1, h, w]),
        Tensor::zeros(&[1, 1, h, w]),
    ];
    for comp in 0..3 {
        let above = grid.component(2, comp);
        let below = grid.component(0, comp);
        for i in 0..h * w {
            ddz[comp].data[i] = (above[i] - below[i]) / 2.0;
        }
    }

    let mut g: Graph<f64> = Graph::new();
    let composed = g.constant(truth);
    let (l_div, l_curl) = physics_losses(&mut g, composed, &FlankingDerivatives { ddz }).unwrap();

    let div = physics::divergence(&grid);
    let expected_div = div.iter().map(|v| v.abs()).sum::<f64>() / div.len() as f64;
    let [cx, cy, cz] = physics::curl(&grid);
    let expected_curl = (0..cx.len())
        .map(|i| cx[i].abs() + cy[i].abs() + cz[i].abs())
        .sum::<f64>()
        / cx.len() as f64;

    let got_div = g.value(l_div).item();
    let got_curl = g.value(l_curl).item();
    assert!((got_div - expected_div).abs() < 1e-12, "{got_div} vs {expected_div}");
    assert!((got_curl - expected_curl).abs() < 1e-12, "{got_curl} vs {expected_curl}");
}
