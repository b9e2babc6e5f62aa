use field_core::{FieldGrid, Mask, Plane};
use physics::{curl, divergence, mae_mt, reconstruction_losses};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

#[test]
fn divergence_free_linear_field_is_zero_to_machine_precision() {
    // B = (x, y, -2z)·c is solenoidal; linear fields are exact under both
    // the central and the one-sided second-order stencils.
    let c = 0.37;
    let grid = FieldGrid::from_fn(64, 64, 1e-3, 1e-3, 1e-3, |z, x, y| {
        [c * x, c * y, -2.0 * c * z]
    })
    .unwrap();
    let div = divergence(&grid);
    assert!(max_abs(&div) <= 1e-12, "max |div| = {}", max_abs(&div));
}

#[test]
fn divergence_of_isotropic_linear_field_is_3c() {
    let c = 0.52;
    let grid =
        FieldGrid::from_fn(64, 64, 1e-3, 1e-3, 1e-3, |z, x, y| [c * x, c * y, c * z]).unwrap();
    let div = divergence(&grid);
    for &v in &div {
        assert!((v - 3.0 * c).abs() <= 1e-12, "div = {v}, expected {}", 3.0 * c);
    }
}

#[test]
fn curl_of_gradient_field_is_zero() {
    // B = ∇(c·x·y) = (cy, cx, 0).
    let c = 1.3;
    let grid =
        FieldGrid::from_fn(64, 64, 1e-3, 1e-3, 1e-3, |_, x, y| [c * y, c * x, 0.0]).unwrap();
    let [cx, cy, cz] = curl(&grid);
    assert!(max_abs(&cx) <= 1e-12);
    assert!(max_abs(&cy) <= 1e-12);
    assert!(max_abs(&cz) <= 1e-12);
}

#[test]
fn curl_of_rotation_field_is_2c_zhat() {
    let c = 0.8;
    let grid =
        FieldGrid::from_fn(32, 32, 1e-3, 1e-3, 1e-3, |_, x, y| [-c * y, c * x, 0.0]).unwrap();
    let [cx, cy, cz] = curl(&grid);
    assert!(max_abs(&cx) <= 1e-12);
    assert!(max_abs(&cy) <= 1e-12);
    for &v in &cz {
        assert!((v - 2.0 * c).abs() <= 1e-12);
    }
}

#[test]
fn operators_are_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random_grid = || {
        FieldGrid::from_fn(12, 14, 2e-3, 2e-3, 2e-3, |_, _, _| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .unwrap()
    };
    let f = random_grid();
    let g = random_grid();
    let (a, b) = (2.5, -0.75);

    let combo_data: Vec<f64> =
        f.raw().iter().zip(g.raw()).map(|(&x, &y)| a * x + b * y).collect();
    let combo = FieldGrid::from_data(12, 14, 2e-3, 2e-3, 2e-3, combo_data).unwrap();

    let df = divergence(&f);
    let dg = divergence(&g);
    let dc = divergence(&combo);
    for i in 0..dc.len() {
        assert!((dc[i] - (a * df[i] + b * dg[i])).abs() < 1e-9);
    }

    let cf = curl(&f);
    let cg = curl(&g);
    let cc = curl(&combo);
    for k in 0..3 {
        for i in 0..cc[k].len() {
            assert!((cc[k][i] - (a * cf[k][i] + b * cg[k][i])).abs() < 1e-9);
        }
    }
}

#[test]
fn mae_of_identical_planes_is_zero() {
    let plane = Plane::zeros(8, 8);
    let mut mask = Mask::zeros(8, 8);
    mask.set(3, 3, 1);
    assert_eq!(mae_mt(&plane, &plane, &mask).unwrap(), 0.0);
}

#[test]
fn mae_constant_offset_on_one_component_is_third() {
    // 1 mT offset on Bx only -> MAE = 1/3 mT.
    let truth = Plane::zeros(8, 8);
    let mut pred = Plane::zeros(8, 8);
    for v in pred.component_mut(0) {
        *v = 1e-3;
    }
    let mut mask = Mask::ones(8, 8);
    mask.set(0, 0, 0);
    let mae = mae_mt(&pred, &truth, &mask).unwrap();
    assert!((mae - 1.0 / 3.0).abs() < 1e-12, "mae = {mae}");
}

#[test]
fn mae_empty_mask_is_contract_error() {
    let plane = Plane::zeros(8, 8);
    let mask = Mask::zeros(8, 8);
    assert!(mae_mt(&plane, &plane, &mask).is_err());
}

#[test]
fn mae_matches_naive_loop_and_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mk_plane = |rng: &mut ChaCha8Rng| {
        Plane::from_data(6, 7, (0..3 * 42).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    let pred = mk_plane(&mut rng);
    let truth = mk_plane(&mut rng);
    let mut bits: Vec<u8> = (0..42).map(|_| rng.random_range(0..2)).collect();
    bits[0] = 1;
    let mask = Mask::new(6, 7, bits).unwrap();

    // Naive oracle.
    let mut sum = 0.0;
    let mut count = 0usize;
    for comp in 0..3 {
        for r in 0..6 {
            for c in 0..7 {
                if mask.get(r, c) == 1 {
                    sum += (pred.get(comp, r, c) - truth.get(comp, r, c)).abs();
                    count += 1;
                }
            }
        }
    }
    let expected = sum / count as f64 * 1e3;

    let got = mae_mt(&pred, &truth, &mask).unwrap();
    assert!((got - expected).abs() < 1e-12);
    let swapped = mae_mt(&truth, &pred, &mask).unwrap();
    assert!((got - swapped).abs() < 1e-15);
}

#[test]
fn reconstruction_losses_match_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mk = |rng: &mut ChaCha8Rng| {
        Plane::from_data(5, 5, (0..75).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    let pred = mk(&mut rng);
    let input = mk(&mut rng);
    let truth = mk(&mut rng);
    let mut bits: Vec<u8> = (0..25).map(|_| rng.random_range(0..2)).collect();
    bits[0] = 0;
    bits[24] = 1;
    let mask = Mask::new(5, 5, bits).unwrap();

    let mut l_match = 0.0;
    let mut l_mimic = 0.0;
    for comp in 0..3 {
        for r in 0..5 {
            for c in 0..5 {
                if mask.get(r, c) == 0 {
                    l_match += (input.get(comp, r, c) - pred.get(comp, r, c)).abs();
                } else {
                    l_mimic += (truth.get(comp, r, c) - pred.get(comp, r, c)).abs();
                }
            }
        }
    }

    let losses = reconstruction_losses(&pred, &input, &truth, &mask).unwrap();
    assert!((losses.l_match - l_match).abs() < 1e-12);
    assert!((losses.l_mimic - l_mimic).abs() < 1e-12);
}

#[test]
fn reconstruction_l_mimic_zero_when_pred_equals_truth() {
    let truth = Plane::from_data(5, 5, (0..75).map(|i| i as f64 * 0.01).collect()).unwrap();
    let input = Plane::zeros(5, 5);
    let mut mask = Mask::ones(5, 5);
    mask.set(0, 0, 0);
    let losses = reconstruction_losses(&truth, &input, &truth, &mask).unwrap();
    assert_eq!(losses.l_mimic, 0.0);
}
