use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tasks::{inpaint_mask, outpaint_mask, TaskSpec};

#[test]
fn inpaint_without_jitter_has_exact_count() {
    let spec = TaskSpec::inpaint(48).with_jitter(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mask = inpaint_mask(&mut rng, &spec, 256, 256).unwrap();
    assert_eq!(mask.count_missing(), 48 * 48);
}

#[test]
fn largest_paper_mask_always_fits_at_full_jitter() {
    // Side 192 with 25% jitter caps at 240 < 256.
    let spec = TaskSpec::inpaint(192);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let mask = inpaint_mask(&mut rng, &spec, 256, 256).unwrap();
        let missing = mask.count_missing();
        let side = (missing as f64).sqrt() as usize;
        assert_eq!(side * side, missing, "mask must stay square");
        assert!(side <= 240, "side {side} exceeds jitter bound");
        assert!(side >= 144, "side {side} below jitter bound");
    }
}

#[test]
fn inpaint_mask_that_cannot_fit_is_spec_error() {
    let spec = TaskSpec::inpaint(64).with_jitter(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(inpaint_mask(&mut rng, &spec, 64, 64).is_err());
}

#[test]
fn inpaint_corner_distribution_is_uniform_by_chi_square() {
    // Fixed side 8 on a 24² grid: 17·17 = 289 possible top-left corners.
    // 10,000 draws, chi-square test at the 1% level.
    let spec = TaskSpec::inpaint(8).with_jitter(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (h, w, side) = (24usize, 24usize, 8usize);
    let positions = (h - side + 1) * (w - side + 1);
    let draws = 10_000usize;
    let mut counts = vec![0usize; positions];
    for _ in 0..draws {
        let mask = inpaint_mask(&mut rng, &spec, h, w).unwrap();
        // Recover the corner: first missing pixel in row-major order.
        let first = mask.bits().iter().position(|&b| b == 1).unwrap();
        let (r, c) = (first / w, first % w);
        counts[r * (w - side + 1) + c] += 1;
    }
    let expected = draws as f64 / positions as f64;
    let chi2: f64 = counts.iter().map(|&n| (n as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 288 dof ≈ 288 + 2.33·sqrt(2·288) ≈ 344.
    assert!(chi2 < 344.0, "chi² = {chi2} for {positions} cells");
}

#[test]
fn outpaint_point_measurements_have_exact_count() {
    let spec = TaskSpec::outpaint(20, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mask = outpaint_mask(&mut rng, &spec, 256, 256).unwrap();
    assert_eq!(mask.count_given(), 20);
}

#[test]
fn outpaint_regions_are_disjoint_with_exact_count() {
    let spec = TaskSpec::outpaint(20, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let mask = outpaint_mask(&mut rng, &spec, 256, 256).unwrap();
        // 20 disjoint 16² regions leave exactly 5120 given pixels.
        assert_eq!(mask.count_given(), 5120);
    }
}

#[test]
fn outpaint_zero_regions_is_rejected() {
    let spec = TaskSpec::outpaint(0, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    assert!(outpaint_mask(&mut rng, &spec, 256, 256).is_err());
}

#[test]
fn mask_generation_is_reproducible_from_seed() {
    let spec = TaskSpec::inpaint(12);
    let m1 = inpaint_mask(&mut ChaCha8Rng::seed_from_u64(9), &spec, 64, 64).unwrap();
    let m2 = inpaint_mask(&mut ChaCha8Rng::seed_from_u64(9), &spec, 64, 64).unwrap();
    assert_eq!(m1, m2);

    let spec = TaskSpec::outpaint(5, 4);
    let m1 = outpaint_mask(&mut ChaCha8Rng::seed_from_u64(10), &spec, 64, 64).unwrap();
    let m2 = outpaint_mask(&mut ChaCha8Rng::seed_from_u64(10), &spec, 64, 64).unwrap();
    assert_eq!(m1, m2);
}

#[test]
fn jittered_sides_span_the_configured_range() {
    let spec = TaskSpec::inpaint(40); // jitter 0.25 -> sides 30..=50
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen_low = false;
    let mut seen_high = false;
    for _ in 0..500 {
        let mask = inpaint_mask(&mut rng, &spec, 128, 128).unwrap();
        let side = (mask.count_missing() as f64).sqrt().round() as usize;
        assert!((30..=50).contains(&side), "side {side}");
        seen_low |= side < 36;
        seen_high |= side > 44;
    }
    assert!(seen_low && seen_high, "jitter should explore both ends");
}

#[test]
fn pgm_export_has_header_and_payload() {
    let spec = TaskSpec::inpaint(8).with_jitter(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mask = inpaint_mask(&mut rng, &spec, 32, 32).unwrap();
    let pgm = mask.to_pgm();
    assert!(pgm.starts_with(b"P5\n32 32\n255\n"));
    assert_eq!(pgm.len(), b"P5\n32 32\n255\n".len() + 32 * 32);
    let _ = rng.random::<u8>();
}
