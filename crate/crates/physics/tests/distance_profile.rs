use field_core::{Mask, Plane};
use physics::{distance_profile, nearest_given_distances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(N²) all-pairs nearest-given oracle.
fn brute_force_distances(mask: &Mask) -> Vec<f64> {
    let (h, w) = (mask.h(), mask.w());
    let given: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.get(r, c) == 0)
        .collect();
    (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| {
            given
                .iter()
                .map(|&(gr, gc)| {
                    let dr = r as f64 - gr as f64;
                    let dc = c as f64 - gc as f64;
                    (dr * dr + dc * dc).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[test]
fn distances_match_brute_force_on_random_32x32_masks() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits: Vec<u8> = (0..32 * 32).map(|_| (rng.random_range(0..8) != 0) as u8).collect();
        bits[17] = 0;
        bits[1000] = 1;
        let mask = Mask::new(32, 32, bits).unwrap();
        let fast = nearest_given_distances(&mask).unwrap();
        let slow = brute_force_distances(&mask);
        for i in 0..fast.len() {
            assert!((fast[i] - slow[i]).abs() < 1e-9, "pixel {i}: {} vs {}", fast[i], slow[i]);
        }
    }
}

#[test]
fn equal_planes_give_all_zero_profile() {
    let plane = Plane::from_data(16, 16, (0..3 * 256).map(|i| (i as f64).sin()).collect()).unwrap();
    let mut mask = Mask::zeros(16, 16);
    for r in 5..11 {
        for c in 5..11 {
            mask.set(r, c, 1);
        }
    }
    let profile = distance_profile(&plane, &plane, &mask).unwrap();
    assert!(!profile.is_empty());
    assert!(profile.iter().all(|bin| bin.mae_mt == 0.0));
}

#[test]
fn square_mask_max_bin_is_about_half_side() {
    // 20x20 centered hole in 64²: deepest pixel is ~10 px from the border.
    let mut mask = Mask::zeros(64, 64);
    for r in 22..42 {
        for c in 22..42 {
            mask.set(r, c, 1);
        }
    }
    let plane = Plane::zeros(64, 64);
    let profile = distance_profile(&plane, &plane, &mask).unwrap();
    let max_bin = profile.last().unwrap().distance_px;
    assert!((9..=11).contains(&max_bin), "max bin {max_bin}");
}

#[test]
fn bins_are_contiguous_from_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bits: Vec<u8> = vec![1; 48 * 48];
    for _ in 0..6 {
        let r = rng.random_range(0..48);
        let c = rng.random_range(0..48);
        bits[r * 48 + c] = 0;
    }
    let mask = Mask::new(48, 48, bits).unwrap();
    let plane = Plane::zeros(48, 48);
    let profile = distance_profile(&plane, &plane, &mask).unwrap();
    for (i, bin) in profile.iter().enumerate() {
        assert_eq!(bin.distance_px, i + 1);
    }
}
