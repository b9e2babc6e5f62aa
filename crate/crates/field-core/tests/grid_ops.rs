use field_core::{FieldGrid, KeepSide, Mask, Plane};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{random_mask, random_plane};

#[test]
fn hadamard_all_zero_mask_keep_given_is_identity() {
    let plane = random_plane(8, 9, 1);
    let mask = Mask::zeros(8, 9);
    let out = field_core::hadamard(&plane, &mask, KeepSide::Given).unwrap();
    assert_eq!(out, plane);
}

#[test]
fn hadamard_all_one_mask_keep_given_is_zero() {
    let plane = random_plane(8, 9, 2);
    let mask = Mask::ones(8, 9);
    let out = field_core::hadamard(&plane, &mask, KeepSide::Given).unwrap();
    assert!(out.raw().iter().all(|&v| v == 0.0));
}

#[test]
fn hadamard_shape_mismatch_is_dimension_error() {
    let plane = random_plane(8, 9, 3);
    let mask = Mask::zeros(9, 8);
    let err = field_core::hadamard(&plane, &mask, KeepSide::Given).unwrap_err();
    assert!(matches!(err, field_core::FieldError::Dimension(_)));
}

#[test]
fn normalize_scale_one_is_identity() {
    let grid = FieldGrid::from_fn(4, 4, 1.0, 1.0, 1.0, |z, x, y| [x, y, z]).unwrap();
    assert_eq!(grid.normalize(1.0).unwrap(), grid);
}

#[test]
fn normalize_constant_field() {
    let grid = FieldGrid::from_fn(4, 4, 1.0, 1.0, 1.0, |_, _, _| [1.2, 1.2, 1.2]).unwrap();
    let out = grid.normalize(1.2).unwrap();
    for &v in out.raw() {
        assert!((v - 1.0).abs() < 1e-15);
    }
}

#[test]
fn normalize_rejects_nonpositive_scale() {
    let grid = FieldGrid::zeros(4, 4, 1.0, 1.0, 1.0).unwrap();
    assert!(grid.normalize(0.0).is_err());
    assert!(grid.normalize(-2.0).is_err());
}

#[test]
fn normalize_denormalize_round_trip_below_1e12_relative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = FieldGrid::from_fn(16, 16, 1.0, 1.0, 1.0, |_, _, _| {
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    })
    .unwrap();
    let scale = 0.037;
    let back = grid.normalize(scale).unwrap().denormalize(scale).unwrap();
    for (&a, &b) in grid.raw().iter().zip(back.raw()) {
        let rel = (a - b).abs() / a.abs().max(1e-30);
        assert!(rel < 1e-12, "rel error {rel}");
    }
}

proptest! {
    /// Masking partition: given part plus missing part reconstructs the plane.
    #[test]
    fn hadamard_partition(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = rng.random_range(3..12usize);
        let w = rng.random_range(3..12usize);
        let plane = random_plane(h, w, seed.wrapping_add(1));
        let mask = random_mask(h, w, seed.wrapping_add(2));
        prop_assert!(naive_partition(&plane, &mask));
    }
}

/// Independent elementwise oracle for the partition property.
fn naive_partition(plane: &Plane, mask: &Mask) -> bool {
    let given = field_core::hadamard(plane, mask, KeepSide::Given).unwrap();
    let missing = field_core::hadamard(plane, mask, KeepSide::Missing).unwrap();
    for comp in 0..3 {
        for r in 0..plane.h() {
            for c in 0..plane.w() {
                if given.get(comp, r, c) + missing.get(comp, r, c) != plane.get(comp, r, c) {
                    return false;
                }
            }
        }
    }
    true
}

#[test]
fn partition_matches_naive_oracle() {
    for seed in 0..20 {
        let plane = random_plane(7, 5, seed);
        let mask = random_mask(7, 5, seed + 100);
        assert!(naive_partition(&plane, &mask));
    }
}
