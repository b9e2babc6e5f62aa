use field_core::{Mask, Plane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_plane(h: usize, w: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..3 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    Plane::from_data(h, w, data).unwrap()
}

/// Random mixed mask (at least one given and one missing pixel).
pub fn random_mask(h: usize, w: usize, seed: u64) -> Mask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits: Vec<u8> = (0..h * w).map(|_| rng.random_range(0..2u8)).collect();
    bits[0] = 0;
    bits[h * w - 1] = 1;
    Mask::new(h, w, bits).unwrap()
}
