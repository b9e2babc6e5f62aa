use std::fs;

use field_core::DatasetReader;
use magnetsim::{
    generate_dataset, prism_field, render_sample, sample_assembly, AssemblyConfig,
    EasyAxisDistribution, MagnetAssembly,
};
use physics::{curl_l1_ut_per_px, divergence_mt_per_px};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn occupancy_zero_gives_empty_assembly() {
    let config = AssemblyConfig { occupancy_prob: 0.0, ..AssemblyConfig::desk() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let assembly = sample_assembly(&mut rng, &config).unwrap();
    assert!(assembly.magnets.is_empty());
}

#[test]
fn occupancy_one_zero_hole_gives_full_lattice() {
    let config = AssemblyConfig {
        occupancy_prob: 1.0,
        hole_side_range: (0.0, 0.0),
        ..AssemblyConfig::desk()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let assembly = sample_assembly(&mut rng, &config).unwrap();
    assert_eq!(assembly.magnets.len(), 500);
}

#[test]
fn occupied_fraction_matches_binomial_bound() {
    let config = AssemblyConfig { hole_side_range: (0.0, 0.0), ..AssemblyConfig::desk() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0usize;
    let draws = 1000;
    for _ in 0..draws {
        total += sample_assembly(&mut rng, &config).unwrap().magnets.len();
    }
    let fraction = total as f64 / (draws * 500) as f64;
    assert!((0.46..=0.54).contains(&fraction), "occupied fraction {fraction}");
}

#[test]
fn hole_region_is_magnet_free() {
    let config = AssemblyConfig { occupancy_prob: 1.0, ..AssemblyConfig::desk() };
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assembly = sample_assembly(&mut rng, &config).unwrap();
        let half = assembly.hole_side / 2.0;
        for m in &assembly.magnets {
            let clear_xy = m.center[0].abs() - m.half_sides[0] >= half - 1e-15
                || m.center[1].abs() - m.half_sides[1] >= half - 1e-15;
            let clear_z = m.center[2].abs() - m.half_sides[2] >= 0.0;
            assert!(
                clear_xy || clear_z,
                "magnet at {:?} intrudes into the {half}-hole",
                m.center
            );
        }
    }
}

#[test]
fn in_plane_axes_have_zero_z_component() {
    let config = AssemblyConfig {
        easy_axis: EasyAxisDistribution::InPlane,
        ..AssemblyConfig::desk()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let assembly = sample_assembly(&mut rng, &config).unwrap();
    assert!(!assembly.magnets.is_empty());
    for m in &assembly.magnets {
        assert_eq!(m.magnetization[2], 0.0);
        let norm = (m.magnetization[0].powi(2) + m.magnetization[1].powi(2)).sqrt();
        assert!((norm - 1.2).abs() < 1e-12);
    }
}

#[test]
fn empty_assembly_renders_all_zero_grid() {
    let config = AssemblyConfig { resolution: (8, 8), ..AssemblyConfig::desk() };
    let assembly = MagnetAssembly { magnets: vec![], hole_side: 0.002 };
    let sample = render_sample(&assembly, &config, 0).unwrap();
    assert!(sample.field.raw().iter().all(|&v| v == 0.0));
}

#[test]
fn rendered_plane_matches_pointwise_prism_field() {
    let config = AssemblyConfig { resolution: (8, 8), ..AssemblyConfig::desk() };
    let magnet = magnetsim::PrismMagnet::cube([0.0, 0.0, -0.002], 0.001, [0.2, -1.0, 0.6]);
    let assembly = MagnetAssembly { magnets: vec![magnet], hole_side: 0.002 };
    let sample = render_sample(&assembly, &config, 0).unwrap();

    let pitch = 0.002 / 8.0;
    for layer in 0..3 {
        let z = (layer as f64 - 1.0) * pitch;
        for row in 0..8 {
            let y = (row as f64 - 3.5) * pitch;
            for col in 0..8 {
                let x = (col as f64 - 3.5) * pitch;
                let b = prism_field(&magnet, [x, y, z]).unwrap();
                for comp in 0..3 {
                    let got = sample.field.get(layer, comp, row, col);
                    assert!(
                        (got - b[comp]).abs() <= 1e-15 + 1e-12 * b[comp].abs(),
                        "layer {layer} comp {comp} ({row},{col}): {got} vs {}",
                        b[comp]
                    );
                }
            }
        }
    }
}

#[test]
fn rendered_divergence_and_curl_converge_second_order() {
    // Same assembly rendered at 32² and 64²: halving dx must cut the mean
    // discrete |div| and |curl| by roughly 4.
    let base = AssemblyConfig { resolution: (32, 32), ..AssemblyConfig::desk() };
    let fine = AssemblyConfig { resolution: (64, 64), ..AssemblyConfig::desk() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let assembly = sample_assembly(&mut rng, &base).unwrap();

    let coarse_sample = render_sample(&assembly, &base, 0).unwrap();
    let fine_sample = render_sample(&assembly, &fine, 0).unwrap();

    // Compare in T/m: the mT/px helper multiplies by dx, which itself halves.
    let div_ratio = (divergence_mt_per_px(&coarse_sample.field) / coarse_sample.field.dx)
        / (divergence_mt_per_px(&fine_sample.field) / fine_sample.field.dx);
    let curl_ratio = (curl_l1_ut_per_px(&coarse_sample.field) / coarse_sample.field.dx)
        / (curl_l1_ut_per_px(&fine_sample.field) / fine_sample.field.dx);
    assert!((3.0..=5.5).contains(&div_ratio), "div ratio {div_ratio}");
    assert!((3.0..=5.5).contains(&curl_ratio), "curl ratio {curl_ratio}");
}

#[test]
fn dataset_generation_is_deterministic() {
    let dir = std::env::temp_dir().join(format!("magnetsim_det_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let config = AssemblyConfig { resolution: (16, 16), ..AssemblyConfig::desk() };
    let p1 = dir.join("a.mfld");
    let p2 = dir.join("b.mfld");
    let p3 = dir.join("c.mfld");
    generate_dataset(2, &config, 42, &p1).unwrap();
    generate_dataset(2, &config, 42, &p2).unwrap();
    generate_dataset(2, &config, 43, &p3).unwrap();

    let b1 = fs::read(&p1).unwrap();
    let b2 = fs::read(&p2).unwrap();
    let b3 = fs::read(&p3).unwrap();
    assert_eq!(b1, b2, "same seed must give byte-identical datasets");
    assert_ne!(b1, b3, "different seeds must give different fields");

    let mut reader = DatasetReader::open(&p1).unwrap();
    assert_eq!(reader.len(), 2);
    let s0 = reader.read_sample(0).unwrap();
    assert!(s0.field.max_abs() > 0.0);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn generate_zero_samples_is_an_error() {
    let dir = std::env::temp_dir();
    let config = AssemblyConfig::desk();
    assert!(generate_dataset(0, &config, 1, &dir.join("zero.mfld")).is_err());
}
