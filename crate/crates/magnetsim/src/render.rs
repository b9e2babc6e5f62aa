use std::path::Path;

use field_core::{
    config_digest, par, DatasetHeader, DatasetWriter, FieldGrid, Sample, SampleSource,
    FORMAT_VERSION,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::{sample_assembly, AssemblyConfig, MagnetAssembly};
use crate::prism::field_unchecked;
use crate::{Result, SimError};

/// Renders the assembly's field over the hole area on the measurement plane
/// and the two flanking layers. Pixel pitch is `hole_side / W` in all three
/// directions.
pub fn render_sample(assembly: &MagnetAssembly, config: &AssemblyConfig, seed: u64) -> Result<Sample> {
    let (h, w) = config.resolution;
    let pitch = assembly.hole_side / w as f64;
    if pitch <= 0.0 {
        return Err(SimError::Generation("hole side must be positive to render".into()));
    }

    // Guard the contract once per sample: the extreme grid points must lie
    // outside every magnet; pixel centers are strictly inside the hole.
    let max_x = ((w - 1) as f64 / 2.0) * pitch;
    let max_y = ((h - 1) as f64 / 2.0) * pitch;
    for m in &assembly.magnets {
        for &corner in &[
            [max_x, max_y, pitch],
            [-max_x, max_y, pitch],
            [max_x, -max_y, -pitch],
            [-max_x, -max_y, -pitch],
        ] {
            if m.contains(corner) {
                return Err(SimError::Generation(format!(
                    "evaluation point {corner:?} lies inside a magnet at {:?}",
                    m.center
                )));
            }
        }
    }

    let magnets = &assembly.magnets;
    let rows: Vec<Vec<[f64; 3]>> = par::par_map(3 * h, |task| {
        let layer = task / h;
        let row = task % h;
        let z = (layer as f64 - 1.0) * pitch;
        let y = (row as f64 - (h as f64 - 1.0) / 2.0) * pitch;
        (0..w)
            .map(|col| {
                let x = (col as f64 - (w as f64 - 1.0) / 2.0) * pitch;
                let mut b = [0.0; 3];
                for m in magnets {
                    let f = field_unchecked(m, [x, y, z]);
                    b[0] += f[0];
                    b[1] += f[1];
                    b[2] += f[2];
                }
                b
            })
            .collect()
    });

    let mut grid = FieldGrid::zeros(h, w, pitch, pitch, pitch)?;
    for layer in 0..3 {
        for row in 0..h {
            let line = &rows[layer * h + row];
            for (col, b) in line.iter().enumerate() {
                for comp in 0..3 {
                    grid.set(layer, comp, row, col, b[comp]);
                }
            }
        }
    }
    Ok(Sample::new(grid, assembly.hole_side, seed, SampleSource::Synthetic)?)
}

/// Per-sample RNG stream seed, a SplitMix64 mix of (seed, index).
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one sample: assembly from the per-sample stream, then its field.
pub fn generate_sample(config: &AssemblyConfig, seed: u64, index: u64) -> Result<Sample> {
    let s = sample_seed(seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let assembly = sample_assembly(&mut rng, config)?;
    render_sample(&assembly, config, s)
}

/// Writes `n` independent samples to `path`. The whole dataset is a pure
/// function of `(config, seed, n)`.
pub fn generate_dataset(
    n: usize,
    config: &AssemblyConfig,
    seed: u64,
    path: &Path,
) -> Result<DatasetHeader> {
    if n == 0 {
        return Err(SimError::Domain("dataset needs at least one sample".into()));
    }
    config.validate()?;
    let (h, w) = config.resolution;
    let nominal_side = 0.5 * (config.hole_side_range.0 + config.hole_side_range.1);
    let nominal_pitch = nominal_side / w as f64;
    let digest_text = format!("{};n={};seed={}", config.canonical_string(), n, seed);
    let header = DatasetHeader {
        sample_count: 0,
        h,
        w,
        dx: nominal_pitch,
        dy: nominal_pitch,
        dz: nominal_pitch,
        format_version: FORMAT_VERSION,
        config_digest: config_digest(&digest_text),
    };
    let mut writer = DatasetWriter::create(path, header)?;
    for i in 0..n {
        let sample = generate_sample(config, seed, i as u64)?;
        writer.append(&sample)?;
    }
    Ok(writer.finish()?)
}

/// Digest text and digest for a generation request, exposed so callers can
/// validate datasets against configs without regenerating.
pub fn dataset_digest(config: &AssemblyConfig, n: usize, seed: u64) -> [u8; 32] {
    config_digest(&format!("{};n={};seed={}", config.canonical_string(), n, seed))
}
