use std::fs;
use std::io::{Read, Seek, SeekFrom, Write};

use field_core::{
    config_digest, DatasetHeader, DatasetReader, DatasetWriter, FieldError, FieldGrid, Sample,
    SampleSource,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A grid whose every value is exactly representable as f32, so file
/// round-trips are bit-exact.
fn f32_grid(h: usize, w: usize, seed: u64) -> FieldGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldGrid::from_fn(h, w, 1e-4, 1e-4, 1e-4, |_, _, _| {
        [
            rng.random_range(-0.5f32..0.5) as f64,
            rng.random_range(-0.5f32..0.5) as f64,
            rng.random_range(-0.5f32..0.5) as f64,
        ]
    })
    .unwrap()
}

fn header(n: u64) -> DatasetHeader {
    DatasetHeader {
        sample_count: n,
        h: 8,
        w: 8,
        dx: 1e-4,
        dy: 1e-4,
        dz: 1e-4,
        format_version: field_core::FORMAT_VERSION,
        config_digest: config_digest("test config"),
    }
}

fn write_samples(path: &std::path::Path, seeds: &[u64]) -> Vec<Sample> {
    let mut writer = DatasetWriter::create(path, header(0)).unwrap();
    let samples: Vec<Sample> = seeds
        .iter()
        .map(|&s| {
            Sample::new(f32_grid(8, 8, s), 8.0 * 1e-4, s, SampleSource::Synthetic).unwrap()
        })
        .collect();
    for s in &samples {
        writer.append(s).unwrap();
    }
    writer.finish().unwrap();
    samples
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roundtrip.mfld");
    let samples = write_samples(&path, &[1, 2, 3]);

    let mut reader = DatasetReader::open(&path).unwrap();
    assert_eq!(reader.len(), 3);
    for (i, original) in samples.iter().enumerate() {
        let loaded = reader.read_sample(i).unwrap();
        assert_eq!(loaded.field.raw(), original.field.raw(), "sample {i}");
        assert_eq!(loaded.seed, original.seed);
        assert_eq!(loaded.source, original.source);
    }
}

#[test]
fn quantization_is_idempotent() {
    // Arbitrary f64 fields quantize once on first save; a second save/load
    // cycle reproduces the first bit-exactly.
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.mfld");
    let p2 = dir.path().join("b.mfld");
    let grid = FieldGrid::from_fn(8, 8, 1e-4, 1e-4, 1e-4, |z, x, y| {
        [x * 1.000000007, y + z * 0.3333333333333, (x * y).sin()]
    })
    .unwrap();
    let sample = Sample::new(grid, 8.0 * 1e-4, 0, SampleSource::Synthetic).unwrap();

    let mut w1 = DatasetWriter::create(&p1, header(0)).unwrap();
    w1.append(&sample).unwrap();
    w1.finish().unwrap();
    let loaded1 = DatasetReader::open(&p1).unwrap().read_sample(0).unwrap();

    let mut w2 = DatasetWriter::create(&p2, header(0)).unwrap();
    w2.append(&loaded1).unwrap();
    w2.finish().unwrap();
    let loaded2 = DatasetReader::open(&p2).unwrap().read_sample(0).unwrap();

    assert_eq!(loaded1.field.raw(), loaded2.field.raw());
}

#[test]
fn corrupted_magic_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mfld");
    write_samples(&path, &[7]);

    let mut f = fs::OpenOptions::new().write(true).open(&path).unwrap();
    f.seek(SeekFrom::Start(0)).unwrap();
    f.write_all(b"XXXX").unwrap();
    drop(f);

    assert!(matches!(DatasetReader::open(&path), Err(FieldError::BadMagic)));
}

#[test]
fn version_mismatch_is_distinct_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ver.mfld");
    write_samples(&path, &[7]);

    let mut f = fs::OpenOptions::new().write(true).open(&path).unwrap();
    f.seek(SeekFrom::Start(4)).unwrap();
    f.write_all(&999u32.to_le_bytes()).unwrap();
    drop(f);

    assert!(matches!(DatasetReader::open(&path), Err(FieldError::Version { found: 999, .. })));
}

#[test]
fn truncated_file_is_distinct_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trunc.mfld");
    write_samples(&path, &[1, 2]);

    let len = fs::metadata(&path).unwrap().len();
    let mut bytes = Vec::new();
    fs::File::open(&path).unwrap().read_to_end(&mut bytes).unwrap();
    bytes.truncate(len as usize - 100);
    fs::write(&path, &bytes).unwrap();

    assert!(matches!(DatasetReader::open(&path), Err(FieldError::Truncated(_))));
}

#[test]
fn digest_mismatch_is_distinct_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("digest.mfld");
    write_samples(&path, &[1]);

    let other = config_digest("some other config");
    assert!(matches!(
        DatasetReader::open_expecting(&path, &other),
        Err(FieldError::DigestMismatch)
    ));
    let right = config_digest("test config");
    assert!(DatasetReader::open_expecting(&path, &right).is_ok());
}

#[test]
fn random_access_equals_sequential_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ra.mfld");
    let seeds: Vec<u64> = (0..20).collect();
    write_samples(&path, &seeds);

    // Sequential pass.
    let mut seq = DatasetReader::open(&path).unwrap();
    let sequential: Vec<Sample> = (0..20).map(|i| seq.read_sample(i).unwrap()).collect();

    // Direct random access of sample 17 on a fresh reader.
    let mut rnd = DatasetReader::open(&path).unwrap();
    let direct = rnd.read_sample(17).unwrap();
    assert_eq!(direct, sequential[17]);
}

#[test]
fn digest_is_stable_for_identical_configs() {
    assert_eq!(config_digest("[dataset]\nseed=1"), config_digest("[dataset]\nseed=1"));
    assert_ne!(config_digest("[dataset]\nseed=1"), config_digest("[dataset]\nseed=2"));
}
