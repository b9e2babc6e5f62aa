use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::grid::{FieldGrid, Sample, SampleSource, N_COMPONENTS, N_LAYERS};
use crate::{FieldError, Result};

pub const MAGIC: [u8; 4] = *b"MFLD";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: u64 = 4 + 4 + 8 + 8 + 8 + 8 + 8 + 8 + 32;
const SAMPLE_META_LEN: u64 = 8 + 8 + 1 + 7;

/// Self-describing header of a dataset file.
///
/// `dx`, `dy`, `dz` are the nominal spacings of the generator config; each
/// sample record additionally stores its own area side, from which its
/// actual pitch follows.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub sample_count: u64,
    pub h: usize,
    pub w: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub format_version: u32,
    pub config_digest: [u8; 32],
}

impl DatasetHeader {
    fn record_len(&self) -> u64 {
        SAMPLE_META_LEN + (N_LAYERS * N_COMPONENTS * self.h * self.w) as u64 * 4
    }
}

/// Sequential dataset writer. Samples are appended one by one; the header
/// count is fixed up on `finish`.
pub struct DatasetWriter {
    file: BufWriter<File>,
    header: DatasetHeader,
    written: u64,
}

impl DatasetWriter {
    pub fn create(path: &Path, header: DatasetHeader) -> Result<Self> {
        let file = File::create(path)?;
        let mut w = Self { file: BufWriter::new(file), header, written: 0 };
        w.write_header()?;
        Ok(w)
    }

    fn write_header(&mut self) -> Result<()> {
        let h = &self.header;
        self.file.write_all(&MAGIC)?;
        self.file.write_all(&FORMAT_VERSION.to_le_bytes())?;
        self.file.write_all(&h.sample_count.to_le_bytes())?;
        self.file.write_all(&(h.h as u64).to_le_bytes())?;
        self.file.write_all(&(h.w as u64).to_le_bytes())?;
        self.file.write_all(&h.dx.to_le_bytes())?;
        self.file.write_all(&h.dy.to_le_bytes())?;
        self.file.write_all(&h.dz.to_le_bytes())?;
        self.file.write_all(&h.config_digest)?;
        Ok(())
    }

    pub fn append(&mut self, sample: &Sample) -> Result<()> {
        let grid = &sample.field;
        if grid.h() != self.header.h || grid.w() != self.header.w {
            return Err(FieldError::Dimension(format!(
                "sample {}x{} does not match dataset {}x{}",
                grid.h(),
                grid.w(),
                self.header.h,
                self.header.w
            )));
        }
        self.file.write_all(&sample.area_side.to_le_bytes())?;
        self.file.write_all(&sample.seed.to_le_bytes())?;
        let src = match sample.source {
            SampleSource::Synthetic => 0u8,
            SampleSource::Measured => 1u8,
        };
        self.file.write_all(&[src, 0, 0, 0, 0, 0, 0, 0])?;
        for &v in grid.raw() {
            self.file.write_all(&(v as f32).to_le_bytes())?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<DatasetHeader> {
        self.header.sample_count = self.written;
        self.file.flush()?;
        let mut file = self.file.into_inner().map_err(|e| FieldError::Io(e.into_error()))?;
        file.seek(SeekFrom::Start(8))?;
        file.write_all(&self.written.to_le_bytes())?;
        file.flush()?;
        Ok(self.header)
    }
}

/// Random-access dataset reader. Each reader owns its file handle, so
/// multiple readers can work on the same file concurrently.
pub struct DatasetReader {
    file: BufReader<File>,
    header: DatasetHeader,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut reader = BufReader::new(file);

        if len < HEADER_LEN {
            return Err(FieldError::Truncated("file shorter than header".into()));
        }
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(FieldError::BadMagic);
        }
        let version = read_u32(&mut reader)?;
        if version != FORMAT_VERSION {
            return Err(FieldError::Version { found: version, expected: FORMAT_VERSION });
        }
        let sample_count = read_u64(&mut reader)?;
        let h = read_u64(&mut reader)? as usize;
        let w = read_u64(&mut reader)? as usize;
        let dx = read_f64(&mut reader)?;
        let dy = read_f64(&mut reader)?;
        let dz = read_f64(&mut reader)?;
        let mut config_digest = [0u8; 32];
        reader.read_exact(&mut config_digest)?;

        let header =
            DatasetHeader { sample_count, h, w, dx, dy, dz, format_version: version, config_digest };
        let expected = HEADER_LEN + sample_count * header.record_len();
        if len < expected {
            return Err(FieldError::Truncated(format!(
                "expected {expected} bytes for {sample_count} samples, file has {len}"
            )));
        }
        Ok(Self { file: reader, header })
    }

    /// Opens the file and additionally checks that it was generated from the
    /// expected config.
    pub fn open_expecting(path: &Path, digest: &[u8; 32]) -> Result<Self> {
        let reader = Self::open(path)?;
        if &reader.header.config_digest != digest {
            return Err(FieldError::DigestMismatch);
        }
        Ok(reader)
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.header.sample_count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn read_sample(&mut self, index: usize) -> Result<Sample> {
        if index >= self.len() {
            return Err(FieldError::Dimension(format!(
                "sample index {index} out of range ({} samples)",
                self.len()
            )));
        }
        let offset = HEADER_LEN + index as u64 * self.header.record_len();
        self.file.seek(SeekFrom::Start(offset))?;

        let area_side = read_f64(&mut self.file)?;
        let seed = read_u64(&mut self.file)?;
        let mut meta = [0u8; 8];
        self.file.read_exact(&mut meta)?;
        let source = match meta[0] {
            0 => SampleSource::Synthetic,
            1 => SampleSource::Measured,
            other => {
                return Err(FieldError::Truncated(format!("unknown sample source tag {other}")))
            }
        };

        let n = N_LAYERS * N_COMPONENTS * self.header.h * self.header.w;
        let mut bytes = vec![0u8; n * 4];
        self.file.read_exact(&mut bytes)?;
        let data: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();

        let (h, w) = (self.header.h, self.header.w);
        let dx = if source == SampleSource::Synthetic { area_side / w as f64 } else { self.header.dx };
        let dy = if source == SampleSource::Synthetic { area_side / w as f64 } else { self.header.dy };
        let dz = dx;
        let field = FieldGrid::from_data(h, w, dx, dy, dz, data)?;
        Sample::new(field, area_side, seed, source)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
