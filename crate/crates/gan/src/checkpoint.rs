use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nn::{Scalar, Tensor};

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::params::ParamSet;
use crate::{GanError, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Full training state: parameters, optimizer moments, config, iteration
/// counter and the best-validation snapshot used for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub iteration: u64,
    pub normalization_scale: f64,
    pub generator: NamedBlobs,
    pub critic: NamedBlobs,
    pub gen_adam: AdamState,
    pub critic_adam: AdamState,
    /// Best-validation generator parameters, if validation has run.
    pub best_generator: Option<NamedBlobs>,
    pub best_val_mae_mt: Option<f64>,
}

/// Parameters as named f64 blobs, independent of the training precision.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedBlobs {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

impl NamedBlobs {
    pub fn from_params<S: Scalar>(params: &ParamSet<S>) -> Self {
        Self {
            names: params.names.clone(),
            shapes: params.tensors.iter().map(|t| t.shape.clone()).collect(),
            values: params.tensors.iter().map(Tensor::to_f64_vec).collect(),
        }
    }

    pub fn to_params<S: Scalar>(&self) -> ParamSet<S> {
        ParamSet {
            names: self.names.clone(),
            tensors: self
                .shapes
                .iter()
                .zip(&self.values)
                .map(|(shape, vals)| Tensor::from_f64_slice(shape, vals))
                .collect(),
        }
    }
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(GanError::Io)?;
        let mut w = BufWriter::new(file);
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;

        let config_text = self.config.to_canonical_string();
        write_bytes(&mut w, config_text.as_bytes())?;
        w.write_all(&self.iteration.to_le_bytes())?;
        w.write_all(&self.normalization_scale.to_le_bytes())?;

        write_blobs(&mut w, &self.generator)?;
        write_blobs(&mut w, &self.critic)?;
        write_adam(&mut w, &self.gen_adam)?;
        write_adam(&mut w, &self.critic_adam)?;

        match (&self.best_generator, self.best_val_mae_mt) {
            (Some(best), Some(mae)) => {
                w.write_all(&[1u8])?;
                w.write_all(&mae.to_le_bytes())?;
                write_blobs(&mut w, best)?;
            }
            _ => w.write_all(&[0u8])?,
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(GanError::Io)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(GanError::Checkpoint("bad checkpoint magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(GanError::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let config_text = String::from_utf8(read_bytes(&mut r)?)
            .map_err(|e| GanError::Checkpoint(format!("config not utf-8: {e}")))?;
        let config = TrainConfig::from_canonical_string(&config_text)?;
        let iteration = read_u64(&mut r)?;
        let normalization_scale = read_f64(&mut r)?;

        let generator = read_blobs(&mut r)?;
        let critic = read_blobs(&mut r)?;
        let gen_adam = read_adam(&mut r)?;
        let critic_adam = read_adam(&mut r)?;

        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let (best_generator, best_val_mae_mt) = if flag[0] == 1 {
            let mae = read_f64(&mut r)?;
            (Some(read_blobs(&mut r)?), Some(mae))
        } else {
            (None, None)
        };

        Ok(Self {
            config,
            iteration,
            normalization_scale,
            generator,
            critic,
            gen_adam,
            critic_adam,
            best_generator,
            best_val_mae_mt,
        })
    }

    /// Parameters used for inference: the best-validation snapshot when one
    /// exists, else the latest.
    pub fn inference_generator(&self) -> &NamedBlobs {
        self.best_generator.as_ref().unwrap_or(&self.generator)
    }
}

fn write_bytes(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    w.write_all(&(bytes.len() as u64).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_bytes(r: &mut impl Read) -> Result<Vec<u8>> {
    let len = read_u64(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn write_blobs(w: &mut impl Write, blobs: &NamedBlobs) -> Result<()> {
    w.write_all(&(blobs.names.len() as u64).to_le_bytes())?;
    for i in 0..blobs.names.len() {
        write_bytes(w, blobs.names[i].as_bytes())?;
        w.write_all(&(blobs.shapes[i].len() as u64).to_le_bytes())?;
        for &d in &blobs.shapes[i] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &blobs.values[i] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_blobs(r: &mut impl Read) -> Result<NamedBlobs> {
    let count = read_u64(r)? as usize;
    let mut blobs = NamedBlobs { names: Vec::new(), shapes: Vec::new(), values: Vec::new() };
    for _ in 0..count {
        let name = String::from_utf8(read_bytes(r)?)
            .map_err(|e| GanError::Checkpoint(format!("blob name not utf-8: {e}")))?;
        let rank = read_u64(r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut values = Vec::with_capacity(numel);
        for _ in 0..numel {
            values.push(read_f64(r)?);
        }
        blobs.names.push(name);
        blobs.shapes.push(shape);
        blobs.values.push(values);
    }
    Ok(blobs)
}

fn write_adam(w: &mut impl Write, adam: &AdamState) -> Result<()> {
    w.write_all(&adam.t.to_le_bytes())?;
    w.write_all(&adam.beta1.to_le_bytes())?;
    w.write_all(&adam.beta2.to_le_bytes())?;
    w.write_all(&adam.epsilon.to_le_bytes())?;
    w.write_all(&(adam.m.len() as u64).to_le_bytes())?;
    for i in 0..adam.m.len() {
        w.write_all(&(adam.m[i].len() as u64).to_le_bytes())?;
        for &v in &adam.m[i] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &adam.v[i] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_adam(r: &mut impl Read) -> Result<AdamState> {
    let t = read_u64(r)?;
    let beta1 = read_f64(r)?;
    let beta2 = read_f64(r)?;
    let epsilon = read_f64(r)?;
    let count = read_u64(r)? as usize;
    let mut m = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u64(r)? as usize;
        let mut mi = Vec::with_capacity(len);
        for _ in 0..len {
            mi.push(read_f64(r)?);
        }
        let mut vi = Vec::with_capacity(len);
        for _ in 0..len {
            vi.push(read_f64(r)?);
        }
        m.push(mi);
        v.push(vi);
    }
    Ok(AdamState { m, v, t, beta1, beta2, epsilon })
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
