use field_core::{Mask, Plane};

use crate::linalg::{cholesky_in_place, cholesky_solve};
use crate::{check_plane_mask, BaselineError, Result};

/// Gaussian-process regression settings. The kernel is
/// `k(p, q) = σ² exp(−‖p−q‖² / 2ℓ²)` over pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPConfig {
    /// Length scale in pixels.
    pub lengthscale: f64,
    pub signal_variance: f64,
    /// Diagonal regularization added to the kernel matrix.
    pub noise_jitter: f64,
}

impl Default for GPConfig {
    fn default() -> Self {
        Self { lengthscale: 10.0, signal_variance: 1.0, noise_jitter: 1e-8 }
    }
}

impl GPConfig {
    fn validate(&self) -> Result<()> {
        if self.lengthscale <= 0.0 || self.noise_jitter <= 0.0 || self.signal_variance <= 0.0 {
            return Err(BaselineError::Conditioning(
                "lengthscale, signal variance and jitter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// GP posterior mean per component at the missing pixels, prior mean zero
/// after per-component normalization of the given values.
pub fn gp_predict(input: &Plane, mask: &Mask, config: &GPConfig) -> Result<Plane> {
    check_plane_mask(input, mask)?;
    config.validate()?;
    if mask.count_missing() == 0 {
        return Ok(input.clone());
    }
    let (h, w) = (input.h(), input.w());
    let given: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.get(r, c) == 0)
        .collect();
    let n = given.len();
    if n == 0 {
        return Err(BaselineError::UnsupportedTask("mask has no given pixels".into()));
    }
    if n > 10_000 {
        eprintln!(
            "warning: gp_predict with {n} given points; the O(n³) solve will be slow"
        );
    }

    // K with escalating jitter: ×10, at most 3 retries past the configured one.
    let mut factor: Option<Vec<f64>> = None;
    let mut jitter = config.noise_jitter;
    for attempt in 0..4 {
        let mut k = build_kernel(&given, config, jitter);
        match cholesky_in_place(&mut k, n) {
            Ok(()) => {
                factor = Some(k);
                break;
            }
            Err(_) if attempt < 3 => jitter *= 10.0,
            Err(e) => {
                return Err(BaselineError::Conditioning(format!(
                    "kernel factorization failed after jitter escalation to {jitter:.1e}: {e}"
                )))
            }
        }
    }
    let factor = factor.ok_or_else(|| {
        BaselineError::Conditioning("kernel matrix not factorizable".into())
    })?;

    // Per-component normalization (center and scale by the given pixels),
    // then one shared prediction pass so every kernel value is computed once.
    let mut alphas = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut means = [0.0; 3];
    let mut scales = [1.0; 3];
    for comp in 0..3 {
        let values: Vec<f64> = given.iter().map(|&(r, c)| input.get(comp, r, c)).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = var.sqrt().max(1e-30);
        means[comp] = mean;
        scales[comp] = scale;
        let mut alpha: Vec<f64> = values.iter().map(|v| (v - mean) / scale).collect();
        cholesky_solve(&factor, n, &mut alpha);
        alphas[comp] = alpha;
    }

    let mut out = input.clone();
    let inv_2l2 = 1.0 / (2.0 * config.lengthscale * config.lengthscale);
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) != 1 {
                continue;
            }
            let mut acc = [0.0f64; 3];
            for (i, &(gr, gc)) in given.iter().enumerate() {
                let dr = r as f64 - gr as f64;
                let dc = c as f64 - gc as f64;
                let k = config.signal_variance * (-(dr * dr + dc * dc) * inv_2l2).exp();
                acc[0] += k * alphas[0][i];
                acc[1] += k * alphas[1][i];
                acc[2] += k * alphas[2][i];
            }
            for comp in 0..3 {
                out.set(comp, r, c, acc[comp] * scales[comp] + means[comp]);
            }
        }
    }
    Ok(out)
}

fn build_kernel(given: &[(usize, usize)], config: &GPConfig, jitter: f64) -> Vec<f64> {
    let n = given.len();
    let inv_2l2 = 1.0 / (2.0 * config.lengthscale * config.lengthscale);
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        let (ri, ci) = (given[i].0 as f64, given[i].1 as f64);
        for j in 0..=i {
            let dr = ri - given[j].0 as f64;
            let dc = ci - given[j].1 as f64;
            let v = config.signal_variance * (-(dr * dr + dc * dc) * inv_2l2).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += jitter;
    }
    k
}
