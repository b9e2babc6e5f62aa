use field_core::{Mask, Plane};

use crate::{PhysicsError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceBin {
    /// Rounded Euclidean distance to the nearest given pixel.
    pub distance_px: usize,
    /// Mean absolute error over the pixels in this bin, mT.
    pub mae_mt: f64,
    pub count: usize,
}

/// Exact Euclidean distance from every pixel to the nearest given (mask = 0)
/// pixel, via the two-pass parabolic lower-envelope transform.
pub fn nearest_given_distances(mask: &Mask) -> Result<Vec<f64>> {
    if !mask.is_mixed() {
        return Err(PhysicsError::Contract(
            "distance transform needs both given and missing pixels".into(),
        ));
    }
    let (h, w) = (mask.h(), mask.w());
    const INF: f64 = 1e20;

    // Pass 1: per row, squared distance along the row.
    let mut sq = vec![INF; h * w];
    for r in 0..h {
        let f: Vec<f64> = (0..w)
            .map(|c| if mask.get(r, c) == 0 { 0.0 } else { INF })
            .collect();
        let d = dt_1d(&f);
        sq[r * w..(r + 1) * w].copy_from_slice(&d);
    }
    // Pass 2: per column over the row results.
    let mut out = vec![0.0; h * w];
    let mut col = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = sq[r * w + c];
        }
        let d = dt_1d(&col);
        for r in 0..h {
            out[r * w + c] = d[r].sqrt();
        }
    }
    Ok(out)
}

/// Squared-distance transform of a sampled function (Felzenszwalb-Huttenlocher).
fn dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -1e30;
    z[1] = 1e30;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = 1e30;
    }
    let mut k = 0usize;
    let mut out = vec![0.0; n];
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
    out
}

/// Bins the per-pixel absolute error of missing pixels by rounded distance
/// to the nearest given measurement. Bins run contiguously from 1 to the
/// maximum observed distance.
pub fn distance_profile(pred: &Plane, truth: &Plane, mask: &Mask) -> Result<Vec<DistanceBin>> {
    if pred.h() != truth.h() || pred.w() != truth.w() || pred.h() != mask.h() || pred.w() != mask.w()
    {
        return Err(PhysicsError::Dimension("distance_profile shape mismatch".into()));
    }
    let dist = nearest_given_distances(mask)?;
    let (h, w) = (mask.h(), mask.w());

    let mut max_bin = 0usize;
    let mut bins: Vec<(f64, usize)> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) != 1 {
                continue;
            }
            let i = r * w + c;
            let bin = dist[i].round().max(1.0) as usize;
            if bin > max_bin {
                max_bin = bin;
                bins.resize(max_bin, (0.0, 0));
            }
            let err = (0..3).map(|k| (pred.get(k, r, c) - truth.get(k, r, c)).abs()).sum::<f64>()
                / 3.0
                * 1e3;
            bins[bin - 1].0 += err;
            bins[bin - 1].1 += 1;
        }
    }
    Ok(bins
        .into_iter()
        .enumerate()
        .map(|(i, (sum, count))| DistanceBin {
            distance_px: i + 1,
            mae_mt: if count > 0 { sum / count as f64 } else { 0.0 },
            count,
        })
        .collect())
}
