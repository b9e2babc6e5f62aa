use field_core::{FieldGrid, Mask, Plane};

use crate::operators::{
    curl_l1_ut_per_px, divergence_mt_per_px, in_plane_curl_z, in_plane_divergence, mean_abs,
};
use crate::profile::{distance_profile, DistanceBin};
use crate::{PhysicsError, Result};

/// Mean absolute error over all three components restricted to missing
/// (mask = 1) pixels, in millitesla.
pub fn mae_mt(pred: &Plane, truth: &Plane, mask: &Mask) -> Result<f64> {
    check_shapes(pred, truth, mask)?;
    let missing = mask.count_missing();
    if missing == 0 {
        return Err(PhysicsError::Contract("mae needs at least one missing pixel".into()));
    }
    let mut sum = 0.0;
    for comp in 0..3 {
        let p = pred.component(comp);
        let t = truth.component(comp);
        for (i, &m) in mask.bits().iter().enumerate() {
            if m == 1 {
                sum += (p[i] - t[i]).abs();
            }
        }
    }
    Ok(sum / (3 * missing) as f64 * 1e3)
}

/// The two l1 reconstruction losses: `L_match` over given pixels against the
/// masked input, `L_mimic` over missing pixels against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionLosses {
    /// Sum of absolute differences on given pixels, tesla.
    pub l_match: f64,
    /// Sum of absolute differences on missing pixels, tesla.
    pub l_mimic: f64,
    /// `l_match` as a per-element mean in mT.
    pub l_match_mean_mt: f64,
    /// `l_mimic` as a per-element mean in mT.
    pub l_mimic_mean_mt: f64,
}

pub fn reconstruction_losses(
    pred: &Plane,
    input: &Plane,
    truth: &Plane,
    mask: &Mask,
) -> Result<ReconstructionLosses> {
    check_shapes(pred, truth, mask)?;
    check_shapes(pred, input, mask)?;
    let mut l_match = 0.0;
    let mut l_mimic = 0.0;
    for comp in 0..3 {
        let p = pred.component(comp);
        let x0 = input.component(comp);
        let t = truth.component(comp);
        for (i, &m) in mask.bits().iter().enumerate() {
            if m == 0 {
                l_match += (x0[i] - p[i]).abs();
            } else {
                l_mimic += (t[i] - p[i]).abs();
            }
        }
    }
    let given = mask.count_given().max(1);
    let missing = mask.count_missing().max(1);
    Ok(ReconstructionLosses {
        l_match,
        l_mimic,
        l_match_mean_mt: l_match / (3 * given) as f64 * 1e3,
        l_mimic_mean_mt: l_mimic / (3 * missing) as f64 * 1e3,
    })
}

/// Everything a benchmark row needs for one (prediction, sample) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mae_mt: f64,
    /// Full divergence loss; `None` when the sample has no flanking layers.
    pub l_div_mt_px: Option<f64>,
    /// Full curl loss; `None` when the sample has no flanking layers.
    pub l_curl_ut_px: Option<f64>,
    /// In-plane divergence part, always available.
    pub l_div_inplane_mt_px: f64,
    /// z-component of the curl, always available.
    pub l_curl_z_ut_px: f64,
    /// Per-pixel mean absolute error over components, mT, row-major H×W.
    pub error_plane_mt: Vec<f64>,
    pub distance_profile: Vec<DistanceBin>,
}

impl MetricReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("metric\tvalue\n");
        out.push_str(&format!("mae_mt\t{:.6e}\n", self.mae_mt));
        match self.l_div_mt_px {
            Some(v) => out.push_str(&format!("l_div_mt_px\t{v:.6e}\n")),
            None => out.push_str("l_div_mt_px\tn/a\n"),
        }
        match self.l_curl_ut_px {
            Some(v) => out.push_str(&format!("l_curl_ut_px\t{v:.6e}\n")),
            None => out.push_str("l_curl_ut_px\tn/a\n"),
        }
        out.push_str(&format!("l_div_inplane_mt_px\t{:.6e}\n", self.l_div_inplane_mt_px));
        out.push_str(&format!("l_curl_z_ut_px\t{:.6e}\n", self.l_curl_z_ut_px));
        out.push_str("\ndistance_px\tmae_mt\tcount\n");
        for bin in &self.distance_profile {
            out.push_str(&format!("{}\t{:.6e}\t{}\n", bin.distance_px, bin.mae_mt, bin.count));
        }
        out
    }
}

/// Builds the full metric report for a predicted measurement plane.
///
/// The composed grid used for the physics losses takes the prediction as its
/// central layer and the ground-truth flanking layers for z-derivatives.
pub fn evaluate_prediction(
    pred: &Plane,
    truth_grid: &FieldGrid,
    mask: &Mask,
    has_flanking_layers: bool,
) -> Result<MetricReport> {
    let truth = truth_grid.center_plane();
    let mae = mae_mt(pred, &truth, mask)?;
    let composed = truth_grid
        .with_center_plane(pred)
        .map_err(|e| PhysicsError::Dimension(e.to_string()))?;

    let (l_div, l_curl) = if has_flanking_layers {
        (Some(divergence_mt_per_px(&composed)), Some(curl_l1_ut_per_px(&composed)))
    } else {
        (None, None)
    };
    let div_xy = in_plane_divergence(&composed);
    let curl_z = in_plane_curl_z(&composed);

    let (h, w) = (pred.h(), pred.w());
    let mut error_plane = vec![0.0; h * w];
    for comp in 0..3 {
        let p = pred.component(comp);
        let t = truth.component(comp);
        for i in 0..h * w {
            error_plane[i] += (p[i] - t[i]).abs() / 3.0 * 1e3;
        }
    }

    Ok(MetricReport {
        mae_mt: mae,
        l_div_mt_px: l_div,
        l_curl_ut_px: l_curl,
        l_div_inplane_mt_px: mean_abs(&div_xy) * composed.dx * 1e3,
        l_curl_z_ut_px: mean_abs(&curl_z) * composed.dx * 1e6,
        error_plane_mt: error_plane,
        distance_profile: distance_profile(pred, &truth, mask)?,
    })
}

fn check_shapes(a: &Plane, b: &Plane, mask: &Mask) -> Result<()> {
    if a.h() != b.h() || a.w() != b.w() || a.h() != mask.h() || a.w() != mask.w() {
        return Err(PhysicsError::Dimension(format!(
            "planes {}x{} / {}x{} vs mask {}x{}",
            a.h(),
            a.w(),
            b.h(),
            b.w(),
            mask.h(),
            mask.w()
        )));
    }
    Ok(())
}
