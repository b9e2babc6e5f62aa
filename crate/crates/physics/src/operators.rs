use field_core::{FieldGrid, CENTER_LAYER};

/// df/dx along rows (unit spacing); second-order everywhere.
fn ddx(values: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for r in 0..h {
        let row = &values[r * w..(r + 1) * w];
        let orow = &mut out[r * w..(r + 1) * w];
        orow[0] = 0.5 * (-3.0 * row[0] + 4.0 * row[1] - row[2]);
        for c in 1..w - 1 {
            orow[c] = 0.5 * (row[c + 1] - row[c - 1]);
        }
        orow[w - 1] = 0.5 * (3.0 * row[w - 1] - 4.0 * row[w - 2] + row[w - 3]);
    }
}

/// df/dy along columns (unit spacing); second-order everywhere.
fn ddy(values: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for c in 0..w {
        out[c] = 0.5 * (-3.0 * values[c] + 4.0 * values[w + c] - values[2 * w + c]);
        for r in 1..h - 1 {
            out[r * w + c] = 0.5 * (values[(r + 1) * w + c] - values[(r - 1) * w + c]);
        }
        let last = (h - 1) * w + c;
        out[last] =
            0.5 * (3.0 * values[last] - 4.0 * values[last - w] + values[last - 2 * w]);
    }
}

fn ddz(grid: &FieldGrid, comp: usize, out: &mut [f64]) {
    let below = grid.component(0, comp);
    let above = grid.component(2, comp);
    let inv = 1.0 / (2.0 * grid.dz);
    for (o, (&a, &b)) in out.iter_mut().zip(above.iter().zip(below.iter())) {
        *o = (a - b) * inv;
    }
}

/// Per-pixel `∇·B` on the measurement plane, in T/m.
pub fn divergence(grid: &FieldGrid) -> Vec<f64> {
    let (h, w) = (grid.h(), grid.w());
    let mut dbx_dx = vec![0.0; h * w];
    let mut dby_dy = vec![0.0; h * w];
    let mut dbz_dz = vec![0.0; h * w];
    ddx(grid.component(CENTER_LAYER, 0), h, w, &mut dbx_dx);
    ddy(grid.component(CENTER_LAYER, 1), h, w, &mut dby_dy);
    ddz(grid, 2, &mut dbz_dz);
    let (ix, iy) = (1.0 / grid.dx, 1.0 / grid.dy);
    (0..h * w).map(|i| dbx_dx[i] * ix + dby_dy[i] * iy + dbz_dz[i]).collect()
}

/// In-plane part `∂Bx/∂x + ∂By/∂y` only, for samples without flanking layers.
pub fn in_plane_divergence(grid: &FieldGrid) -> Vec<f64> {
    let (h, w) = (grid.h(), grid.w());
    let mut dbx_dx = vec![0.0; h * w];
    let mut dby_dy = vec![0.0; h * w];
    ddx(grid.component(CENTER_LAYER, 0), h, w, &mut dbx_dx);
    ddy(grid.component(CENTER_LAYER, 1), h, w, &mut dby_dy);
    let (ix, iy) = (1.0 / grid.dx, 1.0 / grid.dy);
    (0..h * w).map(|i| dbx_dx[i] * ix + dby_dy[i] * iy).collect()
}

/// Per-pixel `∇×B` on the measurement plane, three component planes in T/m.
pub fn curl(grid: &FieldGrid) -> [Vec<f64>; 3] {
    let (h, w) = (grid.h(), grid.w());
    let n = h * w;
    let mut dbz_dy = vec![0.0; n];
    let mut dbz_dx = vec![0.0; n];
    let mut dby_dx = vec![0.0; n];
    let mut dbx_dy = vec![0.0; n];
    let mut dby_dz = vec![0.0; n];
    let mut dbx_dz = vec![0.0; n];
    ddy(grid.component(CENTER_LAYER, 2), h, w, &mut dbz_dy);
    ddx(grid.component(CENTER_LAYER, 2), h, w, &mut dbz_dx);
    ddx(grid.component(CENTER_LAYER, 1), h, w, &mut dby_dx);
    ddy(grid.component(CENTER_LAYER, 0), h, w, &mut dbx_dy);
    ddz(grid, 1, &mut dby_dz);
    ddz(grid, 0, &mut dbx_dz);

    let (ix, iy) = (1.0 / grid.dx, 1.0 / grid.dy);
    let cx: Vec<f64> = (0..n).map(|i| dbz_dy[i] * iy - dby_dz[i]).collect();
    let cy: Vec<f64> = (0..n).map(|i| dbx_dz[i] - dbz_dx[i] * ix).collect();
    let cz: Vec<f64> = (0..n).map(|i| dby_dx[i] * ix - dbx_dy[i] * iy).collect();
    [cx, cy, cz]
}

/// z-component of the curl, computable without flanking layers.
pub fn in_plane_curl_z(grid: &FieldGrid) -> Vec<f64> {
    let (h, w) = (grid.h(), grid.w());
    let mut dby_dx = vec![0.0; h * w];
    let mut dbx_dy = vec![0.0; h * w];
    ddx(grid.component(CENTER_LAYER, 1), h, w, &mut dby_dx);
    ddy(grid.component(CENTER_LAYER, 0), h, w, &mut dbx_dy);
    let (ix, iy) = (1.0 / grid.dx, 1.0 / grid.dy);
    (0..h * w).map(|i| dby_dx[i] * ix - dbx_dy[i] * iy).collect()
}

/// `mean |∇·B| · dx`, reported in mT per pixel.
pub fn divergence_mt_per_px(grid: &FieldGrid) -> f64 {
    let div = divergence(grid);
    mean_abs(&div) * grid.dx * 1e3
}

/// `mean ‖∇×B‖₁ · dx`, reported in µT per pixel.
pub fn curl_l1_ut_per_px(grid: &FieldGrid) -> f64 {
    let [cx, cy, cz] = curl(grid);
    let n = cx.len() as f64;
    let sum: f64 = (0..cx.len()).map(|i| cx[i].abs() + cy[i].abs() + cz[i].abs()).sum();
    sum / n * grid.dx * 1e6
}

pub(crate) fn mean_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
}
