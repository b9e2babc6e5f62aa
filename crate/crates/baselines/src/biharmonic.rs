use field_core::{Mask, Plane};

use crate::linalg::BandedSpd;
use crate::{check_plane_mask, BaselineError, Result};

/// Biharmonic inpainting: fills missing pixels with the minimizer of the
/// squared discrete Laplacian, given pixels held as Dirichlet data.
///
/// Writing `L` for the 5-point Laplacian over all interior grid pixels,
/// the unknowns solve `(LᵀL) x = −LᵀL g`, whose interior rows are the
/// classical 13-point bilaplacian stencil and whose rows near the grid
/// boundary reduce layerwise to what the 5-point operator supports. The
/// system is solved directly with a banded Cholesky factorization; the
/// relative residual must come out below 1e-10.
pub fn biharmonic_inpaint(input: &Plane, mask: &Mask) -> Result<Plane> {
    check_plane_mask(input, mask)?;
    if mask.count_missing() == 0 {
        return Ok(input.clone());
    }
    if mask.count_given() == 0 {
        return Err(BaselineError::UnsupportedTask("mask has no given pixels".into()));
    }
    let (h, w) = (input.h(), input.w());

    // Work on the bounding box of the missing region, padded by the stencil
    // reach; everything outside is untouched Dirichlet data.
    let (mut r0, mut r1, mut c0, mut c1) = (h, 0usize, w, 0usize);
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) == 1 {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    let r0 = r0.saturating_sub(2);
    let c0 = c0.saturating_sub(2);
    let r1 = (r1 + 3).min(h);
    let c1 = (c1 + 3).min(w);
    let (bh, bw) = (r1 - r0, c1 - c0);

    // Unknown numbering: row-major over missing pixels inside the box.
    let mut unknown_id = vec![usize::MAX; bh * bw];
    let mut unknown_pos: Vec<(usize, usize)> = Vec::new();
    for br in 0..bh {
        for bc in 0..bw {
            if mask.get(r0 + br, c0 + bc) == 1 {
                unknown_id[br * bw + bc] = unknown_pos.len();
                unknown_pos.push((br, bc));
            }
        }
    }
    let n = unknown_pos.len();
    let bandwidth = bandwidth_of(&unknown_id, &unknown_pos, bw);

    let mut system = BandedSpd::zeros(n, bandwidth);
    let mut out = input.clone();

    // Laplacian stencil centers: every pixel of the padded box. Interior
    // centers carry the full 5-point stencil (so interior unknowns see the
    // 13-point bilaplacian); centers on the grid boundary reduce layerwise
    // to the neighbors that exist, which keeps boundary-touching unknowns
    // (outpainting) constrained without losing symmetry.
    let centers: Vec<(usize, usize)> =
        (r0..r1).flat_map(|r| (c0..c1).map(move |c| (r, c))).collect();

    let stencil = |r: usize, c: usize| -> Vec<(usize, usize, f64)> {
        let mut entries = Vec::with_capacity(5);
        let mut count = 0.0;
        if r > 0 {
            entries.push((r - 1, c, 1.0));
            count += 1.0;
        }
        if r + 1 < h {
            entries.push((r + 1, c, 1.0));
            count += 1.0;
        }
        if c > 0 {
            entries.push((r, c - 1, 1.0));
            count += 1.0;
        }
        if c + 1 < w {
            entries.push((r, c + 1, 1.0));
            count += 1.0;
        }
        entries.push((r, c, -count));
        entries
    };

    for &(r, c) in &centers {
        let entries = stencil(r, c);
        let any_unknown = entries.iter().any(|&(rr, cc, _)| {
            in_box(rr, cc, r0, r1, c0, c1) && unknown_id[(rr - r0) * bw + (cc - c0)] != usize::MAX
        });
        if !any_unknown {
            continue;
        }
        for &(ra, ca, wa) in &entries {
            let ia = id_of(&unknown_id, ra, ca, r0, r1, c0, c1, bw);
            let Some(ia) = ia else { continue };
            for &(rb, cb, wb) in &entries {
                if let Some(ib) = id_of(&unknown_id, rb, cb, r0, r1, c0, c1, bw) {
                    if ib <= ia {
                        system.add(ia, ib, wa * wb);
                    }
                }
            }
        }
    }
    system.factor()?;

    for comp in 0..3 {
        // RHS: b = −Lᵀ(L g) restricted to unknowns, unknowns zeroed in g.
        let mut b = vec![0.0; n];
        for &(r, c) in &centers {
            let entries = stencil(r, c);
            let mut lg = 0.0;
            let mut touches_unknown = false;
            for &(rr, cc, wgt) in &entries {
                if id_of(&unknown_id, rr, cc, r0, r1, c0, c1, bw).is_some() {
                    touches_unknown = true;
                } else {
                    lg += wgt * input.get(comp, rr, cc);
                }
            }
            if !touches_unknown {
                continue;
            }
            for &(rr, cc, wgt) in &entries {
                if let Some(i) = id_of(&unknown_id, rr, cc, r0, r1, c0, c1, bw) {
                    b[i] -= wgt * lg;
                }
            }
        }

        let rhs_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = b.clone();
        system.solve(&mut x);

        // Residual check against the matrix-free operator.
        if rhs_norm > 0.0 {
            let residual = residual_norm(&x, &b, &centers, &unknown_id, r0, r1, c0, c1, bw, &stencil);
            let rel = residual / rhs_norm;
            if rel > 1e-10 {
                return Err(BaselineError::Numerical(format!(
                    "biharmonic solve residual {rel:.3e} exceeds 1e-10"
                )));
            }
        }

        for (i, &(br, bc)) in unknown_pos.iter().enumerate() {
            out.set(comp, r0 + br, c0 + bc, x[i]);
        }
    }
    Ok(out)
}

#[inline]
fn in_box(r: usize, c: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> bool {
    r >= r0 && r < r1 && c >= c0 && c < c1
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn id_of(
    unknown_id: &[usize],
    r: usize,
    c: usize,
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
    bw: usize,
) -> Option<usize> {
    if !in_box(r, c, r0, r1, c0, c1) {
        return None;
    }
    let id = unknown_id[(r - r0) * bw + (c - c0)];
    (id != usize::MAX).then_some(id)
}

fn bandwidth_of(unknown_id: &[usize], unknown_pos: &[(usize, usize)], bw: usize) -> usize {
    // Coupled unknowns are at most two rows apart; the widest index gap
    // bounds the band.
    let mut band = 0usize;
    for (i, &(br, bc)) in unknown_pos.iter().enumerate() {
        for (dr, dc) in [
            (0i64, 1i64),
            (0, 2),
            (1, -1),
            (1, 0),
            (1, 1),
            (2, 0),
        ] {
            let (rr, cc) = (br as i64 + dr, bc as i64 + dc);
            if rr < 0 || cc < 0 {
                continue;
            }
            let (rr, cc) = (rr as usize, cc as usize);
            if cc >= bw {
                continue;
            }
            if let Some(&j) = unknown_id.get(rr * bw + cc) {
                if j != usize::MAX {
                    band = band.max(j.abs_diff(i));
                }
            }
        }
    }
    band
}

#[allow(clippy::too_many_arguments)]
fn residual_norm(
    x: &[f64],
    b: &[f64],
    centers: &[(usize, usize)],
    unknown_id: &[usize],
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
    bw: usize,
    stencil: &impl Fn(usize, usize) -> Vec<(usize, usize, f64)>,
) -> f64 {
    // r = b − Ax with A applied matrix-free as LᵀL.
    let mut ax = vec![0.0; x.len()];
    for &(r, c) in centers {
        let entries = stencil(r, c);
        let mut lx = 0.0;
        for &(rr, cc, wgt) in &entries {
            if let Some(i) = id_of(unknown_id, rr, cc, r0, r1, c0, c1, bw) {
                lx += wgt * x[i];
            }
        }
        if lx == 0.0 {
            continue;
        }
        for &(rr, cc, wgt) in &entries {
            if let Some(i) = id_of(unknown_id, rr, cc, r0, r1, c0, c1, bw) {
                ax[i] += wgt * lx;
            }
        }
    }
    (0..x.len()).map(|i| (b[i] - ax[i]).powi(2)).sum::<f64>().sqrt()
}
