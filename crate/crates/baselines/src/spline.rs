use field_core::{Mask, Plane};

use crate::linalg::{cholesky_in_place, cholesky_solve};
use crate::{check_plane_mask, BaselineError, Result};

/// Smooth cubic surface fit: a tensor-product cubic B-spline on a uniform
/// knot grid over the bounding box of the given pixels, least-squares
/// fitted per component and evaluated at the missing pixels.
///
/// The spline space contains every bicubic polynomial, so polynomial fields
/// are reproduced exactly wherever the normal equations are full rank.
/// Outside the knot box (the outpainting case) the boundary polynomial
/// pieces extend naturally, which is where the known runaway extrapolation
/// behaviour of global cubic surfaces comes from.
pub fn spline_interp(input: &Plane, mask: &Mask) -> Result<Plane> {
    check_plane_mask(input, mask)?;
    if mask.count_missing() == 0 {
        return Ok(input.clone());
    }
    let (h, w) = (input.h(), input.w());
    let given: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.get(r, c) == 0)
        .collect();
    let n = given.len();
    if n < 16 {
        return Err(BaselineError::Conditioning(format!(
            "cubic surface fit needs at least 16 given pixels, got {n}"
        )));
    }
    check_not_collinear(&given)?;

    let (rmin, rmax) = given.iter().fold((usize::MAX, 0), |acc, &(r, _)| {
        (acc.0.min(r), acc.1.max(r))
    });
    let (cmin, cmax) = given.iter().fold((usize::MAX, 0), |acc, &(_, c)| {
        (acc.0.min(c), acc.1.max(c))
    });

    let basis_r = BSplineBasis::new(rmin as f64, rmax as f64, intervals_for(n, rmax - rmin));
    let basis_c = BSplineBasis::new(cmin as f64, cmax as f64, intervals_for(n, cmax - cmin));
    let (mr, mc) = (basis_r.count(), basis_c.count());
    let m = mr * mc;

    // Normal equations from the 16 tensor weights of every data point.
    let mut normal = vec![0.0; m * m];
    let mut rhs = vec![vec![0.0; m]; 3];
    for &(r, c) in &given {
        let (sr, wr) = basis_r.eval(r as f64);
        let (sc, wc) = basis_c.eval(c as f64);
        let mut idx = [0usize; 16];
        let mut wgt = [0.0f64; 16];
        let mut t = 0;
        for (i, &wri) in wr.iter().enumerate() {
            for (j, &wcj) in wc.iter().enumerate() {
                idx[t] = (sr + i) * mc + (sc + j);
                wgt[t] = wri * wcj;
                t += 1;
            }
        }
        for a in 0..16 {
            let ia = idx[a];
            let wa = wgt[a];
            for b in 0..16 {
                normal[ia * m + idx[b]] += wa * wgt[b];
            }
            for comp in 0..3 {
                rhs[comp][ia] += wa * input.get(comp, r, c);
            }
        }
    }

    // Factor once, escalating a relative ridge when the data leaves basis
    // functions unsupported (scattered outpaint regions).
    let trace: f64 = (0..m).map(|i| normal[i * m + i]).sum();
    let mut ridge = 0.0;
    let mut factor = None;
    for attempt in 0..5 {
        let mut a = normal.clone();
        if ridge > 0.0 {
            for i in 0..m {
                a[i * m + i] += ridge;
            }
        }
        match cholesky_in_place(&mut a, m) {
            Ok(()) => {
                factor = Some(a);
                break;
            }
            Err(_) if attempt < 4 => {
                ridge = if ridge == 0.0 { 1e-10 * trace / m as f64 } else { ridge * 100.0 };
            }
            Err(e) => return Err(e),
        }
    }
    let factor = factor.ok_or_else(|| {
        BaselineError::Conditioning("spline normal equations not factorizable".into())
    })?;

    let mut out = input.clone();
    for comp in 0..3 {
        let mut coef = rhs[comp].clone();
        cholesky_solve(&factor, m, &mut coef);
        for r in 0..h {
            for c in 0..w {
                if mask.get(r, c) != 1 {
                    continue;
                }
                let (sr, wr) = basis_r.eval(r as f64);
                let (sc, wc) = basis_c.eval(c as f64);
                let mut v = 0.0;
                for (i, &wri) in wr.iter().enumerate() {
                    for (j, &wcj) in wc.iter().enumerate() {
                        v += wri * wcj * coef[(sr + i) * mc + (sc + j)];
                    }
                }
                out.set(comp, r, c, v);
            }
        }
    }
    Ok(out)
}

/// Knot-interval heuristic: enough resolution for dense data, few enough
/// coefficients that scattered data still supports most of the basis.
fn intervals_for(n_points: usize, extent_px: usize) -> usize {
    let by_density = ((n_points as f64).sqrt() / 6.0).floor() as usize;
    let by_extent = (extent_px / 4).max(1);
    by_density.clamp(1, by_extent.min(40))
}

fn check_not_collinear(points: &[(usize, usize)]) -> Result<()> {
    let n = points.len() as f64;
    let (mut sr, mut sc) = (0.0, 0.0);
    for &(r, c) in points {
        sr += r as f64;
        sc += c as f64;
    }
    let (mr, mc) = (sr / n, sc / n);
    let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
    for &(r, c) in points {
        let dr = r as f64 - mr;
        let dc = c as f64 - mc;
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    // Smaller eigenvalue of the 2x2 scatter matrix.
    let tr = srr + scc;
    let det = srr * scc - src * src;
    let lambda_min = tr / 2.0 - ((tr / 2.0) * (tr / 2.0) - det).max(0.0).sqrt();
    if lambda_min < 1e-9 * tr.max(1.0) {
        return Err(BaselineError::Conditioning(
            "given pixels are collinear; a surface fit is underdetermined".into(),
        ));
    }
    Ok(())
}

/// Clamped uniform cubic B-spline basis on [lo, hi]. Evaluation outside the
/// range extends the boundary polynomial pieces.
struct BSplineBasis {
    knots: Vec<f64>,
    intervals: usize,
}

impl BSplineBasis {
    fn new(lo: f64, hi: f64, intervals: usize) -> Self {
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let step = (hi - lo) / intervals as f64;
        // Clamped knot vector: degree+1 copies at both ends.
        let mut knots = vec![lo; 3];
        for i in 0..=intervals {
            knots.push(lo + step * i as f64);
        }
        knots.extend([hi, hi, hi]);
        Self { knots, intervals }
    }

    fn count(&self) -> usize {
        self.intervals + 3
    }

    /// Returns the first active basis index and the four cubic weights at
    /// `u` (Cox-de Boor, span clamped so out-of-range evaluation extends
    /// the end pieces).
    fn eval(&self, u: f64) -> (usize, [f64; 4]) {
        let k = 3usize;
        // Valid spans run from knots[3] to knots[3 + intervals].
        let mut span = k;
        while span < k + self.intervals - 1 && u >= self.knots[span + 1] {
            span += 1;
        }
        let mut left = [0.0f64; 4];
        let mut right = [0.0f64; 4];
        let mut weights = [0.0f64; 4];
        weights[0] = 1.0;
        for j in 1..=k {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = weights[r] / denom;
                weights[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            weights[j] = saved;
        }
        (span - k, weights)
    }
}
