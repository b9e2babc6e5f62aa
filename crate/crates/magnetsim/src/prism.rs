use crate::{Result, SimError};

/// A uniformly magnetized rectangular prism.
///
/// `magnetization` is the polarization J = µ0·M in tesla (remanence times
/// the unit easy axis); geometry is in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrismMagnet {
    pub center: [f64; 3],
    pub half_sides: [f64; 3],
    pub magnetization: [f64; 3],
}

impl PrismMagnet {
    pub fn cube(center: [f64; 3], side: f64, magnetization: [f64; 3]) -> Self {
        let h = side / 2.0;
        Self { center, half_sides: [h, h, h], magnetization }
    }

    /// True when the point lies inside the prism or on its boundary, where
    /// the surface terms of the field expression are singular.
    pub fn contains(&self, point: [f64; 3]) -> bool {
        (0..3).all(|a| (point[a] - self.center[a]).abs() <= self.half_sides[a])
    }
}

/// Symmetric 3×3 tensor `T` with `B = T · J` for points outside the prism
/// (row-major [Txx, Txy, Txz, Tyx, ..., Tzz]).
///
/// Built from the corner expansion of the surface-charge potential: with
/// ξ_i = x − X_i over the two prism faces per axis and r the corner
/// distance, off-diagonal entries sum ±ln(coordinate + r) and diagonal
/// entries sum ±atan2 terms. The trace vanishes outside the magnet.
pub fn demag_tensor(prism: &PrismMagnet, point: [f64; 3]) -> [f64; 9] {
    let xi = [
        point[0] - (prism.center[0] - prism.half_sides[0]),
        point[0] - (prism.center[0] + prism.half_sides[0]),
    ];
    let eta = [
        point[1] - (prism.center[1] - prism.half_sides[1]),
        point[1] - (prism.center[1] + prism.half_sides[1]),
    ];
    let zeta = [
        point[2] - (prism.center[2] - prism.half_sides[2]),
        point[2] - (prism.center[2] + prism.half_sides[2]),
    ];

    let mut t_xx = 0.0;
    let mut t_yy = 0.0;
    let mut t_zz = 0.0;
    let mut t_xy = 0.0;
    let mut t_xz = 0.0;
    let mut t_yz = 0.0;

    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                // (−1)^(i+j+k) with 1-based indices: +1 for an odd number of
                // second faces.
                let sign = if (i + j + k) % 2 == 0 { -1.0 } else { 1.0 };
                let (x, y, z) = (xi[i], eta[j], zeta[k]);
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let r = (x2 + y2 + z2).sqrt();

                t_xx += sign * (y * z).atan2(x * r);
                t_yy += sign * (z * x).atan2(y * r);
                t_zz += sign * (x * y).atan2(z * r);
                t_xy -= sign * ln_coord_plus_r(z, r, x2 + y2);
                t_xz -= sign * ln_coord_plus_r(y, r, z2 + x2);
                t_yz -= sign * ln_coord_plus_r(x, r, y2 + z2);
            }
        }
    }

    let c = 1.0 / (4.0 * std::f64::consts::PI);
    [
        c * t_xx,
        c * t_xy,
        c * t_xz,
        c * t_xy,
        c * t_yy,
        c * t_yz,
        c * t_xz,
        c * t_yz,
        c * t_zz,
    ]
}

/// `ln(c + r)`, rewritten as `ln(comp²) − ln(r − c)` for negative `c` where
/// the direct form cancels catastrophically near the corner axes.
#[inline]
fn ln_coord_plus_r(c: f64, r: f64, comp_sq: f64) -> f64 {
    if c > 0.0 {
        (c + r).ln()
    } else {
        comp_sq.ln() - (r - c).ln()
    }
}

/// B in tesla at `point`, which must lie strictly outside the prism.
pub fn prism_field(prism: &PrismMagnet, point: [f64; 3]) -> Result<[f64; 3]> {
    if prism.half_sides.iter().any(|&h| h <= 0.0) {
        return Err(SimError::Domain("prism half sides must be positive".into()));
    }
    if prism.contains(point) {
        return Err(SimError::Domain(format!(
            "point {point:?} lies inside or on the prism at {:?}",
            prism.center
        )));
    }
    Ok(field_unchecked(prism, point))
}

/// Fast evaluation for rendering loops: the three log sums fold into one
/// logarithm of a product ratio each, and the T_zz diagonal comes from the
/// vanishing trace outside the magnet. Agrees with [`demag_tensor`] to
/// machine precision away from the prism; the renderer's pointwise oracle
/// test pins that equivalence.
#[inline]
pub(crate) fn field_unchecked(prism: &PrismMagnet, point: [f64; 3]) -> [f64; 3] {
    let xi = [
        point[0] - (prism.center[0] - prism.half_sides[0]),
        point[0] - (prism.center[0] + prism.half_sides[0]),
    ];
    let eta = [
        point[1] - (prism.center[1] - prism.half_sides[1]),
        point[1] - (prism.center[1] + prism.half_sides[1]),
    ];
    let zeta = [
        point[2] - (prism.center[2] - prism.half_sides[2]),
        point[2] - (prism.center[2] + prism.half_sides[2]),
    ];

    let mut t_xx = 0.0;
    let mut t_yy = 0.0;
    // Product accumulators: numerator for positive corner signs,
    // denominator for negative ones, per log-sum.
    let mut xy_num = 1.0;
    let mut xy_den = 1.0;
    let mut xz_num = 1.0;
    let mut xz_den = 1.0;
    let mut yz_num = 1.0;
    let mut yz_den = 1.0;

    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let positive = (i + j + k) % 2 == 1;
                let (x, y, z) = (xi[i], eta[j], zeta[k]);
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let r = (x2 + y2 + z2).sqrt();

                let sign = if positive { 1.0 } else { -1.0 };
                t_xx += sign * (y * z).atan2(x * r);
                t_yy += sign * (z * x).atan2(y * r);

                // Stable positive factors of exp(coordinate-plus-r logs).
                let fz = if z > 0.0 { z + r } else { (x2 + y2) / (r - z) };
                let fy = if y > 0.0 { y + r } else { (z2 + x2) / (r - y) };
                let fx = if x > 0.0 { x + r } else { (y2 + z2) / (r - x) };
                if positive {
                    xy_num *= fz;
                    xz_num *= fy;
                    yz_num *= fx;
                } else {
                    xy_den *= fz;
                    xz_den *= fy;
                    yz_den *= fx;
                }
            }
        }
    }

    let c = 1.0 / (4.0 * std::f64::consts::PI);
    let t_xx = c * t_xx;
    let t_yy = c * t_yy;
    let t_zz = -(t_xx + t_yy);
    let t_xy = -c * (xy_num / xy_den).ln();
    let t_xz = -c * (xz_num / xz_den).ln();
    let t_yz = -c * (yz_num / yz_den).ln();

    let j = prism.magnetization;
    [
        t_xx * j[0] + t_xy * j[1] + t_xz * j[2],
        t_xy * j[0] + t_yy * j[1] + t_yz * j[2],
        t_xz * j[0] + t_yz * j[1] + t_zz * j[2],
    ]
}

