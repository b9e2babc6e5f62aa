use field_core::{Mask, Plane};

use crate::{check_plane_mask, BaselineError, Result};

/// Piecewise-linear interpolation over the Delaunay triangulation of given
/// pixel centers.
///
/// Only interpolation is supported: every missing pixel must lie inside the
/// convex hull of the given pixels, otherwise the task is rejected (the
/// outpainting case). Values inside each triangle are barycentric, so any
/// field linear in (x, y) is reproduced exactly.
pub fn linear_interp(input: &Plane, mask: &Mask) -> Result<Plane> {
    check_plane_mask(input, mask)?;
    let (h, w) = (input.h(), input.w());
    if !mask.is_mixed() {
        if mask.count_missing() == 0 {
            return Ok(input.clone());
        }
        return Err(BaselineError::UnsupportedTask("mask has no given pixels".into()));
    }

    let hull = convex_hull_of_given(mask);
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) == 1 && !point_in_hull(&hull, c as f64, r as f64) {
                return Err(BaselineError::UnsupportedTask(format!(
                    "missing pixel ({r},{c}) lies outside the convex hull of given pixels; \
                     linear interpolation does not extrapolate"
                )));
            }
        }
    }

    // Only the ring of given pixels bordering missing regions carries the
    // interpolation; everything further out is occluded by it.
    let ring = boundary_ring(mask);
    if ring.len() < 3 {
        return Err(BaselineError::UnsupportedTask("too few boundary pixels".into()));
    }
    let tri = delaunay(&ring);
    if tri.triangles.is_empty() {
        return Err(BaselineError::Conditioning("degenerate boundary geometry".into()));
    }

    let mut out = input.clone();
    let mut walk_start = 0usize;
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) != 1 {
                continue;
            }
            let (x, y) = (c as f64, r as f64);
            let found = tri.locate(x, y, walk_start).or_else(|| tri.locate_scan(x, y));
            let Some((t, bary)) = found else {
                return Err(BaselineError::Numerical(format!(
                    "no containing triangle for missing pixel ({r},{c})"
                )));
            };
            walk_start = t;
            let [a, b, cc] = tri.triangles[t];
            for comp in 0..3 {
                let va = value_at(input, &ring, a, comp);
                let vb = value_at(input, &ring, b, comp);
                let vc = value_at(input, &ring, cc, comp);
                out.set(comp, r, c, bary[0] * va + bary[1] * vb + bary[2] * vc);
            }
        }
    }
    Ok(out)
}

fn value_at(input: &Plane, ring: &[(usize, usize)], vertex: usize, comp: usize) -> f64 {
    let (r, c) = ring[vertex];
    input.get(comp, r, c)
}

/// Given pixels that touch a missing pixel (8-neighborhood).
fn boundary_ring(mask: &Mask) -> Vec<(usize, usize)> {
    let (h, w) = (mask.h(), mask.w());
    let mut ring = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) != 0 {
                continue;
            }
            let mut touches = false;
            'scan: for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr >= 0 && rr < h as i64 && cc >= 0 && cc < w as i64 {
                        if mask.get(rr as usize, cc as usize) == 1 {
                            touches = true;
                            break 'scan;
                        }
                    }
                }
            }
            if touches {
                ring.push((r, c));
            }
        }
    }
    ring
}

fn convex_hull_of_given(mask: &Mask) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for r in 0..mask.h() {
        for c in 0..mask.w() {
            if mask.get(r, c) == 0 {
                pts.push((c as f64, r as f64));
            }
        }
    }
    // Andrew monotone chain; points are already sorted row-major, re-sort by (x, y).
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn point_in_hull(hull: &[(f64, f64)], x: f64, y: f64) -> bool {
    if hull.len() < 3 {
        return false;
    }
    const EPS: f64 = 1e-9;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let cross = (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
        if cross < -EPS {
            return false;
        }
    }
    true
}

struct Triangulation {
    /// Jittered coordinates used for the predicates.
    points: Vec<(f64, f64)>,
    triangles: Vec<[usize; 3]>,
    /// Edge (lo, hi) -> adjacent triangle indices.
    adjacency: std::collections::HashMap<(usize, usize), Vec<usize>>,
}

impl Triangulation {
    fn build_adjacency(&mut self) {
        self.adjacency.clear();
        for (i, t) in self.triangles.iter().enumerate() {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (e.0.min(e.1), e.0.max(e.1));
                self.adjacency.entry(key).or_default().push(i);
            }
        }
    }

    /// Walks from `start` toward the containing triangle.
    fn locate(&self, x: f64, y: f64, start: usize) -> Option<(usize, [f64; 3])> {
        let mut current = start.min(self.triangles.len().saturating_sub(1));
        for _ in 0..self.triangles.len() {
            let bary = self.barycentric(current, x, y);
            if bary.iter().all(|&b| b >= -1e-9) {
                return Some((current, bary));
            }
            // Step to the neighbor across the most violated edge.
            let worst = (0..3).min_by(|&a, &b| bary[a].partial_cmp(&bary[b]).unwrap())?;
            let tri = self.triangles[current];
            let e = (tri[(worst + 1) % 3], tri[(worst + 2) % 3]);
            let key = (e.0.min(e.1), e.0.max(e.1));
            let next = self
                .adjacency
                .get(&key)?
                .iter()
                .copied()
                .find(|&i| i != current)?;
            current = next;
        }
        None
    }

    fn locate_scan(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        for t in 0..self.triangles.len() {
            let bary = self.barycentric(t, x, y);
            if bary.iter().all(|&b| b >= -1e-9) {
                return Some((t, bary));
            }
        }
        None
    }

    fn barycentric(&self, t: usize, x: f64, y: f64) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let (xa, ya) = self.points[a];
        let (xb, yb) = self.points[b];
        let (xc, yc) = self.points[c];
        let det = (yb - yc) * (xa - xc) + (xc - xb) * (ya - yc);
        let l0 = ((yb - yc) * (x - xc) + (xc - xb) * (y - yc)) / det;
        let l1 = ((yc - ya) * (x - xc) + (xa - xc) * (y - yc)) / det;
        [l0, l1, 1.0 - l0 - l1]
    }
}

/// Bowyer-Watson with a deterministic sub-nanopixel jitter that breaks the
/// cocircular degeneracies of grid-aligned points. The jitter only affects
/// the predicates; interpolated values still use exact pixel coordinates
/// through the barycentric weights of the jittered triangles, shifting
/// results by O(1e-9) pixels.
fn delaunay(ring: &[(usize, usize)]) -> Triangulation {
    let jitter = |r: usize, c: usize, salt: u64| -> f64 {
        let mut z = (r as u64) << 32 | (c as u64) ^ salt.wrapping_mul(0x9E3779B97F4A7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        ((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2e-9
    };
    let mut points: Vec<(f64, f64)> = ring
        .iter()
        .map(|&(r, c)| (c as f64 + jitter(r, c, 1), r as f64 + jitter(r, c, 2)))
        .collect();

    // Super-triangle comfortably containing everything.
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in &points {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1.0);
    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let s0 = points.len();
    points.push((cx - 20.0 * span, cy - 10.0 * span));
    points.push((cx + 20.0 * span, cy - 10.0 * span));
    points.push((cx, cy + 20.0 * span));

    let mut triangles: Vec<[usize; 3]> = vec![[s0, s0 + 1, s0 + 2]];
    for p in 0..s0 {
        let (px, py) = points[p];
        // Cavity: triangles whose circumcircle contains p.
        let mut bad: Vec<usize> = Vec::new();
        for (i, t) in triangles.iter().enumerate() {
            if in_circumcircle(&points, *t, px, py) {
                bad.push(i);
            }
        }
        // Boundary edges of the cavity appear exactly once.
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &bi in &bad {
            let [a, b, c] = triangles[bi];
            for e in [(a, b), (b, c), (c, a)] {
                let key = (e.0.min(e.1), e.0.max(e.1));
                if let Some(pos) = edges.iter().position(|&x| x == key) {
                    edges.remove(pos);
                } else {
                    edges.push(key);
                }
            }
        }
        for &bi in bad.iter().rev() {
            triangles.swap_remove(bi);
        }
        for (a, b) in edges {
            triangles.push([a, b, p]);
        }
    }
    triangles.retain(|t| t.iter().all(|&v| v < s0));
    let mut tri =
        Triangulation { points, triangles, adjacency: std::collections::HashMap::new() };
    tri.build_adjacency();
    tri
}

fn in_circumcircle(points: &[(f64, f64)], tri: [usize; 3], px: f64, py: f64) -> bool {
    let (ax, ay) = points[tri[0]];
    let (bx, by) = points[tri[1]];
    let (cx, cy) = points[tri[2]];
    // Ensure counter-clockwise orientation for the sign of the determinant.
    let orient = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    let (bx, by, cx, cy) = if orient > 0.0 { (bx, by, cx, cy) } else { (cx, cy, bx, by) };

    let adx = ax - px;
    let ady = ay - py;
    let bdx = bx - px;
    let bdy = by - py;
    let cdx = cx - px;
    let cdy = cy - py;
    let det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    det > 0.0
}
