//! Inpainting and outpainting task construction: random masks, masked
//! network inputs, result composition and the local-critic patch geometry.

use field_core::{hadamard, KeepSide, Mask, Plane};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error("no local patches: {0}")]
    NoPatch(String),
    #[error("field error: {0}")]
    Field(#[from] field_core::FieldError),
}

pub type Result<T> = std::result::Result<T, TaskError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Inpaint,
    Outpaint,
}

/// Geometry of a prediction task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Inpaint mask side in pixels before jitter.
    pub side_px: usize,
    /// Relative side jitter between batches; the drawn side is
    /// `side_px · u` with `u ~ U[1−jitter, 1+jitter]`.
    pub jitter_frac: f64,
    /// Number of given regions for outpainting.
    pub n_regions: usize,
    /// Side of each given region for outpainting (16 or 1 in the tasks here).
    pub region_side_px: usize,
    /// Padding around given regions for local-critic patches.
    pub s_pad: usize,
}

impl TaskSpec {
    pub fn inpaint(side_px: usize) -> Self {
        Self {
            kind: TaskKind::Inpaint,
            side_px,
            jitter_frac: 0.25,
            n_regions: 0,
            region_side_px: 0,
            s_pad: 8,
        }
    }

    pub fn outpaint(n_regions: usize, region_side_px: usize) -> Self {
        Self {
            kind: TaskKind::Outpaint,
            side_px: 0,
            jitter_frac: 0.0,
            n_regions,
            region_side_px,
            s_pad: 8,
        }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter_frac = jitter;
        self
    }

    pub fn validate(&self, h: usize, w: usize) -> Result<()> {
        match self.kind {
            TaskKind::Inpaint => {
                let max_side = (self.side_px as f64 * (1.0 + self.jitter_frac)).round() as usize;
                if self.side_px == 0 || max_side >= h.min(w) {
                    return Err(TaskError::Spec(format!(
                        "inpaint side {} (max jittered {max_side}) does not fit {h}x{w}",
                        self.side_px
                    )));
                }
            }
            TaskKind::Outpaint => {
                if self.n_regions == 0 || self.region_side_px == 0 {
                    return Err(TaskError::Spec(
                        "outpaint needs at least one region of positive side".into(),
                    ));
                }
                if self.n_regions * self.region_side_px * self.region_side_px >= h * w {
                    return Err(TaskError::Spec(format!(
                        "{} regions of {}² do not fit {h}x{w}",
                        self.n_regions, self.region_side_px
                    )));
                }
                if self.region_side_px > h.min(w) {
                    return Err(TaskError::Spec("region side exceeds grid".into()));
                }
            }
        }
        Ok(())
    }
}

/// Axis-aligned pixel rectangle (row0, col0, height, width), clipped to grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchRect {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalPatchSet {
    pub rects: Vec<PatchRect>,
}

/// One jittered square of missing pixels placed uniformly at random, fully
/// inside the grid.
pub fn inpaint_mask(rng: &mut impl Rng, spec: &TaskSpec, h: usize, w: usize) -> Result<Mask> {
    if spec.kind != TaskKind::Inpaint {
        return Err(TaskError::Spec("inpaint_mask requires an inpaint spec".into()));
    }
    spec.validate(h, w)?;
    let u = if spec.jitter_frac > 0.0 {
        rng.random_range(1.0 - spec.jitter_frac..1.0 + spec.jitter_frac)
    } else {
        1.0
    };
    let side = ((spec.side_px as f64 * u).round() as usize).max(4);
    if side >= h.min(w) {
        return Err(TaskError::Spec(format!("jittered side {side} does not fit {h}x{w}")));
    }
    let row0 = rng.random_range(0..=h - side);
    let col0 = rng.random_range(0..=w - side);
    let mut mask = Mask::zeros(h, w);
    for r in row0..row0 + side {
        for c in col0..col0 + side {
            mask.set(r, c, 1);
        }
    }
    Ok(mask)
}

/// All-missing mask except `n_regions` non-overlapping given squares placed
/// by rejection sampling.
pub fn outpaint_mask(rng: &mut impl Rng, spec: &TaskSpec, h: usize, w: usize) -> Result<Mask> {
    if spec.kind != TaskKind::Outpaint {
        return Err(TaskError::Spec("outpaint_mask requires an outpaint spec".into()));
    }
    spec.validate(h, w)?;
    let side = spec.region_side_px;
    let mut rects: Vec<(usize, usize)> = Vec::with_capacity(spec.n_regions);
    let max_attempts = 1000 * spec.n_regions;
    let mut attempts = 0;
    while rects.len() < spec.n_regions {
        attempts += 1;
        if attempts > max_attempts {
            return Err(TaskError::Spec(format!(
                "could not place {} disjoint {side}² regions in {h}x{w} after {max_attempts} tries",
                spec.n_regions
            )));
        }
        let r0 = rng.random_range(0..=h - side);
        let c0 = rng.random_range(0..=w - side);
        let overlaps = rects.iter().any(|&(rr, cc)| {
            rr < r0 + side && r0 < rr + side && cc < c0 + side && c0 < cc + side
        });
        if !overlaps {
            rects.push((r0, c0));
        }
    }
    let mut mask = Mask::ones(h, w);
    for (r0, c0) in rects {
        for r in r0..r0 + side {
            for c in c0..c0 + side {
                mask.set(r, c, 0);
            }
        }
    }
    Ok(mask)
}

/// Masked network input `B_in = B ⊙ (1 − m)`.
pub fn make_input(plane: &Plane, mask: &Mask) -> Result<Plane> {
    Ok(hadamard(plane, mask, KeepSide::Given)?)
}

/// Composition of a prediction: given pixels from the input, generated
/// values on the missing pixels, both exactly.
pub fn compose_result(input: &Plane, generated: &Plane, mask: &Mask) -> Result<Plane> {
    if input.h() != generated.h()
        || input.w() != generated.w()
        || input.h() != mask.h()
        || input.w() != mask.w()
    {
        return Err(TaskError::Spec(format!(
            "compose_result shapes differ: input {}x{}, generated {}x{}, mask {}x{}",
            input.h(),
            input.w(),
            generated.h(),
            generated.w(),
            mask.h(),
            mask.w()
        )));
    }
    let mut out = input.clone();
    for comp in 0..3 {
        let g = generated.component(comp);
        let o = out.component_mut(comp);
        for (i, &m) in mask.bits().iter().enumerate() {
            if m == 1 {
                o[i] = g[i];
            }
        }
    }
    Ok(out)
}

/// Rectangles the local critic sees.
///
/// Inpainting: one rectangle, the mask bounding box dilated by 4 pixels per
/// side. Outpainting: one rectangle per given region, dilated by `s_pad`.
/// All rectangles are clipped to the grid.
pub fn local_patches(mask: &Mask, spec: &TaskSpec) -> Result<LocalPatchSet> {
    let (h, w) = (mask.h(), mask.w());
    match spec.kind {
        TaskKind::Inpaint => {
            const INPAINT_DILATION: usize = 4;
            let bbox = bounding_box(mask, 1)
                .ok_or_else(|| TaskError::NoPatch("mask has no missing pixels".into()))?;
            Ok(LocalPatchSet { rects: vec![dilate_clip(bbox, INPAINT_DILATION, h, w)] })
        }
        TaskKind::Outpaint => {
            let regions = given_regions(mask, spec.region_side_px)?;
            if regions.is_empty() {
                return Err(TaskError::NoPatch("mask has no given regions".into()));
            }
            Ok(LocalPatchSet {
                rects: regions.into_iter().map(|r| dilate_clip(r, spec.s_pad, h, w)).collect(),
            })
        }
    }
}

fn bounding_box(mask: &Mask, value: u8) -> Option<PatchRect> {
    let (h, w) = (mask.h(), mask.w());
    let mut rmin = h;
    let mut rmax = 0usize;
    let mut cmin = w;
    let mut cmax = 0usize;
    let mut any = false;
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) == value {
                any = true;
                rmin = rmin.min(r);
                rmax = rmax.max(r);
                cmin = cmin.min(c);
                cmax = cmax.max(c);
            }
        }
    }
    any.then_some(PatchRect {
        row0: rmin,
        col0: cmin,
        height: rmax - rmin + 1,
        width: cmax - cmin + 1,
    })
}

fn dilate_clip(rect: PatchRect, pad: usize, h: usize, w: usize) -> PatchRect {
    let row0 = rect.row0.saturating_sub(pad);
    let col0 = rect.col0.saturating_sub(pad);
    let row1 = (rect.row0 + rect.height + pad).min(h);
    let col1 = (rect.col0 + rect.width + pad).min(w);
    PatchRect { row0, col0, height: row1 - row0, width: col1 - col0 }
}

/// Connected given regions recovered as the maximal square blocks the
/// outpaint sampler placed (greedy top-left scan).
fn given_regions(mask: &Mask, region_side: usize) -> Result<Vec<PatchRect>> {
    let (h, w) = (mask.h(), mask.w());
    let mut seen = vec![false; h * w];
    let mut regions = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) == 0 && !seen[r * w + c] {
                let side = region_side.min(h - r).min(w - c);
                for rr in r..r + side {
                    for cc in c..c + side {
                        if mask.get(rr, cc) == 0 {
                            seen[rr * w + cc] = true;
                        }
                    }
                }
                regions.push(PatchRect { row0: r, col0: c, height: side, width: side });
            }
        }
    }
    Ok(regions)
}
