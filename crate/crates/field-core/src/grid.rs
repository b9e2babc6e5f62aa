use crate::{FieldError, Result};

pub const N_LAYERS: usize = 3;
pub const N_COMPONENTS: usize = 3;

/// Index of the measurement plane among the three stored z-layers.
pub const CENTER_LAYER: usize = 1;

/// A 3-layer, 3-component field patch on a regular grid.
///
/// Layout is `[layer][component][row][col]` with layer 0 below the
/// measurement plane, layer 1 the plane itself and layer 2 above it.
/// Component order is (Bx, By, Bz) everywhere. Values are tesla, spacings
/// are meters.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    h: usize,
    w: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    data: Vec<f64>,
}

impl FieldGrid {
    pub fn zeros(h: usize, w: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        if h < 3 || w < 3 {
            return Err(FieldError::Dimension(format!(
                "grid must be at least 3x3, got {h}x{w}"
            )));
        }
        if dx <= 0.0 || dy <= 0.0 || dz <= 0.0 {
            return Err(FieldError::Domain(format!(
                "spacings must be positive, got dx={dx} dy={dy} dz={dz}"
            )));
        }
        Ok(Self { h, w, dx, dy, dz, data: vec![0.0; N_LAYERS * N_COMPONENTS * h * w] })
    }

    pub fn from_data(h: usize, w: usize, dx: f64, dy: f64, dz: f64, data: Vec<f64>) -> Result<Self> {
        let mut grid = Self::zeros(h, w, dx, dy, dz)?;
        if data.len() != grid.data.len() {
            return Err(FieldError::Dimension(format!(
                "expected {} values, got {}",
                grid.data.len(),
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(FieldError::Domain("field values must be finite".into()));
        }
        grid.data = data;
        Ok(grid)
    }

    /// Builds a grid from a closure `f(layer_z, x, y) -> (bx, by, bz)` where
    /// coordinates are physical (meters), centered on the patch.
    pub fn from_fn(
        h: usize,
        w: usize,
        dx: f64,
        dy: f64,
        dz: f64,
        mut f: impl FnMut(f64, f64, f64) -> [f64; 3],
    ) -> Result<Self> {
        let mut grid = Self::zeros(h, w, dx, dy, dz)?;
        for layer in 0..N_LAYERS {
            let z = (layer as f64 - 1.0) * dz;
            for row in 0..h {
                let y = (row as f64 - (h as f64 - 1.0) / 2.0) * dy;
                for col in 0..w {
                    let x = (col as f64 - (w as f64 - 1.0) / 2.0) * dx;
                    let b = f(z, x, y);
                    for (comp, &v) in b.iter().enumerate() {
                        grid.set(layer, comp, row, col, v);
                    }
                }
            }
        }
        Ok(grid)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    fn idx(&self, layer: usize, comp: usize, row: usize, col: usize) -> usize {
        ((layer * N_COMPONENTS + comp) * self.h + row) * self.w + col
    }

    #[inline]
    pub fn get(&self, layer: usize, comp: usize, row: usize, col: usize) -> f64 {
        self.data[self.idx(layer, comp, row, col)]
    }

    #[inline]
    pub fn set(&mut self, layer: usize, comp: usize, row: usize, col: usize, v: f64) {
        let i = self.idx(layer, comp, row, col);
        self.data[i] = v;
    }

    /// One `[H][W]` component slice of one layer.
    pub fn component(&self, layer: usize, comp: usize) -> &[f64] {
        let start = (layer * N_COMPONENTS + comp) * self.h * self.w;
        &self.data[start..start + self.h * self.w]
    }

    pub fn component_mut(&mut self, layer: usize, comp: usize) -> &mut [f64] {
        let start = (layer * N_COMPONENTS + comp) * self.h * self.w;
        let end = start + self.h * self.w;
        &mut self.data[start..end]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Copies the 3-component measurement plane out of the grid.
    pub fn center_plane(&self) -> Plane {
        self.layer_plane(CENTER_LAYER)
    }

    pub fn layer_plane(&self, layer: usize) -> Plane {
        let start = layer * N_COMPONENTS * self.h * self.w;
        Plane {
            h: self.h,
            w: self.w,
            data: self.data[start..start + N_COMPONENTS * self.h * self.w].to_vec(),
        }
    }

    /// Returns a copy of the grid with the measurement plane replaced.
    pub fn with_center_plane(&self, plane: &Plane) -> Result<Self> {
        if plane.h != self.h || plane.w != self.w {
            return Err(FieldError::Dimension(format!(
                "plane {}x{} does not match grid {}x{}",
                plane.h, plane.w, self.h, self.w
            )));
        }
        let mut out = self.clone();
        let start = CENTER_LAYER * N_COMPONENTS * self.h * self.w;
        out.data[start..start + N_COMPONENTS * self.h * self.w].copy_from_slice(&plane.data);
        Ok(out)
    }

    /// Divides every value by `scale`. Fails on non-positive scales.
    pub fn normalize(&self, scale: f64) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(FieldError::Domain(format!("scale must be positive, got {scale}")));
        }
        let mut out = self.clone();
        for v in &mut out.data {
            *v /= scale;
        }
        Ok(out)
    }

    /// Inverse of [`FieldGrid::normalize`].
    pub fn denormalize(&self, scale: f64) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(FieldError::Domain(format!("scale must be positive, got {scale}")));
        }
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= scale;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// A single-layer, 3-component field plane in `[component][row][col]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0.0; N_COMPONENTS * h * w] }
    }

    pub fn from_data(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != N_COMPONENTS * h * w {
            return Err(FieldError::Dimension(format!(
                "expected {} values, got {}",
                N_COMPONENTS * h * w,
                data.len()
            )));
        }
        Ok(Self { h, w, data })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, comp: usize, row: usize, col: usize) -> f64 {
        self.data[(comp * self.h + row) * self.w + col]
    }

    #[inline]
    pub fn set(&mut self, comp: usize, row: usize, col: usize, v: f64) {
        self.data[(comp * self.h + row) * self.w + col] = v;
    }

    pub fn component(&self, comp: usize) -> &[f64] {
        &self.data[comp * self.h * self.w..(comp + 1) * self.h * self.w]
    }

    pub fn component_mut(&mut self, comp: usize) -> &mut [f64] {
        let hw = self.h * self.w;
        &mut self.data[comp * hw..(comp + 1) * hw]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn scale(&self, s: f64) -> Plane {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }
}

/// Which side of a mask a Hadamard product keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepSide {
    /// Keep measured pixels (mask 0), zero the rest: `x ⊙ (1 − m)`.
    Given,
    /// Keep missing pixels (mask 1), zero the rest: `x ⊙ m`.
    Missing,
}

/// Binary mask over a field plane; 1 marks missing values, 0 measured ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    h: usize,
    w: usize,
    bits: Vec<u8>,
}

impl Mask {
    pub fn new(h: usize, w: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != h * w {
            return Err(FieldError::Dimension(format!(
                "mask bits length {} does not match {h}x{w}",
                bits.len()
            )));
        }
        if !bits.iter().all(|&b| b <= 1) {
            return Err(FieldError::Domain("mask entries must be 0 or 1".into()));
        }
        Ok(Self { h, w, bits })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, bits: vec![0; h * w] }
    }

    pub fn ones(h: usize, w: usize) -> Self {
        Self { h, w, bits: vec![1; h * w] }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.w + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.bits[row * self.w + col] = v;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_missing(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn count_given(&self) -> usize {
        self.bits.len() - self.count_missing()
    }

    /// True when the mask has both given and missing pixels, which every
    /// prediction task requires.
    pub fn is_mixed(&self) -> bool {
        let missing = self.count_missing();
        missing > 0 && missing < self.bits.len()
    }

    /// Serializes the mask as a binary PGM (P5) image, 0 = given, 255 = missing.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.w, self.h).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b == 1 { 255u8 } else { 0u8 }));
        out
    }
}

/// Hadamard masking of a 3-component plane: zeroes the non-selected side
/// of the mask on every component.
pub fn hadamard(plane: &Plane, mask: &Mask, keep: KeepSide) -> Result<Plane> {
    if plane.h != mask.h || plane.w != mask.w {
        return Err(FieldError::Dimension(format!(
            "plane {}x{} vs mask {}x{}",
            plane.h, plane.w, mask.h, mask.w
        )));
    }
    let mut out = plane.clone();
    let hw = plane.h * plane.w;
    for comp in 0..N_COMPONENTS {
        let slice = &mut out.data[comp * hw..(comp + 1) * hw];
        for (v, &m) in slice.iter_mut().zip(mask.bits.iter()) {
            let keep_this = match keep {
                KeepSide::Given => m == 0,
                KeepSide::Missing => m == 1,
            };
            if !keep_this {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Synthetic,
    Measured,
}

/// One dataset entry: a field patch plus the provenance needed to reproduce
/// or interpret it. Measured samples carry no usable flanking layers, so
/// z-derivative physics is disabled for them.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub field: FieldGrid,
    pub area_side: f64,
    pub seed: u64,
    pub source: SampleSource,
}

impl Sample {
    pub fn new(field: FieldGrid, area_side: f64, seed: u64, source: SampleSource) -> Result<Self> {
        if area_side <= 0.0 {
            return Err(FieldError::Domain(format!("area_side must be positive, got {area_side}")));
        }
        Ok(Self { field, area_side, seed, source })
    }

    pub fn has_flanking_layers(&self) -> bool {
        self.source == SampleSource::Synthetic
    }
}
