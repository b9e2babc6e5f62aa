use rand::Rng;

use crate::prism::PrismMagnet;
use crate::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EasyAxisDistribution {
    /// Uniform on the unit sphere.
    UniformSphere,
    /// Uniform on the unit circle in the xy-plane (physical-setup variant).
    InPlane,
}

/// Configuration of the virtual magnet structure and its rendered field.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyConfig {
    /// Lattice cells in x, y, z.
    pub lattice: (usize, usize, usize),
    pub occupancy_prob: f64,
    /// Cube side length in meters.
    pub cube_side: f64,
    /// Remanent polarization magnitude in tesla.
    pub remanence: f64,
    /// Measurement-hole side range in meters, drawn uniformly per sample.
    pub hole_side_range: (f64, f64),
    pub easy_axis: EasyAxisDistribution,
    /// Rendered resolution (H, W).
    pub resolution: (usize, usize),
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            lattice: (10, 10, 5),
            occupancy_prob: 0.5,
            cube_side: 0.001,
            remanence: 1.2,
            hole_side_range: (0.001, 0.004),
            easy_axis: EasyAxisDistribution::UniformSphere,
            resolution: (256, 256),
        }
    }
}

impl AssemblyConfig {
    /// Desk-scale variant used by fast runs and smoke tests.
    pub fn desk() -> Self {
        Self { resolution: (64, 64), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.occupancy_prob) {
            return Err(SimError::Domain(format!(
                "occupancy_prob must be in [0,1], got {}",
                self.occupancy_prob
            )));
        }
        if self.cube_side <= 0.0 || self.remanence < 0.0 || self.remanence > 2.0 {
            return Err(SimError::Domain(
                "cube_side must be positive and remanence within [0, 2] T".into(),
            ));
        }
        let (lo, hi) = self.hole_side_range;
        let extent = self.lattice.0 as f64 * self.cube_side;
        if lo < 0.0 || lo > hi || hi >= extent {
            return Err(SimError::Domain(format!(
                "hole_side_range ({lo}, {hi}) must lie within the lattice extent {extent}"
            )));
        }
        if self.resolution.0 < 3 || self.resolution.1 < 3 {
            return Err(SimError::Domain("resolution must be at least 3x3".into()));
        }
        if self.lattice.0 == 0 || self.lattice.1 == 0 || self.lattice.2 == 0 {
            return Err(SimError::Domain("lattice must be non-empty".into()));
        }
        Ok(())
    }

    /// Canonical key/value text used for digests; field order is fixed.
    pub fn canonical_string(&self) -> String {
        let axis = match self.easy_axis {
            EasyAxisDistribution::UniformSphere => "uniform_sphere",
            EasyAxisDistribution::InPlane => "in_plane",
        };
        format!(
            "lattice={}x{}x{};occupancy_prob={:e};cube_side={:e};remanence={:e};hole_side_range={:e},{:e};easy_axis={};resolution={}x{}",
            self.lattice.0,
            self.lattice.1,
            self.lattice.2,
            self.occupancy_prob,
            self.cube_side,
            self.remanence,
            self.hole_side_range.0,
            self.hole_side_range.1,
            axis,
            self.resolution.0,
            self.resolution.1,
        )
    }
}

/// One realized magnet structure with its magnet-free measurement hole.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetAssembly {
    pub magnets: Vec<PrismMagnet>,
    /// Side length of the central magnet-free square, meters.
    pub hole_side: f64,
}

/// Draws a random assembly: every lattice cell outside the central hole
/// column of the middle z-row is occupied independently, occupied cells get
/// a cube with the configured remanence and a random easy axis. The
/// measurement plane sits at the vertical mid-height of the stack.
pub fn sample_assembly(rng: &mut impl Rng, config: &AssemblyConfig) -> Result<MagnetAssembly> {
    config.validate()?;
    let (nx, ny, nz) = config.lattice;
    let s = config.cube_side;
    let hole_side = if config.hole_side_range.0 == config.hole_side_range.1 {
        config.hole_side_range.0
    } else {
        rng.random_range(config.hole_side_range.0..config.hole_side_range.1)
    };

    let mid_z = nz / 2;
    let mut magnets = Vec::new();
    for ix in 0..nx {
        let cx = (ix as f64 + 0.5 - nx as f64 / 2.0) * s;
        for iy in 0..ny {
            let cy = (iy as f64 + 0.5 - ny as f64 / 2.0) * s;
            for iz in 0..nz {
                let cz = (iz as f64 + 0.5 - nz as f64 / 2.0) * s;
                let occupied = rng.random::<f64>() < config.occupancy_prob;

                // The hole clears the cells of the middle z-row whose
                // footprint overlaps the measurement square.
                let in_hole = iz == mid_z
                    && cx.abs() < (s + hole_side) / 2.0
                    && cy.abs() < (s + hole_side) / 2.0;
                if !occupied || in_hole {
                    continue;
                }
                let axis = draw_axis(rng, config.easy_axis);
                let j = [
                    config.remanence * axis[0],
                    config.remanence * axis[1],
                    config.remanence * axis[2],
                ];
                magnets.push(PrismMagnet::cube([cx, cy, cz], s, j));
            }
        }
    }
    Ok(MagnetAssembly { magnets, hole_side })
}

fn draw_axis(rng: &mut impl Rng, dist: EasyAxisDistribution) -> [f64; 3] {
    match dist {
        EasyAxisDistribution::UniformSphere => {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let rho = (1.0 - z * z).sqrt();
            [rho * phi.cos(), rho * phi.sin(), z]
        }
        EasyAxisDistribution::InPlane => {
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            [phi.cos(), phi.sin(), 0.0]
        }
    }
}
