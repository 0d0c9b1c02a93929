use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Geometry, frequency and antenna layout of a 2-D TM tomography experiment.
///
/// The imaging domain is a square of side `domain_side` centered on the
/// origin; emitters and receivers sit equally spaced on a circle of radius
/// `ring_radius` around it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingSetup {
    pub frequency: f64,
    pub background_permittivity: C64,
    pub domain_side: f64,
    pub grid_side: usize,
    pub num_emitters: usize,
    pub num_receivers: usize,
    pub ring_radius: f64,
    pub seed: u64,
}

impl ImagingSetup {
    /// One-wavelength square domain at 3 GHz in vacuum, antennas on a ring of
    /// radius one wavelength.
    pub fn wavelength_square(grid_side: usize, num_emitters: usize, num_receivers: usize) -> Self {
        let frequency = 3.0e9;
        let wavelength = SPEED_OF_LIGHT / frequency;
        Self {
            frequency,
            background_permittivity: C64::new(1.0, 0.0),
            domain_side: wavelength,
            grid_side,
            num_emitters,
            num_receivers,
            ring_radius: wavelength,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(Error::config(format!("grid_side must be >= 2, got {}", self.grid_side)));
        }
        if self.num_emitters == 0 {
            return Err(Error::config("num_emitters must be >= 1"));
        }
        if self.num_receivers == 0 {
            return Err(Error::config("num_receivers must be >= 1"));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::config(format!("frequency must be > 0, got {}", self.frequency)));
        }
        if !(self.domain_side > 0.0 && self.domain_side.is_finite()) {
            return Err(Error::config("domain_side must be > 0"));
        }
        let eps = self.background_permittivity;
        if eps.im != 0.0 || !(eps.re > 0.0) {
            return Err(Error::config(format!(
                "background permittivity must be real and positive, got {eps}"
            )));
        }
        let half_diagonal = self.domain_side * std::f64::consts::SQRT_2 / 2.0;
        if !(self.ring_radius > half_diagonal) {
            return Err(Error::config(format!(
                "ring_radius {} must exceed the domain half-diagonal {} (antennas inside D)",
                self.ring_radius, half_diagonal
            )));
        }
        Ok(())
    }

    /// Free-space wavelength `c / f`.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    /// Background wavenumber `k_b = ω sqrt(ε_b) / c`.
    pub fn background_wavenumber(&self) -> f64 {
        2.0 * PI * self.frequency * self.background_permittivity.re.sqrt() / SPEED_OF_LIGHT
    }

    pub fn num_cells(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn emitter_positions(&self) -> Vec<[f64; 2]> {
        ring(self.num_emitters, self.ring_radius)
    }

    pub fn receiver_positions(&self) -> Vec<[f64; 2]> {
        ring(self.num_receivers, self.ring_radius)
    }
}

fn ring(count: usize, radius: f64) -> Vec<[f64; 2]> {
    (0..count)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / count as f64;
            [radius * phi.cos(), radius * phi.sin()]
        })
        .collect()
}

/// Uniform square lattice of pulse-basis cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    /// Row-major, x fastest.
    pub cell_centers: Vec<[f64; 2]>,
    pub cell_size: f64,
    /// Radius of the disc with the same area as one cell.
    pub equivalent_radius: f64,
    pub grid_side: usize,
}

impl GridGeometry {
    pub fn num_cells(&self) -> usize {
        self.cell_centers.len()
    }

    pub fn domain_side(&self) -> f64 {
        self.cell_size * self.grid_side as f64
    }
}

/// Lays out `grid_side²` cells covering the domain, row-major with x fastest.
pub fn build_grid(setup: &ImagingSetup) -> Result<GridGeometry> {
    setup.validate()?;
    let side = setup.grid_side;
    let h = setup.domain_side / side as f64;
    let origin = -0.5 * setup.domain_side;
    let mut cell_centers = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            cell_centers.push([
                origin + (col as f64 + 0.5) * h,
                origin + (row as f64 + 0.5) * h,
            ]);
        }
    }
    Ok(GridGeometry {
        cell_centers,
        cell_size: h,
        equivalent_radius: h / PI.sqrt(),
        grid_side: side,
    })
}
