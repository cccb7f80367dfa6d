//! Sampling grids for object and detection planes.

use crate::{Error, Result};

/// Rectangular, endpoint-inclusive sampling of a plane.
///
/// Sample `i` along x sits at `center_x - extent_x/2 + i * extent_x/(nx - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub extent_x: f64,
    pub extent_y: f64,
    pub center_x: f64,
    pub center_y: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, extent_x: f64, extent_y: f64) -> Result<Self> {
        Self::centered_at(nx, ny, extent_x, extent_y, 0.0, 0.0)
    }

    pub fn centered_at(
        nx: usize,
        ny: usize,
        extent_x: f64,
        extent_y: f64,
        center_x: f64,
        center_y: f64,
    ) -> Result<Self> {
        let g = GridSpec {
            nx,
            ny,
            extent_x,
            extent_y,
            center_x,
            center_y,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::param(format!(
                "grid needs at least 2x2 pixels, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.extent_x > 0.0 && self.extent_y > 0.0)
            || !self.extent_x.is_finite()
            || !self.extent_y.is_finite()
        {
            return Err(Error::param("grid extents must be positive and finite"));
        }
        if !(self.center_x.is_finite() && self.center_y.is_finite()) {
            return Err(Error::param("grid center must be finite"));
        }
        Ok(())
    }

    pub fn pitch(&self) -> (f64, f64) {
        (
            self.extent_x / (self.nx - 1) as f64,
            self.extent_y / (self.ny - 1) as f64,
        )
    }

    /// Coordinates of pixel (0, 0).
    pub fn origin(&self) -> (f64, f64) {
        (
            self.center_x - 0.5 * self.extent_x,
            self.center_y - 0.5 * self.extent_y,
        )
    }

    pub fn xs(&self) -> Vec<f64> {
        axis(self.nx, self.origin().0, self.pitch().0)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.ny, self.origin().1, self.pitch().1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same sampling with x and y exchanged.
    pub fn transposed(&self) -> Self {
        GridSpec {
            nx: self.ny,
            ny: self.nx,
            extent_x: self.extent_y,
            extent_y: self.extent_x,
            center_x: self.center_y,
            center_y: self.center_x,
        }
    }
}

pub(crate) fn axis(n: usize, origin: f64, pitch: f64) -> Vec<f64> {
    (0..n).map(|i| origin + pitch * i as f64).collect()
}
