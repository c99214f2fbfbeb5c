//! Periodic box geometry in one or two dimensions.
//!
//! All spatial state lives on the torus `[0, L)^d`. Points are stored as
//! fixed-size `[f64; 2]` arrays with the second coordinate unused (zero) in
//! one dimension, which keeps configurations copyable and avoids generic
//! dimension plumbing everywhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the torus. In d = 1 the second coordinate is always 0.
pub type Point = [f64; 2];

/// The periodic simulation/solution domain `[0, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusBox {
    /// Spatial dimension, 1 or 2.
    pub d: usize,
    /// Side length, identical in every dimension.
    pub l: f64,
}

impl TorusBox {
    pub fn new(d: usize, l: f64) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {d}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!("box side must be positive, got {l}")));
        }
        Ok(TorusBox { d, l })
    }

    /// Volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    /// Wrap a coordinate into `[0, L)`.
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let w = x.rem_euclid(self.l);
        // rem_euclid can return exactly L when x is a tiny negative number.
        if w >= self.l {
            0.0
        } else {
            w
        }
    }

    /// Wrap a point into the box; untouched coordinates stay zero in d = 1.
    pub fn wrap(&self, p: Point) -> Point {
        let mut q = [0.0; 2];
        for i in 0..self.d {
            q[i] = self.wrap_coord(p[i]);
        }
        q
    }

    /// Minimum-image displacement `a - b`, each component in `[-L/2, L/2)`.
    pub fn min_image(&self, a: Point, b: Point) -> Point {
        let mut d = [0.0; 2];
        for i in 0..self.d {
            let mut delta = a[i] - b[i];
            delta -= self.l * (delta / self.l).round();
            d[i] = delta;
        }
        d
    }

    /// Torus distance between two points.
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let d = self.min_image(a, b);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }
}
