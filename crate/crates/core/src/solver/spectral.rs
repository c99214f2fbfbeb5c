//! Periodic grids, density fields, and FFT-based convolution.
//!
//! Convolutions against interaction kernels dominate the right-hand side of
//! the kinetic equation, so they are evaluated spectrally: the kernel is
//! sampled at minimum-image displacements, renormalized so its discrete mass
//! matches the analytic integral (keeping spatially constant densities exact
//! fixed points of the discretization), transformed once, and every
//! convolution is then two FFTs. Grids are dyadic so the transforms stay in
//! the fast power-of-two path.

use std::collections::BTreeMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernel::Kernel;

/// A periodic grid: `n` cells per axis of spacing `l/n` on a `d`-dimensional
/// torus of side `l`. Points are cell corners `i·h`; two-dimensional data is
/// laid out x-major (`idx = ix·n + iy`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    pub l: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::Config(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid resolution must be a power of two and at least 16, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!("box side must be positive, got {l}")));
        }
        Ok(Grid { d, n, l })
    }

    /// Cell spacing.
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of a grid point.
    pub fn point(&self, idx: usize) -> Point {
        let h = self.h();
        match self.d {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h],
        }
    }

    /// Minimum-image displacement of a grid point from the origin.
    pub fn min_image_point(&self, idx: usize) -> Point {
        let p = self.point(idx);
        let fold = |c: f64| if c > self.l / 2.0 { c - self.l } else { c };
        [fold(p[0]), if self.d == 2 { fold(p[1]) } else { 0.0 }]
    }
}

/// A real scalar field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl DensityField {
    pub fn constant(grid: Grid, value: f64) -> Self {
        DensityField { grid, data: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        DensityField { grid, data }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &DensityField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Grid L² distance `sqrt(h^d · Σ (a−b)²)`.
    pub fn l2_distance(&self, other: &DensityField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum();
        (self.grid.cell_volume() * s).sqrt()
    }
}

/// FFT engine bound to one grid, with a cache of kernel transforms.
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kernel_hats: BTreeMap<String, Vec<Complex64>>,
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        Spectral { grid, fwd, inv, kernel_hats: BTreeMap::new() }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn fft_nd(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.grid.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        if self.grid.d == 1 {
            plan.process(buf);
            return;
        }
        // Rows (contiguous in the y index), then columns via transpose.
        for row in buf.chunks_exact_mut(n) {
            plan.process(row);
        }
        transpose_square(buf, n);
        for row in buf.chunks_exact_mut(n) {
            plan.process(row);
        }
        transpose_square(buf, n);
    }

    /// Forward transform of a real field.
    pub fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_nd(&mut buf, false);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn backward_real(&self, mut hat: Vec<Complex64>) -> Vec<f64> {
        self.fft_nd(&mut hat, true);
        let n = self.grid.len() as f64;
        hat.into_iter().map(|c| c.re / n).collect()
    }

    /// Sample a kernel at minimum-image displacements and renormalize the
    /// samples so the discrete quadrature mass equals the analytic mass.
    pub fn sample_kernel(&self, kernel: &Kernel) -> Result<Vec<f64>> {
        let g = self.grid;
        let mut samples: Vec<f64> =
            (0..g.len()).map(|i| kernel.eval(g.min_image_point(i))).collect();
        let target = kernel.mass(g.d)?;
        let discrete: f64 = samples.iter().sum::<f64>() * g.cell_volume();
        if target == 0.0 && discrete.abs() < 1e-300 {
            return Ok(samples); // identically zero kernel
        }
        if discrete.abs() < 1e-12 * target.abs() {
            return Err(Error::Config(format!(
                "kernel {} is invisible at grid spacing {}; refine the grid",
                kernel.name,
                g.h()
            )));
        }
        let scale = target / discrete;
        for s in &mut samples {
            *s *= scale;
        }
        Ok(samples)
    }

    /// Transform of the sampled, mass-renormalized kernel, cached by name.
    pub fn kernel_hat(&mut self, kernel: &Kernel) -> Result<&[Complex64]> {
        if !self.kernel_hats.contains_key(&kernel.name) {
            let samples = self.sample_kernel(kernel)?;
            let hat = self.forward(&samples);
            self.kernel_hats.insert(kernel.name.clone(), hat);
        }
        Ok(&self.kernel_hats[&kernel.name])
    }

    /// Circular convolution `(k ∗ w)(x) ≈ h^d · Σ_j k(x − y_j) w(y_j)` via
    /// the cached kernel transform.
    pub fn conv(&mut self, kernel: &Kernel, w: &[f64]) -> Result<Vec<f64>> {
        let vol = self.grid.cell_volume();
        let norm = vol / self.grid.len() as f64;
        let mut buf = self.forward(w);
        {
            let khat = self.kernel_hat(kernel)?;
            for (b, k) in buf.iter_mut().zip(khat.iter()) {
                *b *= k;
            }
        }
        self.fft_nd(&mut buf, true);
        Ok(buf.into_iter().map(|c| c.re * norm).collect())
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
