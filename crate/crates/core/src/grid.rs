//! Scalar and vector fields on a regular 2-D pixel grid, plus the
//! forward-difference gradient and its negative adjoint.
//!
//! Storage is row-major: pixel `(i, j)` with row `i < height` and column
//! `j < width` lives at `i * width + j`. The first gradient component (`x`)
//! differences along the row index `i`, the second (`y`) along the column
//! index `j`. Grid spacing is 1 and boundaries are Neumann: the last
//! difference in each direction is zero.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::CounterRng;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_extent(width, height)?;
        if values.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite value at row {}, column {}",
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a grid from `f(row, column)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        let values = (0..width * height).map(|n| f(n / width, n % width)).collect();
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        assert_eq!(self.extent(), other.extent(), "extent mismatch");
        Self {
            width: self.width,
            height: self.height,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn ensure_same_extent(&self, other: &Self) -> Result<()> {
        if self.extent() != other.extent() {
            return Err(Error::ExtentMismatch {
                expected: self.extent(),
                actual: other.extent(),
            });
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        row_sums(self.width, &self.values, |v| v).into_iter().sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.extent(), other.extent(), "extent mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True if every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of pixels with value `>= 0.5`.
    pub fn count_foreground(&self) -> usize {
        self.values.iter().filter(|&&v| v >= 0.5).count()
    }

    /// Number of pixels where the two masks disagree (compared at 0.5).
    pub fn count_mismatch(&self, other: &Self) -> usize {
        assert_eq!(self.extent(), other.extent(), "extent mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| (**a >= 0.5) != (**b >= 0.5))
            .count()
    }
}

/// Per-pixel 2-vector field, stored as two row-major component planes.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    width: usize,
    height: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DualField {
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "empty grid");
        Self {
            width,
            height,
            x: vec![0.0; width * height],
            y: vec![0.0; width * height],
        }
    }

    pub fn new(width: usize, height: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_extent(width, height)?;
        let n = width * height;
        if x.len() != n || y.len() != n {
            return Err(Error::InvalidGrid(format!(
                "component lengths {} and {} for a {width}x{height} grid",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite dual value".into()));
        }
        Ok(Self {
            width,
            height,
            x,
            y,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 2] {
        let n = row * self.width + col;
        [self.x[n], self.y[n]]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.extent(), other.extent(), "extent mismatch");
        let dx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let dy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        dx + dy
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

fn check_extent(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidGrid(format!("zero extent {width}x{height}")));
    }
    Ok(())
}

/// Row-wise partial sums reduced in row order; the result does not depend on
/// the rayon thread count.
pub(crate) fn row_sums(width: usize, values: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    values
        .par_chunks(width)
        .map(|row| row.iter().map(|&v| f(v)).sum())
        .collect()
}

/// Forward differences with Neumann boundary.
pub fn gradient(u: &ImageGrid) -> DualField {
    let mut p = DualField::zeros(u.width, u.height);
    gradient_into(u.values(), u.width, u.height, &mut p.x, &mut p.y);
    p
}

pub(crate) fn gradient_into(u: &[f64], width: usize, height: usize, gx: &mut [f64], gy: &mut [f64]) {
    gx.par_chunks_mut(width)
        .zip(gy.par_chunks_mut(width))
        .enumerate()
        .for_each(|(i, (rx, ry))| {
            let row = &u[i * width..(i + 1) * width];
            if i + 1 < height {
                let below = &u[(i + 1) * width..(i + 2) * width];
                for j in 0..width {
                    rx[j] = below[j] - row[j];
                }
            } else {
                rx.fill(0.0);
            }
            for j in 0..width - 1 {
                ry[j] = row[j + 1] - row[j];
            }
            ry[width - 1] = 0.0;
        });
}

/// Backward differences matched to [`gradient`] so that
/// `<gradient(u), p> = -<u, divergence(p)>` exactly.
pub fn divergence(p: &DualField) -> ImageGrid {
    let mut out = vec![0.0; p.len()];
    divergence_into(&p.x, &p.y, p.width, p.height, &mut out);
    ImageGrid {
        width: p.width,
        height: p.height,
        values: out,
    }
}

pub(crate) fn divergence_into(px: &[f64], py: &[f64], width: usize, height: usize, out: &mut [f64]) {
    out.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
        for (j, d) in row.iter_mut().enumerate() {
            *d = divergence_at(px, py, width, height, i, j);
        }
    });
}

#[inline]
pub(crate) fn divergence_at(
    px: &[f64],
    py: &[f64],
    width: usize,
    height: usize,
    i: usize,
    j: usize,
) -> f64 {
    let n = i * width + j;
    let mut d = 0.0;
    if i + 1 < height {
        d += px[n];
    }
    if i > 0 {
        d -= px[n - width];
    }
    if j + 1 < width {
        d += py[n];
    }
    if j > 0 {
        d -= py[n - 1];
    }
    d
}

/// Upper bound on the squared operator norm of [`gradient`] at unit spacing.
pub fn operator_norm_bound() -> f64 {
    8.0
}

/// Power-iteration estimate of the largest eigenvalue of `-div ∘ grad` on a
/// `width x height` grid, i.e. the squared operator norm of the gradient.
pub fn estimate_operator_norm_sq(width: usize, height: usize, iterations: usize) -> f64 {
    let rng = CounterRng::new(0x5EED);
    let mut u = ImageGrid::from_fn(width, height, |i, j| {
        rng.uniform((i * width + j) as u64) - 0.5
    });
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let norm = u.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let scaled = u.map(|v| v / norm);
        let next = divergence(&gradient(&scaled)).map(|v| -v);
        lambda = scaled.dot(&next);
        u = next;
    }
    lambda
}
