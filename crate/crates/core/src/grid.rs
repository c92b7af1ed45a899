//! Uniform tensor grids, sampled functions and discrete L² / sup norms.
//!
//! Points are stored row-major with the first coordinate varying slowest.
//! Norms use the plain Riemann sum `Δx^d Σ v_i²` over all `n^d` nodes.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    n: usize,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, n: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("grid bounds must have equal, nonzero length"));
        }
        if n < 2 {
            return Err(invalid(format!("grid needs at least 2 points per dimension, got {n}")));
        }
        for (a, b) in lower.iter().zip(&upper) {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(invalid(format!("degenerate grid interval [{a}, {b}]")));
            }
        }
        Ok(Self { lower, upper, n })
    }

    /// The cube `[a, b]^d` with `n` points per side.
    pub fn cube(dim: usize, a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(vec![a; dim], vec![b; dim], n)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.n - 1) as f64
    }

    /// Quadrature weight of one node, `Π Δx_k`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    /// Total quadrature mass `n^d · Π Δx_k`, the discrete stand-in for |Ω|.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing(axis)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.coord(k, i))
            .collect()
    }

    /// Calls `f(flat_index, point)` for every node in storage order.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut x: Vec<f64> = (0..d).map(|k| self.coord(k, 0)).collect();
        for flat in 0..self.len() {
            f(flat, &x);
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < self.n {
                    x[k] = self.coord(k, idx[k]);
                    break;
                }
                idx[k] = 0;
                x[k] = self.coord(k, 0);
            }
        }
    }

    pub fn sample(&self, mut f: impl FnMut(&[f64]) -> f64) -> SampledFunction {
        let mut values = Vec::with_capacity(self.len());
        self.for_each_point(|_, x| values.push(f(x)));
        SampledFunction {
            grid: self.clone(),
            values,
        }
    }

    /// Index range `[lo, hi)` of nodes whose coordinate along `axis` lies in `[a, b]`.
    pub fn index_range(&self, axis: usize, a: f64, b: f64) -> (usize, usize) {
        let h = self.spacing(axis);
        let lo = ((a - self.lower[axis]) / h - 1e-9).ceil().max(0.0);
        let hi = ((b - self.lower[axis]) / h + 1e-9).floor() + 1.0;
        let hi = hi.min(self.n as f64);
        if hi <= lo {
            return (0, 0);
        }
        (lo as usize, hi as usize)
    }
}

/// Function values on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                context: "sampled function".into(),
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete inner product `Δx^d Σ f_i g_i`.
    pub fn inner(&self, other: &SampledFunction) -> Result<f64> {
        check_same_grid(&self.grid, &other.grid)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<SampledFunction> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(SampledFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }
}

fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(invalid("sampled functions live on different grids"));
    }
    Ok(())
}

/// Discrete L² and sup distance between two samplings of the same grid.
pub fn grid_norms(f: &SampledFunction, g: &SampledFunction) -> Result<(f64, f64)> {
    let diff = f.sub(g)?;
    Ok((diff.l2_norm(), diff.sup_norm()))
}

/// Samples of a compactly supported function on a rectangular sub-block of a 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// First node index along each axis.
    pub start: [usize; 2],
    /// Number of nodes along each axis.
    pub extent: [usize; 2],
    /// Row-major values, `extent[0] * extent[1]` of them.
    pub values: Vec<f64>,
}

impl Patch {
    pub fn empty() -> Self {
        Self {
            start: [0, 0],
            extent: [0, 0],
            values: Vec::new(),
        }
    }

    /// Sum of squares (multiply by the cell volume for the squared L² norm).
    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `Σ patch · full` over the patch support, `full` being an n×n row-major array.
    pub fn dot_full(&self, full: &[f64], n: usize) -> f64 {
        let mut s = 0.0;
        for r in 0..self.extent[0] {
            let row = &full[(self.start[0] + r) * n + self.start[1]..][..self.extent[1]];
            let vals = &self.values[r * self.extent[1]..][..self.extent[1]];
            s += vals.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }

    pub fn add_scaled_into(&self, full: &mut [f64], n: usize, c: f64) {
        for r in 0..self.extent[0] {
            let row = &mut full[(self.start[0] + r) * n + self.start[1]..][..self.extent[1]];
            let vals = &self.values[r * self.extent[1]..][..self.extent[1]];
            for (dst, v) in row.iter_mut().zip(vals) {
                *dst += c * v;
            }
        }
    }

    /// `Σ a · b` over the overlap of two patches.
    pub fn dot(&self, other: &Patch) -> f64 {
        let r0 = self.start[0].max(other.start[0]);
        let r1 = (self.start[0] + self.extent[0]).min(other.start[0] + other.extent[0]);
        let c0 = self.start[1].max(other.start[1]);
        let c1 = (self.start[1] + self.extent[1]).min(other.start[1] + other.extent[1]);
        if r0 >= r1 || c0 >= c1 {
            return 0.0;
        }
        let mut s = 0.0;
        for r in r0..r1 {
            let a = &self.values[(r - self.start[0]) * self.extent[1] + (c0 - self.start[1])..]
                [..c1 - c0];
            let b = &other.values[(r - other.start[0]) * other.extent[1] + (c0 - other.start[1])..]
                [..c1 - c0];
            s += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        }
        s
    }

    /// Expands to a full sampling of `grid`.
    pub fn to_full(&self, grid: &Grid) -> SampledFunction {
        let mut f = SampledFunction::zeros(grid);
        self.add_scaled_into(&mut f.values, grid.points_per_dim(), 1.0);
        f
    }

    /// Restricts a full 2-D sampling to its nonzero bounding box.
    pub fn from_full(f: &SampledFunction) -> Patch {
        let n = f.grid.points_per_dim();
        let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
        for (i, v) in f.values.iter().enumerate() {
            if *v != 0.0 {
                let (r, c) = (i / n, i % n);
                r0 = r0.min(r);
                r1 = r1.max(r + 1);
                c0 = c0.min(c);
                c1 = c1.max(c + 1);
            }
        }
        if r0 == usize::MAX {
            return Patch::empty();
        }
        let mut values = Vec::with_capacity((r1 - r0) * (c1 - c0));
        for r in r0..r1 {
            values.extend_from_slice(&f.values[r * n + c0..r * n + c1]);
        }
        Patch {
            start: [r0, c0],
            extent: [r1 - r0, c1 - c0],
            values,
        }
    }
}
