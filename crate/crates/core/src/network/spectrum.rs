//! Fourier magnitudes of two-dimensional networks via zero-padded DFTs.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{affine_transform_network, Network};
use crate::error::{invalid, Result};
use crate::grid::Grid;

/// `|f̂(ξ)|` with `f̂(ξ) = ∫ f(x) e^{−2πi⟨x,ξ⟩} dx` on a square frequency lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Frequency spacing `1/(N h)`.
    pub step: f64,
    /// Side length `N` of the padded transform.
    pub size: usize,
    /// Row-major magnitudes indexed by centred frequency `k − N/2`.
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    /// `(min, max)` of the magnitudes at lattice frequencies in `[−r, r]²`.
    pub fn extrema_on_box(&self, r: f64) -> (f64, f64) {
        let half = self.size as i64 / 2;
        let kmax = ((r / self.step) + 1e-9).floor() as i64;
        let kmax = kmax.min(half - 1);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k0 in -kmax..=kmax {
            for k1 in -kmax..=kmax {
                let m = self.magnitudes[((k0 + half) as usize) * self.size + (k1 + half) as usize];
                lo = lo.min(m);
                hi = hi.max(m);
            }
        }
        (lo, hi)
    }

    pub fn at_zero(&self) -> f64 {
        let half = self.size / 2;
        self.magnitudes[half * self.size + half]
    }
}

/// Samples `net` on `grid` (2-D, support inside the grid box), pads to `pad·n` and transforms.
pub fn spectrum(net: &Network, grid: &Grid, pad: usize) -> Result<Spectrum> {
    if grid.dim() != 2 || net.input_dim() != 2 {
        return Err(invalid("spectra are computed for functions on R^2"));
    }
    if pad == 0 {
        return Err(invalid("padding factor must be positive"));
    }
    let n = grid.points_per_dim();
    let size = (n * pad).next_power_of_two();
    let h = grid.spacing(0);
    if (grid.spacing(1) - h).abs() > 1e-12 * h {
        return Err(invalid("spectra need equal spacing on both axes"));
    }
    let samples = net.sample(grid)?;
    let mut data = vec![Complex::new(0.0, 0.0); size * size];
    // Grid points are row-major with axis 0 slowest.
    for i in 0..n {
        for j in 0..n {
            data[i * size + j].re = samples.values[i * n + j];
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(size);
    for row in data.chunks_mut(size) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); size];
    for j in 0..size {
        for i in 0..size {
            col[i] = data[i * size + j];
        }
        fft.process(&mut col);
        for i in 0..size {
            data[i * size + j] = col[i];
        }
    }
    let half = size / 2;
    let scale = h * h;
    let mut magnitudes = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let (si, sj) = ((i + half) % size, (j + half) % size);
            magnitudes[i * size + j] = scale * data[si * size + sj].norm();
        }
    }
    Ok(Spectrum {
        step: 1.0 / (size as f64 * h),
        size,
        magnitudes,
    })
}

/// Largest lattice radius `δ` with `min_{[−δ,δ]²} |ĝ| ≥ floor·|ĝ(0)|`.
pub fn nonvanishing_radius(s: &Spectrum, floor: f64) -> f64 {
    let g0 = s.at_zero();
    let mut k = 0usize;
    while k + 1 < s.size / 2 {
        let r = (k + 1) as f64 * s.step;
        if s.extrema_on_box(r).0 < floor * g0 {
            break;
        }
        k += 1;
    }
    k as f64 * s.step
}

/// `x ↦ (3/δ)·g(3x/δ)`, a multiple of `φ = g(3·/δ)`; magnitude ratios are unaffected.
pub fn rescaled_bump(g: &Network, delta: f64) -> Result<Network> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("δ must be positive, got {delta}")));
    }
    let s = 3.0 / delta;
    let a = nalgebra::DMatrix::from_diagonal_element(2, 2, s);
    affine_transform_network(g, &a, &[0.0, 0.0])
}
