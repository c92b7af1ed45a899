//! Affine systems: α-shearlets over a bump generator, vanishing-moment
//! synthesis, and cartoon-like target functions.

mod cartoon;
mod shearlet;

pub use cartoon::{generate_cartoon, line_singularity_target, CartoonFunction, CartoonParams, SmoothBump};
pub use shearlet::{
    canonical_order, Atom, Generator, MatrixInfo, Part, ShearletParams, ShearletSystem, SystemDiagnostics,
};

use nalgebra::Matrix2;

use crate::error::{invalid, Result};

/// Axis-aligned box `[lo, hi]` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2 {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Box2 {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) || lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(invalid(format!("degenerate box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        }
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.lo[0], self.lo[1]],
            [self.hi[0], self.lo[1]],
            [self.hi[0], self.hi[1]],
            [self.lo[0], self.hi[1]],
        ]
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    /// `max |coordinate|` over the box.
    pub fn radius(&self) -> f64 {
        self.lo.iter().chain(&self.hi).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `D_{α,a} = diag(a, a^α)`, `S_k = [[1,k],[0,1]]`, and `J^τ` with `J = [[0,1],[1,0]]`.
pub fn shear_matrices(alpha: f64, a: f64, k: i64, tau: bool) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    let d = Matrix2::new(a, 0.0, 0.0, a.powf(alpha));
    let s = Matrix2::new(1.0, k as f64, 0.0, 1.0);
    let j = if tau {
        Matrix2::new(0.0, 1.0, 1.0, 0.0)
    } else {
        Matrix2::identity()
    };
    (d, s, j)
}

/// Largest admissible shear `⌈2^{ℓ(1−α)}⌉` at scale `ℓ`.
pub fn shear_range(alpha: f64, ell: u32) -> i64 {
    (ell as f64 * (1.0 - alpha)).exp2().ceil() as i64
}

/// `2^{ℓ(1+α)/2}`.
pub fn scale_normalization(alpha: f64, ell: u32) -> f64 {
    (ell as f64 * (1.0 + alpha) / 2.0).exp2()
}

/// Optimal exponent `β/2` of β-cartoon-like functions.
pub fn gamma_star_cartoon(beta: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&beta) {
        return Err(invalid(format!("β must lie in [1, 2], got {beta}")));
    }
    Ok(beta / 2.0)
}

/// `g = Σ_i c_i f(· − d_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslateCombination {
    pub coeffs: Vec<f64>,
    pub shifts: Vec<Vec<f64>>,
}

impl TranslateCombination {
    pub fn identity(d: usize) -> Self {
        Self {
            coeffs: vec![1.0],
            shifts: vec![vec![0.0; d]],
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, f: impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        self.coeffs
            .iter()
            .zip(&self.shifts)
            .map(|(&c, shift)| {
                for (yi, (xi, si)) in y.iter_mut().zip(x.iter().zip(shift)) {
                    *yi = xi - si;
                }
                c * f(&y)
            })
            .sum()
    }
}

/// Binomial differencing `Σ_{ℓ<R} C(R−1,ℓ)(−1)^ℓ f(x − (ℓ/B) e_axis)`, giving `R` vanishing
/// moments along `axis`.
pub fn make_vanishing_moments(d: usize, r: usize, spacing_inv: f64, axis: usize) -> Result<TranslateCombination> {
    if r == 0 {
        return Err(invalid("number of vanishing moments must be at least 1"));
    }
    if axis >= d {
        return Err(invalid(format!("axis {axis} outside dimension {d}")));
    }
    if !(spacing_inv > 0.0 && spacing_inv.is_finite()) {
        return Err(invalid(format!("B must be positive, got {spacing_inv}")));
    }
    let n = r - 1;
    let mut coeffs = Vec::with_capacity(r);
    let mut binom = 1.0f64;
    for l in 0..r {
        coeffs.push(if l % 2 == 0 { binom } else { -binom });
        binom = binom * (n - l) as f64 / (l + 1) as f64;
    }
    let shifts = (0..r)
        .map(|l| {
            let mut s = vec![0.0; d];
            s[axis] = l as f64 / spacing_inv;
            s
        })
        .collect();
    Ok(TranslateCombination { coeffs, shifts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrices() {
        let (d, s, j) = shear_matrices(0.5, 4.0, 0, false);
        assert_eq!(d, Matrix2::new(4.0, 0.0, 0.0, 2.0));
        assert_eq!(s, Matrix2::identity());
        let (_, _, j1) = shear_matrices(0.5, 4.0, 0, true);
        assert_eq!(j1 * j1, Matrix2::identity());
        assert_eq!(j, Matrix2::identity());
    }

    #[test]
    fn shear_ranges_and_normalization() {
        assert_eq!(shear_range(0.5, 2), 2);
        for ell in 0..8 {
            assert_eq!(shear_range(1.0, ell), 1);
        }
        assert!((scale_normalization(0.5, 2) - 2.0f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn gamma_star_values() {
        assert_eq!(gamma_star_cartoon(2.0).unwrap(), 1.0);
        assert_eq!(gamma_star_cartoon(1.0).unwrap(), 0.5);
        assert_eq!(gamma_star_cartoon(1.0 / 0.5).unwrap(), 1.0);
        assert!(gamma_star_cartoon(2.5).is_err());
    }

    #[test]
    fn binomial_rows() {
        let g = make_vanishing_moments(2, 7, 1.0, 0).unwrap();
        assert_eq!(g.coeffs, vec![1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]);
        assert_eq!(g.shifts[3], vec![3.0, 0.0]);
        let one = make_vanishing_moments(2, 1, 1.0, 0).unwrap();
        assert_eq!(one, TranslateCombination::identity(2));
        let two = make_vanishing_moments(1, 2, 1.0, 0).unwrap();
        assert_eq!(two.coeffs.iter().sum::<f64>(), 0.0);
        assert!(make_vanishing_moments(2, 0, 1.0, 0).is_err());
    }
}
