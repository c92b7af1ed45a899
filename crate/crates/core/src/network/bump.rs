use super::{AffineLayer, Network};
use crate::activation::ActivationKind;
use crate::error::{invalid, Result};

/// Breakpoints of the one-dimensional hat `t(x) = ρ(x) − ρ(x−p1) − ρ(x−p2) + ρ(x−p3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpShape {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl Default for BumpShape {
    fn default() -> Self {
        Self {
            p1: 1.0,
            p2: 1.0,
            p3: 2.0,
        }
    }
}

impl BumpShape {
    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 <= p2 && p2 <= p3 && p3.is_finite()) {
            return Err(invalid(format!(
                "bump breakpoints need 0 < p1 <= p2 <= p3, got ({p1}, {p2}, {p3})"
            )));
        }
        if (p1 + p2 - p3).abs() > 1e-12 {
            return Err(invalid(format!("bump breakpoints need p1 + p2 = p3, got ({p1}, {p2}, {p3})")));
        }
        Ok(Self { p1, p2, p3 })
    }

    /// First-layer shifts with their second-layer coefficients; coincident shifts merged.
    pub fn terms(&self) -> Vec<(f64, f64)> {
        let mut terms: Vec<(f64, f64)> = Vec::with_capacity(4);
        for (shift, coef) in [(0.0, 1.0), (self.p1, -1.0), (self.p2, -1.0), (self.p3, 1.0)] {
            match terms.last_mut() {
                Some(last) if last.0 == shift => last.1 += coef,
                _ => terms.push((shift, coef)),
            }
        }
        terms.retain(|t| t.1 != 0.0);
        terms
    }

    /// `t(x)` under `activation`.
    pub fn hat(&self, activation: ActivationKind, x: f64) -> f64 {
        self.terms()
            .iter()
            .map(|&(s, c)| c * activation.apply(x - s))
            .sum()
    }

    /// Right end of the support of `t` (and of each coordinate of the bump).
    pub fn support_end(&self, activation: ActivationKind) -> f64 {
        self.p3 + activation.knee().min(f64::MAX)
    }
}

/// `sup |t|` by a grid search with 10001 points over the support of `t`.
pub fn hat_sup(shape: BumpShape, activation: ActivationKind) -> f64 {
    let end = if activation.is_relu_like() {
        shape.support_end(activation)
    } else {
        shape.p3
    };
    let n = 10_001;
    (0..n)
        .map(|i| shape.hat(activation, end * i as f64 / (n - 1) as f64).abs())
        .fold(0.0, f64::max)
}

/// Two-layer network for the one-dimensional hat `t`.
pub fn hat_network(activation: ActivationKind, shape: BumpShape) -> Result<Network> {
    let terms = shape.terms();
    let l1 = AffineLayer::new(
        terms.len(),
        1,
        (0..terms.len()).map(|i| (i, 0, 1.0)).collect(),
        terms.iter().map(|t| -t.0).collect(),
    )?;
    let l2 = AffineLayer::new(
        1,
        terms.len(),
        terms.iter().enumerate().map(|(i, t)| (0, i, t.1)).collect(),
        vec![0.0],
    )?;
    Network::new(1, vec![l1, l2], activation)
}

/// Three-layer bump `g(x) = ρ(Σ_i t(x_i) − (d−1) q)` with `q = sup |t|`.
///
/// For ReLU-like activations `g ≥ 0` and `g` vanishes unless every coordinate
/// lies in the support of `t`.
pub fn bump_network(activation: ActivationKind, d: usize, p1: f64, p2: f64, p3: f64) -> Result<Network> {
    if d == 0 {
        return Err(invalid("bump dimension must be positive"));
    }
    let shape = BumpShape::new(p1, p2, p3)?;
    let terms = shape.terms();
    let per = terms.len();
    let q = hat_sup(shape, activation);

    let mut e1 = Vec::with_capacity(per * d);
    let mut b1 = Vec::with_capacity(per * d);
    let mut e2 = Vec::with_capacity(per * d);
    for i in 0..d {
        for (k, &(shift, coef)) in terms.iter().enumerate() {
            let node = i * per + k;
            e1.push((node, i, 1.0));
            b1.push(-shift);
            e2.push((0, node, coef));
        }
    }
    let l1 = AffineLayer::new(per * d, d, e1, b1)?;
    let l2 = AffineLayer::new(1, per * d, e2, vec![-(d as f64 - 1.0) * q])?;
    let l3 = AffineLayer::new(1, 1, vec![(0, 0, 1.0)], vec![0.0])?;
    Network::new(d, vec![l1, l2, l3], activation)
}
