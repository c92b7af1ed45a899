use super::QuantizationSpec;
use crate::error::{invalid, Error, Result};
use crate::grid::{grid_norms, Grid};
use crate::network::Network;

/// Nearest grid value with ties toward zero, clamped to the representable range.
pub fn quantize_value(w: f64, spec: QuantizationSpec) -> f64 {
    let scaled = w * (spec.fractional_bits as f64).exp2();
    let a = scaled.abs();
    let floor = a.floor();
    let mag = if a - floor > 0.5 { floor + 1.0 } else { floor };
    let (lo, hi) = spec.code_range();
    let code = (mag.copysign(scaled)).clamp(lo as f64, hi as f64);
    // Avoid a negative zero.
    (code + 0.0) * spec.step()
}

/// Rounds every weight and bias; weights that round to zero disappear.
pub fn quantize_weights(net: &Network, spec: QuantizationSpec) -> Network {
    net.map_weights(|w| quantize_value(w, spec))
}

/// Smallest `R` with every weight in `[-2^R, 2^R]`.
pub fn required_range_bits(net: &Network) -> u32 {
    let m = net.max_abs_weight();
    let mut r = 0;
    while (r as f64).exp2() < m {
        r += 1;
    }
    r
}

/// Result of [`quantize_network`].
#[derive(Debug, Clone)]
pub struct Quantized {
    pub network: Network,
    pub spec: QuantizationSpec,
    pub sup_error: f64,
    /// Sup error of the candidate kept at every `F` tried, starting at 1.
    pub error_by_f: Vec<f64>,
}

/// Smallest `F ≤ max_f` with an on-grid network within `eta` of `net` on `grid`.
///
/// The candidate at `F` is the better of rounding at `F` and the candidate kept at `F − 1`.
pub fn quantize_network(
    net: &Network,
    eta: f64,
    grid: &Grid,
    max_f: u32,
    range_bits: u32,
) -> Result<Quantized> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(invalid(format!("sup error target must lie in (0, 1/2), got {eta}")));
    }
    if max_f < 1 {
        return Err(invalid("max_F must be at least 1"));
    }
    let bound = (range_bits as f64).exp2();
    for layer in net.layers() {
        let weights = layer.entries().iter().map(|e| e.2).chain(layer.bias().iter().copied());
        if let Some(w) = weights.into_iter().find(|w| w.abs() > bound) {
            return Err(Error::WeightOutOfRange { weight: w, bound });
        }
    }
    let reference = net.sample(grid)?;
    let mut error_by_f = Vec::new();
    // Dyadic grids are nested, so the best candidate so far stays representable at the next F.
    let mut kept: Option<(Network, f64)> = None;
    for f in 1..=max_f {
        let Ok(spec) = QuantizationSpec::new(f, range_bits) else {
            break;
        };
        let q = quantize_weights(net, spec);
        let (_, sup) = grid_norms(&q.sample(grid)?, &reference)?;
        let (q, sup) = match kept.take() {
            Some((prev, e)) if e <= sup => (prev, e),
            _ => (q, sup),
        };
        error_by_f.push(sup);
        if sup <= eta {
            return Ok(Quantized {
                network: q,
                spec,
                sup_error: sup,
                error_by_f,
            });
        }
        kept = Some((q, sup));
    }
    let best = kept.map_or(f64::INFINITY, |k| k.1);
    Err(Error::QuantizationFailed {
        target: eta,
        achieved: best,
        max_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::network::{bump_network, AffineLayer};
    use proptest::prelude::*;

    fn spec(f: u32, r: u32) -> QuantizationSpec {
        QuantizationSpec::new(f, r).unwrap()
    }

    #[test]
    fn rounding_rules() {
        let s = spec(1, 3);
        assert_eq!(quantize_value(0.3, s), 0.5);
        assert_eq!(quantize_value(0.25, s), 0.0);
        assert_eq!(quantize_value(-0.25, s), 0.0);
        assert_eq!(quantize_value(0.75, s), 0.5);
        assert_eq!(quantize_value(-0.75, s), -0.5);
        assert_eq!(quantize_value(0.76, s), 1.0);
        assert_eq!(quantize_value(8.0, s), 7.5);
        assert_eq!(quantize_value(-8.0, s), -8.0);
        assert!(quantize_value(-0.1, s).is_sign_positive());
    }

    #[test]
    fn on_grid_network_is_unchanged() {
        let g = bump_network(ActivationKind::Relu, 2, 1.0, 1.0, 2.0).unwrap();
        let grid = Grid::cube(2, -0.5, 2.5, 31).unwrap();
        let q = quantize_network(&g, 1e-3, &grid, 20, 2).unwrap();
        assert_eq!(q.network, g);
        assert_eq!(q.sup_error, 0.0);
        assert_eq!(q.spec.fractional_bits, 1);
    }

    #[test]
    fn single_edge_forced_coarse() {
        let l = AffineLayer::new(1, 1, vec![(0, 0, 0.3)], vec![0.0]).unwrap();
        let net = Network::new(1, vec![l], ActivationKind::Relu).unwrap();
        let grid = Grid::cube(1, -1.0, 1.0, 21).unwrap();
        let q = quantize_weights(&net, spec(1, 0));
        assert_eq!(q.layers()[0].get(0, 0), 0.5);
        let (_, sup) = grid_norms(&q.sample(&grid).unwrap(), &net.sample(&grid).unwrap()).unwrap();
        assert!((sup - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_network_accepts_f1() {
        let net = Network::constant(2, 0.0, ActivationKind::Relu);
        let grid = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        let q = quantize_network(&net, 0.1, &grid, 10, 0).unwrap();
        assert_eq!(q.spec.fractional_bits, 1);
        assert_eq!(q.sup_error, 0.0);
    }

    #[test]
    fn failures_are_explicit() {
        let l = AffineLayer::new(1, 1, vec![(0, 0, 5.0)], vec![0.0]).unwrap();
        let net = Network::new(1, vec![l], ActivationKind::Relu).unwrap();
        let grid = Grid::cube(1, -1.0, 1.0, 5).unwrap();
        assert!(matches!(
            quantize_network(&net, 0.1, &grid, 10, 2),
            Err(Error::WeightOutOfRange { weight, .. }) if weight == 5.0
        ));
        let l = AffineLayer::new(1, 1, vec![(0, 0, 1.0 / 3.0)], vec![0.0]).unwrap();
        let net = Network::new(1, vec![l], ActivationKind::Relu).unwrap();
        let err = quantize_network(&net, 1e-9, &grid, 4, 1).unwrap_err();
        assert!(err.is_numerical());
    }

    proptest! {
        #[test]
        fn quantized_values_are_on_grid(w in -20.0f64..20.0, f in 1u32..20, r in 0u32..6) {
            let s = spec(f, r);
            let q = quantize_value(w, s);
            prop_assert!(s.to_code(q).is_some());
            let clamped = w.clamp(-s.bound(), s.bound() - s.step());
            prop_assert!((q - clamped).abs() <= s.step() / 2.0);
        }
    }
}
