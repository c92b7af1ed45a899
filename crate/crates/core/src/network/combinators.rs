use nalgebra::DMatrix;

use super::{AffineLayer, Network};
use crate::activation::ActivationKind;
use crate::error::{invalid, Error, Result};

/// `Ψ(x) = |det A|^{1/2} · net(A x − b)`.
///
/// `A x − b` is folded into the first layer and the factor into the last, so
/// the depth is unchanged and only first-layer connectivity can change.
pub fn affine_transform_network(net: &Network, a: &DMatrix<f64>, b: &[f64]) -> Result<Network> {
    let d = net.input_dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "affine transform matrix".into(),
            expected: d,
            found: if a.nrows() != d { a.nrows() } else { a.ncols() },
        });
    }
    if b.len() != d {
        return Err(Error::DimensionMismatch {
            context: "affine transform shift".into(),
            expected: d,
            found: b.len(),
        });
    }
    let det = a.determinant();
    if !(det.abs() >= 1e-12) {
        return Err(Error::SingularMatrix { det });
    }
    let scale = det.abs().sqrt();

    let mut layers = net.layers().to_vec();
    let first = &layers[0];
    let mut entries = Vec::with_capacity(first.nnz() * d);
    let mut bias = first.bias().to_vec();
    for &(r, c, w) in first.entries() {
        for k in 0..d {
            entries.push((r, k, w * a[(c, k)]));
        }
        bias[r] -= w * b[c];
    }
    layers[0] = AffineLayer::accumulate(first.rows(), d, entries, bias)?;
    let last = layers.len() - 1;
    layers[last] = layers[last].map_weights(|w| w * scale);
    Network::new(d, layers, net.activation())
}

/// `Σ_i c_i · net(x − d_i)` as parallel shifted copies merged at the output.
pub fn sum_of_translates(net: &Network, coeffs: &[f64], shifts: &[Vec<f64>]) -> Result<Network> {
    if coeffs.len() != shifts.len() {
        return Err(Error::DimensionMismatch {
            context: "translate coefficients vs shifts".into(),
            expected: coeffs.len(),
            found: shifts.len(),
        });
    }
    let d = net.input_dim();
    let copies = shifts
        .iter()
        .map(|shift| {
            if shift.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "translate shift".into(),
                    expected: d,
                    found: shift.len(),
                });
            }
            let mut layers = net.layers().to_vec();
            let first = &mut layers[0];
            let mut bias = first.bias().to_vec();
            for &(r, c, w) in first.entries() {
                bias[r] -= w * shift[c];
            }
            for (r, v) in bias.into_iter().enumerate() {
                first.set_bias(r, v);
            }
            Network::new(d, layers, net.activation())
        })
        .collect::<Result<Vec<_>>>()?;
    parallel_sum(&copies, coeffs)
}

/// `Σ_i c_i · net_i(x)` with block-diagonal hidden layers.
///
/// The coefficients are folded into the output layer, so a zero coefficient
/// contributes no output edge; its hidden block stays in place until the
/// network is normalized.
pub fn parallel_sum(nets: &[Network], coeffs: &[f64]) -> Result<Network> {
    if nets.is_empty() {
        return Err(invalid("parallel sum of zero networks"));
    }
    if nets.len() != coeffs.len() {
        return Err(Error::DimensionMismatch {
            context: "parallel sum coefficients".into(),
            expected: nets.len(),
            found: coeffs.len(),
        });
    }
    let head = &nets[0];
    let (d, depth, activation) = (head.input_dim(), head.depth(), head.activation());
    for (i, net) in nets.iter().enumerate() {
        let reason = if net.input_dim() != d {
            format!("input dimension {} differs from {d}", net.input_dim())
        } else if net.depth() != depth {
            format!("depth {} differs from {depth}; pad it first", net.depth())
        } else if net.activation() != activation {
            format!("activation {} differs from {activation}", net.activation())
        } else if net.output_dim() != 1 {
            format!("output dimension {} is not scalar", net.output_dim())
        } else {
            continue;
        };
        return Err(Error::Incompatible { index: i, reason });
    }

    let mut layers: Vec<AffineLayer> = Vec::with_capacity(depth);
    // Row offset of each member's block in the previous layer; inputs are shared.
    let mut prev_offsets = vec![0usize; nets.len()];
    for l in 0..depth - 1 {
        let mut entries = Vec::new();
        let mut bias = Vec::new();
        let mut offsets = Vec::with_capacity(nets.len());
        let mut rows = 0;
        for (i, net) in nets.iter().enumerate() {
            let layer = &net.layers()[l];
            entries.extend(
                layer
                    .entries()
                    .iter()
                    .map(|&(r, c, w)| (r + rows, c + prev_offsets[i], w)),
            );
            bias.extend_from_slice(layer.bias());
            offsets.push(rows);
            rows += layer.rows();
        }
        let cols = layers.last().map(AffineLayer::rows).unwrap_or(d);
        layers.push(AffineLayer::new(rows, cols, entries, bias)?);
        prev_offsets = offsets;
    }

    let cols = layers.last().map(AffineLayer::rows).unwrap_or(d);
    let mut entries = Vec::new();
    let mut out_bias = 0.0;
    for (i, (net, &c)) in nets.iter().zip(coeffs).enumerate() {
        let layer = &net.layers()[depth - 1];
        out_bias += c * layer.bias()[0];
        if c != 0.0 {
            entries.extend(layer.entries().iter().map(|&(_, col, w)| (0, col + prev_offsets[i], c * w)));
        }
    }
    let last = if depth == 1 {
        AffineLayer::accumulate(1, d, entries, vec![out_bias])?
    } else {
        AffineLayer::new(1, cols, entries, vec![out_bias])?
    };
    layers.push(last);
    Network::new(d, layers, activation)
}

/// Lengthens `net` to `depth` layers with the exact identity `y = ρ(y) − ρ(−y)`.
///
/// Every added layer costs two edges per output; only ReLU has an exact pair.
pub fn pad_to_depth(net: &Network, depth: usize) -> Result<Network> {
    let current = net.depth();
    if depth < current {
        return Err(invalid(format!("cannot pad a depth-{current} network to depth {depth}")));
    }
    if depth == current {
        return Ok(net.clone());
    }
    if net.activation() != ActivationKind::Relu {
        return Err(Error::Incompatible {
            index: 0,
            reason: format!("activation {} has no exact identity pair", net.activation()),
        });
    }
    let mut layers = net.layers().to_vec();
    let last = layers.pop().expect("networks have at least one layer");
    let n = last.rows();
    let mut entries = Vec::with_capacity(2 * last.nnz());
    let mut bias = Vec::with_capacity(2 * n);
    for &(r, c, w) in last.entries() {
        entries.push((2 * r, c, w));
        entries.push((2 * r + 1, c, -w));
    }
    for &v in last.bias() {
        bias.push(v);
        bias.push(-v);
    }
    layers.push(AffineLayer::new(2 * n, last.cols(), entries, bias)?);
    for _ in 0..depth - current - 1 {
        layers.push(AffineLayer::new(
            2 * n,
            2 * n,
            (0..2 * n).map(|i| (i, i, 1.0)).collect(),
            vec![0.0; 2 * n],
        )?);
    }
    layers.push(AffineLayer::new(
        n,
        2 * n,
        (0..n).flat_map(|o| [(o, 2 * o, 1.0), (o, 2 * o + 1, -1.0)]).collect(),
        vec![0.0; n],
    )?);
    Network::new(net.input_dim(), layers, net.activation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{grid_norms, Grid};
    use crate::network::testing::random_network;
    use crate::network::{bump_network, hat_network, BumpShape};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_gap(a: &Network, b: impl Fn(&[f64]) -> f64, grid: &Grid) -> f64 {
        let mut gap: f64 = 0.0;
        grid.for_each_point(|_, x| gap = gap.max((a.eval_scalar(x).unwrap() - b(x)).abs()));
        gap
    }

    #[test]
    fn identity_transform_is_noop() {
        let g = bump_network(ActivationKind::Relu, 2, 1.0, 1.0, 2.0).unwrap();
        let psi = affine_transform_network(&g, &DMatrix::identity(2, 2), &[0.0, 0.0]).unwrap();
        let grid = Grid::cube(2, -0.5, 2.5, 31).unwrap();
        assert_eq!(max_gap(&psi, |x| g.eval_scalar(x).unwrap(), &grid), 0.0);
    }

    #[test]
    fn dilation_by_two() {
        let g = bump_network(ActivationKind::Relu, 2, 1.0, 1.0, 2.0).unwrap();
        let a = DMatrix::from_diagonal_element(2, 2, 2.0);
        let psi = affine_transform_network(&g, &a, &[0.0, 0.0]).unwrap();
        let grid = Grid::cube(2, -0.5, 1.5, 41).unwrap();
        let gap = max_gap(&psi, |x| 2.0 * g.eval_scalar(&[2.0 * x[0], 2.0 * x[1]]).unwrap(), &grid);
        assert!(gap <= 1e-14);
    }

    #[test]
    fn shifted_hat_peaks_at_two() {
        let t = hat_network(ActivationKind::Relu, BumpShape::default()).unwrap();
        let psi = affine_transform_network(&t, &DMatrix::identity(1, 1), &[1.0]).unwrap();
        assert_eq!(psi.eval_scalar(&[2.0]).unwrap(), 1.0);
        assert_eq!(psi.eval_scalar(&[1.0]).unwrap(), 0.0);
        assert_eq!(psi.eval_scalar(&[1.5]).unwrap(), 0.5);
    }

    #[test]
    fn singular_matrix_rejected() {
        let g = bump_network(ActivationKind::Relu, 2, 1.0, 1.0, 2.0).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            affine_transform_network(&g, &a, &[0.0, 0.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn translates() {
        let t = hat_network(ActivationKind::Relu, BumpShape::default()).unwrap();
        let grid = Grid::cube(1, -1.0, 4.0, 501).unwrap();
        let same = sum_of_translates(&t, &[1.0], &[vec![0.0]]).unwrap();
        assert_eq!(max_gap(&same, |x| t.eval_scalar(x).unwrap(), &grid), 0.0);
        let zero = sum_of_translates(&t, &[1.0, -1.0], &[vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(max_gap(&zero, |_| 0.0, &grid), 0.0);
        let diff = sum_of_translates(&t, &[1.0, -1.0], &[vec![0.0], vec![1.0]]).unwrap();
        let integral: f64 = diff.sample(&grid).unwrap().values.iter().sum::<f64>() * grid.cell_volume();
        assert!(integral.abs() < 1e-12);
        assert!(diff.connectivity() <= 2 * t.connectivity() + 2);
        assert!(sum_of_translates(&t, &[1.0], &[]).is_err());
    }

    #[test]
    fn parallel_sum_examples() {
        let g = bump_network(ActivationKind::Relu, 2, 1.0, 1.0, 2.0).unwrap();
        let grid = Grid::cube(2, -0.5, 2.5, 31).unwrap();
        let one = parallel_sum(&[g.clone()], &[1.0]).unwrap();
        assert_eq!(max_gap(&one, |x| g.eval_scalar(x).unwrap(), &grid), 0.0);
        let zero = parallel_sum(&[g.clone(), g.clone()], &[1.0, -1.0]).unwrap();
        assert_eq!(max_gap(&zero, |_| 0.0, &grid), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nets: Vec<Network> = (0..4)
            .map(|_| {
                let a = DMatrix::from_fn(2, 2, |r, c| if r == c { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3));
                affine_transform_network(&g, &a, &[rng.gen_range(-0.5..0.5), 0.1]).unwrap()
            })
            .collect();
        let c = [1.0, 2.0, 0.0, -1.0];
        let sum = parallel_sum(&nets, &c).unwrap();
        let direct = |x: &[f64]| -> f64 { nets.iter().zip(&c).map(|(n, &ci)| ci * n.eval_scalar(x).unwrap()).sum() };
        assert!(max_gap(&sum, direct, &grid) <= 1e-12);
        let total: usize = nets.iter().map(Network::connectivity).sum();
        assert_eq!(sum.connectivity(), total - 1);
    }

    #[test]
    fn parallel_sum_connectivity_of_small_nets() {
        let l1 = AffineLayer::new(2, 1, vec![(0, 0, 1.0), (1, 0, -1.0)], vec![0.0; 2]).unwrap();
        let l2 = AffineLayer::new(1, 2, vec![(0, 0, 1.0), (0, 1, -1.0)], vec![0.0]).unwrap();
        let id = Network::new(1, vec![l1, l2], ActivationKind::Relu).unwrap();
        let sum = parallel_sum(&[id.clone(), id.clone()], &[2.0, 3.0]).unwrap();
        // The two output combinations are folded into the existing output edges.
        assert!(sum.connectivity() <= 4 + 4 + 2);
        assert_eq!(sum.eval_scalar(&[1.5]).unwrap(), 7.5);
    }

    #[test]
    fn parallel_sum_rejects_mismatch() {
        let g2 = bump_network(ActivationKind::Relu, 2, 1.0, 1.0, 2.0).unwrap();
        let g1 = bump_network(ActivationKind::Relu, 1, 1.0, 1.0, 2.0).unwrap();
        match parallel_sum(&[g2.clone(), g1], &[1.0, 1.0]) {
            Err(Error::Incompatible { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let t = hat_network(ActivationKind::Relu, BumpShape::default()).unwrap();
        let g1 = bump_network(ActivationKind::Relu, 1, 1.0, 1.0, 2.0).unwrap();
        assert!(parallel_sum(&[g1, t], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn padding_is_exact() {
        let t = hat_network(ActivationKind::Relu, BumpShape::default()).unwrap();
        let padded = pad_to_depth(&t, 5).unwrap();
        assert_eq!(padded.depth(), 5);
        assert_eq!(padded.connectivity(), t.connectivity() + 3 + 2 * 3);
        let grid = Grid::cube(1, -1.0, 3.0, 401).unwrap();
        assert_eq!(max_gap(&padded, |x| t.eval_scalar(x).unwrap(), &grid), 0.0);
        let smooth = hat_network(ActivationKind::smooth_relu(1.0).unwrap(), BumpShape::default()).unwrap();
        assert!(pad_to_depth(&smooth, 3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn parallel_sum_is_linear(seed in any::<u64>(), depth in 1usize..=4, count in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let widths: Vec<usize> = (0..depth).map(|l| if l + 1 == depth { 1 } else { rng.gen_range(1..8) }).collect();
            let nets: Vec<Network> = (0..count).map(|_| random_network(&mut rng, 2, &widths, 0.6, 1.0)).collect();
            let c: Vec<f64> = (0..count).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sum = parallel_sum(&nets, &c).unwrap();
            let grid = Grid::cube(2, -1.0, 1.0, 9).unwrap();
            let expected = grid.sample(|x| nets.iter().zip(&c).map(|(n, &ci)| ci * n.eval_scalar(x).unwrap()).sum());
            let (_, sup) = grid_norms(&sum.sample(&grid).unwrap(), &expected).unwrap();
            prop_assert!(sup <= 1e-12);
        }

        #[test]
        fn affine_transform_identity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_network(&mut rng, 2, &[6, 3, 1], 0.7, 1.0);
            let a = loop {
                let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
                let sv = a.singular_values();
                if sv[1] > 0.0 && sv[0] / sv[1] <= 100.0 {
                    break a;
                }
            };
            let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let psi = affine_transform_network(&net, &a, &b).unwrap();
            let s = a.determinant().abs().sqrt();
            for _ in 0..1000 {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let y = [a[(0, 0)] * x[0] + a[(0, 1)] * x[1] - b[0], a[(1, 0)] * x[0] + a[(1, 1)] * x[1] - b[1]];
                let gap = (psi.eval_scalar(&x).unwrap() - s * net.eval_scalar(&y).unwrap()).abs();
                prop_assert!(gap <= 1e-10, "gap {}", gap);
            }
        }
    }
}
