#![allow(dead_code)]

use nnapprox::codec::QuantizationSpec;
use nnapprox::network::normalize_network;
use nnapprox::{ActivationKind, AffineLayer, Network};
use rand::Rng;

/// Random sparse network with weights drawn from the `spec` grid, then normalized.
pub fn random_grid_network(
    rng: &mut impl Rng,
    d: usize,
    widths: &[usize],
    density: f64,
    spec: QuantizationSpec,
) -> Network {
    let (lo, hi) = spec.code_range();
    let draw = |rng: &mut dyn rand::RngCore, nonzero: bool| loop {
        let c = rng.gen_range(lo..=hi);
        if !nonzero || c != 0 {
            break spec.from_code(c);
        }
    };
    let mut layers = Vec::new();
    let mut cols = d;
    for &rows in widths {
        let mut entries = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen::<f64>() < density {
                    entries.push((r, c, draw(rng, true)));
                }
            }
        }
        let bias = (0..rows).map(|_| draw(rng, false)).collect();
        layers.push(AffineLayer::new(rows, cols, entries, bias).unwrap());
        cols = rows;
    }
    normalize_network(&Network::new(d, layers, ActivationKind::Relu).unwrap())
}

/// Widths and density aimed at roughly `target` edges over `depth` layers with scalar output.
pub fn shape_for(rng: &mut impl Rng, d: usize, depth: usize, target: usize) -> (Vec<usize>, f64) {
    if depth == 1 {
        return (vec![1], 1.0);
    }
    let hidden = depth - 1;
    let per_layer = (target as f64 / hidden as f64).max(1.0);
    let width = per_layer.sqrt().ceil().max(1.0) as usize + rng.gen_range(0..3);
    let mut widths = vec![width; hidden];
    widths.push(1);
    let capacity = d * width + width * width * (hidden - 1) + width;
    let density = (target as f64 / capacity as f64).clamp(0.05, 1.0);
    (widths, density)
}

use nnapprox::affine::ShearletSystem;
use nnapprox::approx::{Expansion, Term};
use nnapprox::{Grid, SampledFunction};

/// `count` mutually orthogonal fields with random norms in `[0.5, 2]`, by Gram–Schmidt.
pub fn orthogonal_atoms(rng: &mut impl Rng, grid: &Grid, count: usize) -> Vec<SampledFunction> {
    let mut out: Vec<SampledFunction> = Vec::new();
    while out.len() < count {
        let mut f = grid.sample(|_| rng.gen_range(-1.0..1.0));
        for g in &out {
            let c = f.inner(g).unwrap() / g.inner(g).unwrap();
            for (a, b) in f.values.iter_mut().zip(&g.values) {
                *a -= c * b;
            }
        }
        let n = f.l2_norm();
        if n > 1e-6 {
            let s = rng.gen_range(0.5..2.0) / n;
            f.values.iter_mut().for_each(|v| *v *= s);
            out.push(f);
        }
    }
    out
}

/// Least-squares residual of `target` on the span of `atoms[subset]`, via normal equations.
pub fn projection_residual(target: &SampledFunction, atoms: &[SampledFunction], subset: &[usize]) -> f64 {
    let k = subset.len();
    if k == 0 {
        return target.l2_norm();
    }
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| atoms[subset[i]].inner(&atoms[subset[j]]).unwrap());
    let rhs = nalgebra::DVector::from_fn(k, |i, _| atoms[subset[i]].inner(target).unwrap());
    let c = gram.lu().solve(&rhs).expect("independent atoms");
    let mut r = target.clone();
    for (i, &s) in subset.iter().enumerate() {
        for (a, b) in r.values.iter_mut().zip(&atoms[s].values) {
            *a -= c[i] * b;
        }
    }
    r.l2_norm()
}

/// Smallest residual over all `m`-subsets.
pub fn exhaustive_best(target: &SampledFunction, atoms: &[SampledFunction], m: usize) -> f64 {
    let n = atoms.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        best = best.min(projection_residual(target, atoms, &subset));
    }
    best
}

/// Random expansion over distinct atoms of `sys`, coefficients in `[−2, 2]`.
pub fn random_expansion(rng: &mut impl Rng, sys: &ShearletSystem, m: usize) -> Expansion {
    let mut idx: Vec<usize> = Vec::new();
    while idx.len() < m {
        let i = rng.gen_range(0..sys.len());
        if !idx.contains(&i) {
            idx.push(i);
        }
    }
    idx.sort_unstable();
    let terms: Vec<Term> = idx
        .into_iter()
        .map(|index| Term {
            index,
            coefficient: rng.gen_range(-2.0..2.0),
        })
        .collect();
    let max_coefficient = terms.iter().fold(0.0f64, |a, t| a.max(t.coefficient.abs()));
    Expansion {
        terms,
        residual: f64::NAN,
        search_depth: 0,
        refit: false,
        refit_fallback: false,
        max_coefficient,
        coefficient_bound: f64::INFINITY,
    }
}

/// Trapezoid moments `∫ x^p g` for `p < 7` over `[0, hi]`, then `∫ |g|` in the last slot.
pub fn moments(g: impl Fn(f64) -> f64, hi: f64, nodes: usize) -> Vec<f64> {
    let h = hi / (nodes - 1) as f64;
    let mut out = vec![0.0; 8];
    for i in 0..nodes {
        let x = i as f64 * h;
        let w = if i == 0 || i == nodes - 1 { 0.5 * h } else { h };
        let v = g(x);
        for (p, m) in out.iter_mut().enumerate().take(7) {
            *m += w * x.powi(p as i32) * v;
        }
        out[7] += w * v.abs();
    }
    out
}

/// Random network with continuous weights uniform in `[−scale, scale]`.
pub fn random_real_network(rng: &mut impl Rng, d: usize, widths: &[usize], density: f64, scale: f64) -> Network {
    let mut layers = Vec::new();
    let mut cols = d;
    for &rows in widths {
        let mut entries = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen::<f64>() < density {
                    entries.push((r, c, rng.gen_range(-scale..=scale)));
                }
            }
        }
        let bias = (0..rows).map(|_| rng.gen_range(-scale..=scale)).collect();
        layers.push(AffineLayer::new(rows, cols, entries, bias).unwrap());
        cols = rows;
    }
    normalize_network(&Network::new(d, layers, ActivationKind::Relu).unwrap())
}

/// Three layers of `[width, width, 1]` nodes with five edges per hidden pair, so nodes grow with `M = 5·width`.
pub fn sparse_grid_network(rng: &mut impl Rng, width: usize, spec: QuantizationSpec) -> Network {
    let (lo, hi) = spec.code_range();
    let mut draw = || loop {
        let c = rng.gen_range(lo..=hi);
        if c != 0 {
            break spec.from_code(c);
        }
    };
    let first: Vec<_> = (0..width).flat_map(|r| [(r, 0, 0.0), (r, 1, 0.0)]).collect();
    let second: Vec<_> = (0..width).flat_map(|r| [(r, r, 0.0), (r, (r + 1) % width, 0.0)]).collect();
    let out: Vec<_> = (0..width).map(|c| (0, c, 0.0)).collect();
    let mut layers = Vec::new();
    let mut cols = 2;
    for (rows, entries) in [(width, first), (width, second), (1, out)] {
        let entries = entries.into_iter().map(|(r, c, _)| (r, c, draw())).collect();
        let bias = (0..rows).map(|_| draw()).collect();
        layers.push(AffineLayer::new(rows, cols, entries, bias).unwrap());
        cols = rows;
    }
    Network::new(2, layers, ActivationKind::Relu).unwrap()
}
