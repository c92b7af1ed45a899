mod common;

use nnapprox::affine::{ShearletParams, ShearletSystem};
use nnapprox::approx::{
    learn_pipeline, m_epsilon, m_term_approx, synthesize, transfer_to_network, LearnOptions, ToyDictionary,
};
use nnapprox::{grid_norms, Grid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(l_max: u32) -> ShearletSystem {
    ShearletSystem::new(ShearletParams {
        l_max,
        ..ShearletParams::default()
    })
    .unwrap()
}

#[test]
fn transfer_reproduces_random_expansions() {
    let sys = system(3);
    let g = sys.generator().network(0).unwrap();
    let grid = Grid::cube(2, 0.0, 1.0, 128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in [0, 1, 5, 16] {
        let exp = common::random_expansion(&mut rng, &sys, m);
        let t = transfer_to_network(&exp, &sys, &g).unwrap();
        let gap = grid_norms(&t.network.sample(&grid).unwrap(), &synthesize(&exp, &sys, &grid)).unwrap().0;
        assert!(gap <= 1e-9, "M = {m}: gap {gap:e}");
        assert!(t.connectivity() <= t.edge_bound());
        assert_eq!(t.per_atom_edges, 152);
    }
}

#[test]
fn greedy_refit_matches_exhaustive_oracle() {
    let grid = Grid::cube(2, 0.0, 1.0, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..6 {
        let n = 6 + trial % 5;
        let atoms = common::orthogonal_atoms(&mut rng, &grid, n);
        let dict = ToyDictionary::new(grid.clone(), atoms.clone()).unwrap();
        let mut target = grid.sample(|_| 0.05 * rng.gen_range(-1.0..1.0));
        for a in &atoms {
            let c = rng.gen_range(-1.0..1.0);
            target.values.iter_mut().zip(&a.values).for_each(|(t, v)| *t += c * v);
        }
        for m in 0..=4 {
            let exp = m_term_approx(&target, &dict, m, n, true).unwrap();
            let oracle = common::exhaustive_best(&target, &atoms, m);
            assert!((exp.residual - oracle).abs() <= 1e-9, "n {n} M {m}: {} vs {oracle}", exp.residual);
        }
    }
}

#[test]
fn learn_meets_eps_on_representable_target() {
    let sys = system(2);
    let g = sys.generator().network(0).unwrap();
    let grid = Grid::cube(2, 0.0, 1.0, 128).unwrap();
    let single = |index: usize| nnapprox::approx::Expansion {
        terms: vec![nnapprox::approx::Term { index, coefficient: 0.75 }],
        residual: 0.0,
        search_depth: 1,
        refit: false,
        refit_fallback: false,
        max_coefficient: 0.75,
        coefficient_bound: 100.0,
    };
    // The best-covered atom inside the depth-64 prefix searched for M = 1.
    let atom = (0..64)
        .max_by(|&a, &b| {
            let na = synthesize(&single(a), &sys, &grid).l2_norm();
            let nb = synthesize(&single(b), &sys, &grid).l2_norm();
            na.total_cmp(&nb)
        })
        .unwrap();
    let mut target = synthesize(&single(atom), &sys, &grid);
    let norm = target.l2_norm();
    assert!(norm > 0.0);
    target.values.iter_mut().for_each(|v| *v /= norm);
    let opts = LearnOptions {
        c: 0.1,
        gamma: 1.0,
        ..LearnOptions::default()
    };
    for eps in [0.2, 0.1, 0.05] {
        let out = learn_pipeline(&target, eps, &sys, &g, &opts).unwrap();
        assert_eq!(out.report.m_eps, m_epsilon(0.1, 1.0, eps).unwrap());
        assert!(out.report.l2_error <= eps);
        assert!(out.network.connectivity() > 0);
        let back = nnapprox::codec::decode_network(&out.encoded, g.activation()).unwrap();
        assert_eq!(back, out.network);
    }
}

#[test]
fn learn_reports_missed_budget() {
    let sys = system(1);
    let g = sys.generator().network(0).unwrap();
    let grid = Grid::cube(2, 0.0, 1.0, 64).unwrap();
    let target = grid.sample(|x| if x[0] + x[1] > 1.0 { 1.0 } else { 0.0 });
    let err = learn_pipeline(&target, 0.01, &sys, &g, &LearnOptions { c: 0.01, ..LearnOptions::default() })
        .unwrap_err();
    assert!(err.is_numerical(), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refit_never_worse_than_thresholding(seed in 0u64..1000, m in 1usize..6) {
        let grid = Grid::cube(2, 0.0, 1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms: Vec<_> = (0..8).map(|_| grid.sample(|_| rng.gen_range(-1.0..1.0))).collect();
        let dict = ToyDictionary::new(grid.clone(), atoms).unwrap();
        let target = grid.sample(|x| x[0] * x[1] - 0.3);
        let plain = m_term_approx(&target, &dict, m, 8, false).unwrap();
        let refit = m_term_approx(&target, &dict, m, 8, true).unwrap();
        prop_assert!(refit.residual <= plain.residual + 1e-12);
        prop_assert_eq!(refit.len(), m);
    }
}
