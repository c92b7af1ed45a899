mod common;

use common::{random_grid_network, shape_for};
use nnapprox::codec::{code_length_bound, decode_network, encode_network, file, QuantizationSpec};
use nnapprox::ActivationKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_roundtrips_are_exact_and_within_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let d = rng.gen_range(1..=3);
        let depth = rng.gen_range(1..=6);
        let target = rng.gen_range(1..=600);
        let spec = QuantizationSpec::new(rng.gen_range(1..=12), rng.gen_range(0..=8)).unwrap();
        let (widths, density) = shape_for(&mut rng, d, depth, target);
        let net = random_grid_network(&mut rng, d, &widths, density, spec);
        let enc = encode_network(&net, spec).unwrap();
        assert!(enc.payload.len() <= code_length_bound(net.connectivity(), d, spec.width() as usize));
        let back = file::from_bytes(&file::to_bytes(&enc)).unwrap();
        let decoded = decode_network(&back, ActivationKind::Relu).unwrap();
        if net.connectivity() > 0 {
            assert_eq!(decoded, net);
        } else {
            assert_eq!(decoded.layers()[0].bias(), net.layers()[0].bias());
        }
    }
}

#[test]
fn small_networks_stay_within_bound_exhaustively() {
    // Every (d, M) pair with a scalar chain-like or wide first layer.
    let spec = QuantizationSpec::new(1, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in 1..=3 {
        for depth in 1..=5 {
            for width in 1..=4 {
                for density in [0.2, 0.5, 1.0] {
                    for _ in 0..10 {
                        let mut widths = vec![width; depth - 1];
                        widths.push(1);
                        let net = random_grid_network(&mut rng, d, &widths, density, spec);
                        let m = net.connectivity();
                        let enc = encode_network(&net, spec).unwrap();
                        assert!(
                            enc.payload.len() <= code_length_bound(m, d, spec.width() as usize),
                            "d={d} M={m} L={} bits={}",
                            net.depth(),
                            enc.payload.len()
                        );
                    }
                }
            }
        }
    }
}
