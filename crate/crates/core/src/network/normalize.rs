use super::{AffineLayer, Network};

/// Removes structure that cannot influence the output.
///
/// Two reductions are applied until neither changes anything:
/// - a hidden node without outgoing edges is deleted together with its incoming edges;
/// - if some layer `ℓ > 1` has no edges at all, its output is the constant `b_ℓ`,
///   so layers `1..ℓ` are dropped and layer `ℓ` becomes a first layer with an
///   empty matrix reading the raw input.
///
/// The result satisfies `L ≤ M + 1` and every non-output node has a child.
pub fn normalize_network(net: &Network) -> Network {
    let mut layers: Vec<AffineLayer> = net.layers().to_vec();
    let d = net.input_dim();
    loop {
        let mut changed = false;

        if let Some(cut) = (1..layers.len()).rev().find(|&l| layers[l].nnz() == 0) {
            let mut kept = layers.split_off(cut);
            let head = &kept[0];
            kept[0] = AffineLayer {
                rows: head.rows,
                cols: d,
                entries: Vec::new(),
                bias: head.bias.clone(),
            };
            layers = kept;
            changed = true;
        }

        // Hidden layers back to front so that removals cascade within one pass.
        for l in (0..layers.len().saturating_sub(1)).rev() {
            let next = &layers[l + 1];
            let mut has_child = vec![false; layers[l].rows];
            for &(_, c, _) in &next.entries {
                has_child[c] = true;
            }
            if has_child.iter().all(|&h| h) {
                continue;
            }
            changed = true;
            let mut new_index = vec![usize::MAX; has_child.len()];
            let mut kept = 0;
            for (i, &h) in has_child.iter().enumerate() {
                if h {
                    new_index[i] = kept;
                    kept += 1;
                }
            }
            let cur = &layers[l];
            let entries = cur
                .entries
                .iter()
                .filter(|e| has_child[e.0])
                .map(|&(r, c, w)| (new_index[r], c, w))
                .collect();
            let bias = cur
                .bias
                .iter()
                .zip(&has_child)
                .filter(|(_, &h)| h)
                .map(|(&b, _)| b)
                .collect();
            layers[l] = AffineLayer {
                rows: kept,
                cols: cur.cols,
                entries,
                bias,
            };
            let next = &layers[l + 1];
            let entries = next
                .entries
                .iter()
                .map(|&(r, c, w)| (r, new_index[c], w))
                .collect();
            layers[l + 1] = AffineLayer {
                rows: next.rows,
                cols: kept,
                entries,
                bias: next.bias.clone(),
            };
        }

        if !changed {
            break;
        }
    }
    Network::new(d, layers, net.activation()).expect("normalization preserves layer chaining")
}
