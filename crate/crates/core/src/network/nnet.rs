//! Line-oriented `.nnet` text format.
//!
//! ```text
//! NNET 1
//! activation relu
//! d 2
//! L 2
//! layer 1 2 2
//! A 1 1 1 0.5
//! b 1 1 0.0
//! ...
//! ```
//! Indices are 1-based. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;

use super::{AffineLayer, Network};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};

pub fn to_string(net: &Network) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NNET 1");
    let _ = writeln!(out, "activation {}", net.activation());
    let _ = writeln!(out, "d {}", net.input_dim());
    let _ = writeln!(out, "L {}", net.depth());
    for (l, layer) in net.layers().iter().enumerate() {
        let l = l + 1;
        let _ = writeln!(out, "layer {l} {} {}", layer.rows(), layer.cols());
        for &(r, c, w) in layer.entries() {
            let _ = writeln!(out, "A {l} {} {} {w:?}", r + 1, c + 1);
        }
        for (r, b) in layer.bias().iter().enumerate() {
            let _ = writeln!(out, "b {l} {} {b:?}", r + 1);
        }
    }
    out
}

struct Pending {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
}

pub fn parse(text: &str) -> Result<Network> {
    let mut header = false;
    let mut activation = None;
    let mut d = None;
    let mut depth = None;
    let mut layers: Vec<Option<Pending>> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let int = |k: usize| -> Result<usize> {
            fields
                .get(k)
                .ok_or_else(|| err(format!("missing field {k} in `{line}`")))?
                .parse::<usize>()
                .map_err(|_| err(format!("expected an integer in field {k} of `{line}`")))
        };
        let real = |k: usize| -> Result<f64> {
            let v = fields
                .get(k)
                .ok_or_else(|| err(format!("missing field {k} in `{line}`")))?
                .parse::<f64>()
                .map_err(|_| err(format!("expected a number in field {k} of `{line}`")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("non-finite value in `{line}`")))
            }
        };
        let arity = |n: usize| -> Result<()> {
            if fields.len() == n {
                Ok(())
            } else {
                Err(err(format!("`{}` takes {} fields, got {}", fields[0], n - 1, fields.len() - 1)))
            }
        };
        if !header {
            if fields != ["NNET", "1"] {
                return Err(err("expected header `NNET 1`".into()));
            }
            header = true;
            continue;
        }
        match fields[0] {
            "activation" => {
                activation = Some(
                    fields[1..]
                        .join(" ")
                        .parse::<ActivationKind>()
                        .map_err(|e| err(e.to_string()))?,
                );
            }
            "d" => {
                arity(2)?;
                d = Some(int(1)?);
            }
            "L" => {
                arity(2)?;
                let l = int(1)?;
                if l == 0 {
                    return Err(err("L must be positive".into()));
                }
                depth = Some(l);
                layers = (0..l).map(|_| None).collect();
            }
            "layer" => {
                arity(4)?;
                let l = layer_index(&layers, int(1)?).map_err(err)?;
                if layers[l].is_some() {
                    return Err(err(format!("layer {} declared twice", l + 1)));
                }
                let (rows, cols) = (int(2)?, int(3)?);
                layers[l] = Some(Pending {
                    rows,
                    cols,
                    entries: Vec::new(),
                    bias: vec![0.0; rows],
                });
            }
            "A" => {
                arity(5)?;
                let l = layer_index(&layers, int(1)?).map_err(err)?;
                let (r, c, w) = (int(2)?, int(3)?, real(4)?);
                let p = layers[l]
                    .as_mut()
                    .ok_or_else(|| err(format!("layer {} used before its declaration", l + 1)))?;
                if r == 0 || r > p.rows || c == 0 || c > p.cols {
                    return Err(err(format!("entry ({r}, {c}) outside a {}x{} layer", p.rows, p.cols)));
                }
                p.entries.push((r - 1, c - 1, w));
            }
            "b" => {
                arity(4)?;
                let l = layer_index(&layers, int(1)?).map_err(err)?;
                let (r, v) = (int(2)?, real(3)?);
                let p = layers[l]
                    .as_mut()
                    .ok_or_else(|| err(format!("layer {} used before its declaration", l + 1)))?;
                if r == 0 || r > p.rows {
                    return Err(err(format!("bias row {r} outside 1..={}", p.rows)));
                }
                p.bias[r - 1] = v;
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }

    let last_line = text.lines().count();
    let missing = |what: &str| Error::Parse {
        line: last_line,
        message: format!("missing `{what}`"),
    };
    if !header {
        return Err(missing("NNET 1"));
    }
    let activation = activation.ok_or_else(|| missing("activation"))?;
    let d = d.ok_or_else(|| missing("d"))?;
    depth.ok_or_else(|| missing("L"))?;
    let mut built = Vec::with_capacity(layers.len());
    for (l, p) in layers.into_iter().enumerate() {
        let p = p.ok_or_else(|| missing(&format!("layer {}", l + 1)))?;
        built.push(AffineLayer::new(p.rows, p.cols, p.entries, p.bias).map_err(|e| Error::Parse {
            line: last_line,
            message: format!("layer {}: {e}", l + 1),
        })?);
    }
    Network::new(d, built, activation)
}

fn layer_index(layers: &[Option<Pending>], l: usize) -> std::result::Result<usize, String> {
    if layers.is_empty() {
        return Err("`L` must precede layer data".into());
    }
    if l == 0 || l > layers.len() {
        return Err(format!("layer {l} outside 1..={}", layers.len()));
    }
    Ok(l - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::bump_network;
    use crate::network::testing::random_network;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let net = random_network(&mut rng, 3, &[7, 4, 1], 0.5, 3.0);
            assert_eq!(parse(&to_string(&net)).unwrap(), net);
        }
        let g = bump_network(ActivationKind::smooth_relu(0.5).unwrap(), 2, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(parse(&to_string(&g)).unwrap(), g);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "NNET 1\nactivation relu\nd 1\nL 1\nlayer 1 1 1\nfoo 1\n";
        match parse(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("foo"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse("NNET 2\n").is_err());
        assert!(parse("NNET 1\nactivation relu\nd 1\nL 1\n").is_err());
        let dup = "NNET 1\nactivation relu\nd 1\nL 1\nlayer 1 1 1\nA 1 1 1 1.0\nA 1 1 1 2.0\n";
        assert!(parse(dup).is_err());
        let range = "NNET 1\nactivation relu\nd 1\nL 1\nlayer 1 1 1\nA 1 2 1 1.0\n";
        assert!(matches!(parse(range), Err(Error::Parse { line: 6, .. })));
    }

    #[test]
    fn comments_and_defaults() {
        let text = "# hand written\nNNET 1\nactivation relu\nd 1\nL 1\nlayer 1 1 1\nA 1 1 1 2.0 # slope\n";
        let net = parse(text).unwrap();
        assert_eq!(net.eval_scalar(&[3.0]).unwrap(), 6.0);
    }
}
