use super::bits::{BitReader, Bitstream};
use super::QuantizationSpec;
use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::network::{AffineLayer, Network};

/// A quantization header and the encoded bit payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedNetwork {
    pub spec: QuantizationSpec,
    pub payload: Bitstream,
}

/// `M′`: the smallest power of two with `M′ ≥ max(M, 2, d)`.
///
/// Keeping `d ≤ M′` pins `⌈log2(M′ + d)⌉ = log2 M′ + 1`, so the field width
/// is known to the decoder before `d` is read.
pub fn padded_edge_count(m: usize, d: usize) -> usize {
    m.max(2).max(d).next_power_of_two()
}

fn field_width(padded: usize) -> u32 {
    padded.trailing_zeros() + 2
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// `5M̃ + 4M̃⌈log2 M̃⌉ + 2⌈log2 M̃⌉ + 1 + 3M̃W` with `M̃ = M′ + d`.
///
/// For `M = 0` the stream is a single flag bit and one output weight, `1 + W`.
pub fn code_length_bound(m: usize, d: usize, w: usize) -> usize {
    if m == 0 {
        return 1 + w;
    }
    let mt = padded_edge_count(m, d) + d;
    let lg = ceil_log2(mt);
    5 * mt + 4 * mt * lg + 2 * lg + 1 + 3 * mt * w
}

fn check_normalized(net: &Network) -> Result<()> {
    let layers = net.layers();
    if net.connectivity() == 0 {
        if layers.len() > 1 {
            return Err(Error::NotNormalized("an edgeless network must have a single layer".into()));
        }
        return Ok(());
    }
    for l in 0..layers.len() - 1 {
        let mut has_child = vec![false; layers[l].rows()];
        for &(_, c, _) in layers[l + 1].entries() {
            has_child[c] = true;
        }
        if let Some(node) = has_child.iter().position(|&h| !h) {
            return Err(Error::NotNormalized(format!(
                "node {} of layer {} has no outgoing edge",
                node + 1,
                l + 1
            )));
        }
    }
    Ok(())
}

/// Column-major children lists of one layer: for each source node, `(row, weight)` ascending.
fn children(layer: &AffineLayer) -> Vec<Vec<(usize, f64)>> {
    let mut cols = vec![Vec::new(); layer.cols()];
    for &(r, c, w) in layer.entries() {
        cols[c].push((r, w));
    }
    cols
}

/// Serializes a normalized network whose weights all lie on the `spec` grid.
pub fn encode_network(net: &Network, spec: QuantizationSpec) -> Result<EncodedNetwork> {
    check_normalized(net)?;
    let width = spec.width();
    let code = |w: f64| {
        spec.to_code(w).ok_or(Error::OffGrid {
            weight: w,
            fractional_bits: spec.fractional_bits,
        })
    };
    let layers = net.layers();
    let d = net.input_dim();
    let m = net.connectivity();
    let mut s = Bitstream::new();

    if m == 0 {
        s.push_bit(false);
        for &b in layers[0].bias() {
            s.push_signed(code(b)?, width);
        }
        return Ok(EncodedNetwork { spec, payload: s });
    }

    let padded = padded_edge_count(m, d);
    let b = field_width(padded);
    let capacity = (1u64 << b) - 1;
    let widths: Vec<usize> = std::iter::once(d).chain(layers.iter().map(AffineLayer::rows)).collect();
    let total_nodes: usize = widths.iter().sum();
    let push = |s: &mut Bitstream, v: usize, what: &str| -> Result<()> {
        if v as u64 > capacity {
            return Err(Error::Invariant(format!("{what} {v} does not fit in {b} bits")));
        }
        s.push_bits(v as u64, b);
        Ok(())
    };

    for _ in 0..padded {
        s.push_bit(true);
    }
    s.push_bit(false);
    push(&mut s, layers.len(), "depth")?;
    for &n in &widths {
        push(&mut s, n, "layer width")?;
    }

    let kids: Vec<Vec<Vec<(usize, f64)>>> = layers.iter().map(children).collect();
    let mut offsets = Vec::with_capacity(widths.len());
    let mut acc = 0;
    for &n in &widths {
        offsets.push(acc);
        acc += n;
    }
    if total_nodes as u64 > capacity {
        return Err(Error::Invariant(format!("{total_nodes} nodes exceed {b}-bit indices")));
    }
    for (k, &n) in widths.iter().enumerate() {
        for j in 0..n {
            if let Some(list) = kids.get(k) {
                for &(row, _) in &list[j] {
                    push(&mut s, offsets[k + 1] + row + 1, "node index")?;
                }
            }
            push(&mut s, 0, "terminator")?;
        }
    }
    push(&mut s, 0, "terminator")?;

    for (k, &n) in widths.iter().enumerate() {
        for j in 0..n {
            let node_weight = if k == 0 { 0 } else { code(layers[k - 1].bias()[j])? };
            s.push_signed(node_weight, width);
            if let Some(list) = kids.get(k) {
                for &(_, w) in &list[j] {
                    s.push_signed(code(w)?, width);
                }
            }
        }
    }

    let bound = code_length_bound(m, d, width as usize);
    if s.len() > bound {
        return Err(Error::Invariant(format!(
            "payload of {} bits exceeds the bound {bound}",
            s.len()
        )));
    }
    Ok(EncodedNetwork { spec, payload: s })
}

fn decode_err(r: &BitReader<'_>, message: impl Into<String>) -> Error {
    Error::Decode {
        offset: r.position(),
        message: message.into(),
    }
}

/// Inverse of [`encode_network`].
///
/// An edgeless stream does not carry `d`; it decodes with input dimension 1,
/// see [`decode_network_with_dim`] to supply it.
pub fn decode_network(enc: &EncodedNetwork, activation: ActivationKind) -> Result<Network> {
    decode_inner(enc, activation, None)
}

/// Like [`decode_network`], with the input dimension known from context.
pub fn decode_network_with_dim(enc: &EncodedNetwork, activation: ActivationKind, d: usize) -> Result<Network> {
    decode_inner(enc, activation, Some(d))
}

fn check_padding(r: &mut BitReader<'_>) -> Result<()> {
    if r.remaining() >= 8 {
        return Err(decode_err(r, format!("{} trailing bits after the payload", r.remaining())));
    }
    while r.remaining() > 0 {
        if r.read_bit()? {
            return Err(decode_err(r, "nonzero padding"));
        }
    }
    Ok(())
}

fn decode_inner(enc: &EncodedNetwork, activation: ActivationKind, d_hint: Option<usize>) -> Result<Network> {
    let spec = enc.spec;
    let width = spec.width();
    let mut r = enc.payload.reader();

    let mut padded = 0usize;
    while r.read_bit()? {
        padded += 1;
    }
    if padded == 0 {
        let fields = r.remaining() / width as usize;
        if fields == 0 {
            return Err(decode_err(&r, "edgeless stream without an output weight"));
        }
        let bias = (0..fields)
            .map(|_| r.read_signed(width).map(|c| spec.from_code(c)))
            .collect::<Result<Vec<_>>>()?;
        check_padding(&mut r)?;
        let d = d_hint.unwrap_or(1);
        let layer = AffineLayer::new(fields, d, Vec::new(), bias)?;
        return Network::new(d, vec![layer], activation);
    }
    if padded < 2 || !padded.is_power_of_two() {
        return Err(decode_err(&r, format!("edge prefix length {padded} is not a power of two >= 2")));
    }
    let b = field_width(padded);
    let read = |r: &mut BitReader<'_>| r.read_bits(b).map(|v| v as usize);

    let depth = read(&mut r)?;
    if depth == 0 {
        return Err(decode_err(&r, "depth 0"));
    }
    let mut widths = Vec::with_capacity(depth + 1);
    for _ in 0..=depth {
        widths.push(read(&mut r)?);
    }
    let d = widths[0];
    if d == 0 || d > padded {
        return Err(decode_err(&r, format!("input dimension {d} inconsistent with prefix {padded}")));
    }
    if let Some(h) = d_hint {
        if h != d {
            return Err(decode_err(&r, format!("stream has input dimension {d}, expected {h}")));
        }
    }
    let mut offsets = Vec::with_capacity(widths.len());
    let mut acc = 0usize;
    for &n in &widths {
        offsets.push(acc);
        acc += n;
    }

    // topology[k][j] = child rows in layer k+1 of node j in layer k
    let mut topology: Vec<Vec<Vec<usize>>> = widths.iter().map(|&n| vec![Vec::new(); n]).collect();
    let mut m = 0usize;
    for k in 0..widths.len() {
        for j in 0..widths[k] {
            loop {
                let idx = read(&mut r)?;
                if idx == 0 {
                    break;
                }
                if k == depth {
                    return Err(decode_err(&r, "output node with children"));
                }
                let lo = offsets[k + 1] + 1;
                let hi = offsets[k + 1] + widths[k + 1];
                if idx < lo || idx > hi {
                    return Err(decode_err(&r, format!("child index {idx} outside {lo}..={hi}")));
                }
                let row = idx - lo;
                if topology[k][j].last().is_some_and(|&prev| prev >= row) {
                    return Err(decode_err(&r, "children not strictly ascending"));
                }
                topology[k][j].push(row);
                m += 1;
                if m > padded {
                    return Err(decode_err(&r, format!("more than {padded} edges")));
                }
            }
        }
    }
    if read(&mut r)? != 0 {
        return Err(decode_err(&r, "missing final terminator"));
    }
    if padded_edge_count(m, d) != padded {
        return Err(decode_err(&r, format!("{m} edges do not match prefix {padded}")));
    }

    let mut entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); depth];
    let mut biases: Vec<Vec<f64>> = widths[1..].iter().map(|&n| vec![0.0; n]).collect();
    for k in 0..widths.len() {
        for j in 0..widths[k] {
            let node = r.read_signed(width)?;
            if k == 0 {
                if node != 0 {
                    return Err(decode_err(&r, "input node with nonzero weight"));
                }
            } else {
                biases[k - 1][j] = spec.from_code(node);
            }
            for &row in &topology[k][j] {
                let w = r.read_signed(width)?;
                if w == 0 {
                    return Err(decode_err(&r, "zero edge weight"));
                }
                entries[k].push((row, j, spec.from_code(w)));
            }
        }
    }
    check_padding(&mut r)?;

    let layers = entries
        .into_iter()
        .zip(biases)
        .enumerate()
        .map(|(l, (e, bias))| AffineLayer::new(widths[l + 1], widths[l], e, bias))
        .collect::<Result<Vec<_>>>()?;
    Network::new(d, layers, activation)
}
