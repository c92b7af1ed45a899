//! Strictly layered sparse networks.
//!
//! A [`Network`] is a chain of sparse [`AffineLayer`]s with the activation
//! applied after every layer but the last. Zero weights are never stored, so
//! the stored entry count is exactly the connectivity `M(Φ)`.

mod bump;
mod combinators;
pub mod nnet;
mod normalize;
pub mod spectrum;

pub use bump::{bump_network, hat_network, hat_sup, BumpShape};
pub use combinators::{
    affine_transform_network, pad_to_depth, parallel_sum, sum_of_translates,
};
pub use normalize::normalize_network;

use crate::activation::ActivationKind;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, SampledFunction};

/// One sparse affine map `x ↦ A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    rows: usize,
    cols: usize,
    /// `(row, col, weight)` sorted by `(row, col)`, all weights nonzero.
    entries: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
}

impl AffineLayer {
    /// Builds a layer; zero weights are dropped, duplicates and out-of-range indices rejected.
    pub fn new(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if bias.len() != rows {
            return Err(Error::DimensionMismatch {
                context: "layer bias".into(),
                expected: rows,
                found: bias.len(),
            });
        }
        entries.retain(|e| e.2 != 0.0);
        entries.sort_by_key(|e| (e.0, e.1));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(invalid(format!("duplicate entry ({}, {})", w[0].0, w[0].1)));
            }
        }
        if let Some(&(r, c, _)) = entries.iter().find(|e| e.0 >= rows || e.1 >= cols) {
            return Err(invalid(format!(
                "entry ({r}, {c}) outside a {rows}x{cols} layer"
            )));
        }
        if let Some(w) = entries.iter().map(|e| e.2).chain(bias.iter().copied()).find(|w| !w.is_finite()) {
            return Err(invalid(format!("non-finite weight {w}")));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            bias,
        })
    }

    /// A layer with no edges and zero bias.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
            bias: vec![0.0; rows],
        }
    }

    /// Builds from entries that may repeat; repeated `(row, col)` weights are summed.
    pub fn accumulate(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (e.0, e.1) => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        Self::new(rows, cols, merged, bias)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(row, col), |e| (e.0, e.1))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0)
    }

    /// Sets one weight; a zero removes the entry.
    pub fn set(&mut self, row: usize, col: usize, weight: f64) {
        assert!(row < self.rows && col < self.cols, "index out of range");
        match self.entries.binary_search_by_key(&(row, col), |e| (e.0, e.1)) {
            Ok(i) if weight == 0.0 => {
                self.entries.remove(i);
            }
            Ok(i) => self.entries[i].2 = weight,
            Err(_) if weight == 0.0 => {}
            Err(i) => self.entries.insert(i, (row, col, weight)),
        }
    }

    pub fn set_bias(&mut self, row: usize, value: f64) {
        self.bias[row] = value;
    }

    /// Applies every weight and bias through `f`, dropping weights that map to zero.
    pub fn map_weights(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, w)| (r, c, f(w)))
            .filter(|e| e.2 != 0.0)
            .collect();
        let bias = self.bias.iter().map(|&b| f(b)).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            entries,
            bias,
        }
    }

    #[inline]
    fn apply_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for &(r, c, w) in &self.entries {
            out[r] += w * input[c];
        }
    }
}

/// A strictly layered feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<AffineLayer>,
    activation: ActivationKind,
}

impl Network {
    pub fn new(
        input_dim: usize,
        layers: Vec<AffineLayer>,
        activation: ActivationKind,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        if layers.is_empty() {
            return Err(invalid("a network needs at least one layer"));
        }
        let mut width = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.cols != width {
                return Err(Error::DimensionMismatch {
                    context: format!("columns of layer {}", l + 1),
                    expected: width,
                    found: layer.cols,
                });
            }
            width = layer.rows;
        }
        Ok(Self {
            input_dim,
            layers,
            activation,
        })
    }

    /// Network computing the constant `value` on `R^d` with a single empty layer.
    pub fn constant(input_dim: usize, value: f64, activation: ActivationKind) -> Self {
        let mut layer = AffineLayer::zeros(1, input_dim);
        layer.set_bias(0, value);
        Self {
            input_dim,
            layers: vec![layer],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn connectivity(&self) -> usize {
        self.layers.iter().map(AffineLayer::nnz).sum()
    }

    /// `d + Σ N_ℓ`.
    pub fn node_count(&self) -> usize {
        self.input_dim + self.layers.iter().map(|l| l.rows).sum::<usize>()
    }

    pub fn into_layers(self) -> Vec<AffineLayer> {
        self.layers
    }

    /// Replaces every edge and node weight by `f(weight)`.
    pub fn map_weights(&self, mut f: impl FnMut(f64) -> f64) -> Network {
        Network {
            input_dim: self.input_dim,
            layers: self.layers.iter().map(|l| l.map_weights(&mut f)).collect(),
            activation: self.activation,
        }
    }

    /// Largest absolute edge or node weight.
    pub fn max_abs_weight(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.entries.iter().map(|e| e.2).chain(l.bias.iter().copied()))
            .fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input".into(),
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let mut scratch = Scratch::default();
        Ok(self.eval_with(x, &mut scratch).to_vec())
    }

    /// First output component.
    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?[0])
    }

    /// Evaluation reusing caller-provided buffers; `x` must have length `input_dim`.
    pub fn eval_with<'s>(&self, x: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        debug_assert_eq!(x.len(), self.input_dim);
        let Scratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply_into(a, b);
            if l != last {
                for v in b.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            std::mem::swap(a, b);
        }
        a
    }

    /// Samples the first output on every grid node.
    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        if grid.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "grid dimension vs network input".into(),
                expected: self.input_dim,
                found: grid.dim(),
            });
        }
        let mut scratch = Scratch::default();
        Ok(grid.sample(|x| self.eval_with(x, &mut scratch)[0]))
    }
}

/// Reusable evaluation buffers.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Evaluates `net` at `x`; see [`Network::eval`].
pub fn eval_network(net: &Network, x: &[f64]) -> Result<Vec<f64>> {
    net.eval(x)
}

/// Total number of stored (nonzero) edge weights.
pub fn connectivity(net: &Network) -> usize {
    net.connectivity()
}
