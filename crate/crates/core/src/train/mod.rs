//! SGD on a fixed bump-subnetwork topology, Lasso on the output layer, and
//! error-vs-edges experiments.

mod experiment;
mod lasso;

pub use experiment::{error_vs_edges_experiment, ExperimentConfig, ExperimentOutput, ExperimentRow, TargetKind};
pub use lasso::{kkt_violation, lasso_last_layer, lasso_path, lasso_path_fits, LassoFit};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::network::{hat_sup, normalize_network, AffineLayer, BumpShape, Network};

/// First-layer nodes per subnetwork: three shifted ReLUs per input coordinate.
pub const FIRST_LAYER_NODES: usize = 6;

/// One bump subnetwork `c · ρ(Σ_k v_k ρ(w_k·x + b_k) − q)`; `v` and `q` are frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Subnet {
    pub w: [[f64; 2]; FIRST_LAYER_NODES],
    pub b: [f64; FIRST_LAYER_NODES],
    pub c: f64,
}

/// `n_sub` bump subnetworks summed with trainable output weights and bias.
///
/// Layer 2 (`v`, `q`) comes from the bump construction and is never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTopology {
    pub subnets: Vec<Subnet>,
    pub output_bias: f64,
    v: [f64; FIRST_LAYER_NODES],
    q: f64,
}

/// Which of the three layers are trainable.
pub const TRAINABLE_LAYERS: [bool; 3] = [true, false, true];

fn frozen_layer() -> ([f64; FIRST_LAYER_NODES], [f64; FIRST_LAYER_NODES], f64) {
    let shape = BumpShape::default();
    let terms = shape.terms();
    debug_assert_eq!(terms.len() * 2, FIRST_LAYER_NODES);
    let mut v = [0.0; FIRST_LAYER_NODES];
    let mut shift = [0.0; FIRST_LAYER_NODES];
    for i in 0..2 {
        for (k, &(s, c)) in terms.iter().enumerate() {
            v[i * terms.len() + k] = c;
            shift[i * terms.len() + k] = s;
        }
    }
    (v, shift, hat_sup(shape, ActivationKind::Relu))
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

impl FixedTopology {
    /// Subnetworks whose first layer is `x ↦ (A x + t)_i − shift_k` with `A`, `t` uniform in
    /// `[−1, 1]`, and output weights uniform in `[−1/2, 1/2]`.
    pub fn random(n_sub: usize, seed: u64) -> Result<Self> {
        if n_sub == 0 {
            return Err(invalid("the topology needs at least one subnetwork"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, shift, q) = frozen_layer();
        let per = FIRST_LAYER_NODES / 2;
        let subnets = (0..n_sub)
            .map(|_| {
                let a: [[f64; 2]; 2] = [[rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)], [
                    rng.gen_range(-1.0..=1.0),
                    rng.gen_range(-1.0..=1.0),
                ]];
                let t = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
                let mut w = [[0.0; 2]; FIRST_LAYER_NODES];
                let mut b = [0.0; FIRST_LAYER_NODES];
                for k in 0..FIRST_LAYER_NODES {
                    w[k] = a[k / per];
                    b[k] = t[k / per] - shift[k];
                }
                Subnet {
                    w,
                    b,
                    c: rng.gen_range(-0.5..=0.5),
                }
            })
            .collect();
        Ok(Self {
            subnets,
            output_bias: 0.0,
            v,
            q,
        })
    }

    /// The untouched bump construction: identity first layer, unit output weight.
    pub fn exact_bumps(n_sub: usize) -> Result<Self> {
        if n_sub == 0 {
            return Err(invalid("the topology needs at least one subnetwork"));
        }
        let (v, shift, q) = frozen_layer();
        let per = FIRST_LAYER_NODES / 2;
        let mut w = [[0.0; 2]; FIRST_LAYER_NODES];
        let mut b = [0.0; FIRST_LAYER_NODES];
        for k in 0..FIRST_LAYER_NODES {
            w[k][k / per] = 1.0;
            b[k] = -shift[k];
        }
        Ok(Self {
            subnets: vec![Subnet { w, b, c: 1.0 }; n_sub],
            output_bias: 0.0,
            v,
            q,
        })
    }

    pub fn len(&self) -> usize {
        self.subnets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subnets.is_empty()
    }

    /// Frozen second-layer weights and bias.
    pub fn frozen(&self) -> ([f64; FIRST_LAYER_NODES], f64) {
        (self.v, -self.q)
    }

    /// Edges when every weight is nonzero: `n_sub·(6·2 + 6 + 1)`.
    pub fn nominal_edges(&self) -> usize {
        self.len() * (FIRST_LAYER_NODES * 2 + FIRST_LAYER_NODES + 1)
    }

    /// Output of subnetwork `s` before its output weight.
    #[inline]
    pub fn feature(&self, s: usize, x: [f64; 2]) -> f64 {
        let sub = &self.subnets[s];
        let mut u = -self.q;
        for k in 0..FIRST_LAYER_NODES {
            u += self.v[k] * relu(sub.w[k][0] * x[0] + sub.w[k][1] * x[1] + sub.b[k]);
        }
        relu(u)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.output_bias + (0..self.len()).map(|s| self.subnets[s].c * self.feature(s, x)).sum::<f64>()
    }

    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        if grid.dim() != 2 {
            return Err(invalid("the topology is defined on R^2"));
        }
        Ok(grid.sample(|x| self.eval([x[0], x[1]])))
    }

    /// Features `h_s` sampled on `grid`.
    pub fn features(&self, grid: &Grid) -> Vec<SampledFunction> {
        (0..self.len()).map(|s| grid.sample(|x| self.feature(s, [x[0], x[1]]))).collect()
    }

    /// Copy with new output weights.
    pub fn with_output_weights(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "output weights".into(),
                expected: self.len(),
                found: c.len(),
            });
        }
        let mut out = self.clone();
        for (sub, &ci) in out.subnets.iter_mut().zip(c) {
            sub.c = ci;
        }
        Ok(out)
    }

    /// Keeps the listed subnetworks, in the given order.
    pub fn subset(&self, keep: &[usize]) -> Self {
        Self {
            subnets: keep.iter().map(|&i| self.subnets[i].clone()).collect(),
            output_bias: self.output_bias,
            v: self.v,
            q: self.q,
        }
    }

    /// Three-layer ReLU network, subnetwork blocks laid out in parallel.
    pub fn to_network(&self) -> Result<Network> {
        let n = self.len();
        let mut l1 = Vec::with_capacity(n * FIRST_LAYER_NODES * 2);
        let mut b1 = Vec::with_capacity(n * FIRST_LAYER_NODES);
        let mut l2 = Vec::with_capacity(n * FIRST_LAYER_NODES);
        let mut l3 = Vec::with_capacity(n);
        for (s, sub) in self.subnets.iter().enumerate() {
            for k in 0..FIRST_LAYER_NODES {
                let row = s * FIRST_LAYER_NODES + k;
                l1.push((row, 0, sub.w[k][0]));
                l1.push((row, 1, sub.w[k][1]));
                b1.push(sub.b[k]);
                l2.push((s, row, self.v[k]));
            }
            l3.push((0, s, sub.c));
        }
        Network::new(
            2,
            vec![
                AffineLayer::new(n * FIRST_LAYER_NODES, 2, l1, b1)?,
                AffineLayer::new(n, n * FIRST_LAYER_NODES, l2, vec![-self.q; n])?,
                AffineLayer::new(1, n, l3, vec![self.output_bias])?,
            ],
            ActivationKind::Relu,
        )
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len() * 19 + 1);
        for sub in &self.subnets {
            for k in 0..FIRST_LAYER_NODES {
                p.extend_from_slice(&sub.w[k]);
                p.push(sub.b[k]);
            }
            p.push(sub.c);
        }
        p.push(self.output_bias);
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for sub in &mut self.subnets {
            for k in 0..FIRST_LAYER_NODES {
                sub.w[k][0] = it.next().unwrap();
                sub.w[k][1] = it.next().unwrap();
                sub.b[k] = it.next().unwrap();
            }
            sub.c = it.next().unwrap();
        }
        self.output_bias = it.next().unwrap();
    }

    /// Mean squared error over the samples and its gradient in the trainable parameters
    /// (per subnetwork: `w`, `b` interleaved per node, then `c`; the output bias last).
    pub fn loss_and_gradient(&self, xs: &[[f64; 2]], ys: &[f64]) -> (f64, Vec<f64>) {
        let per = FIRST_LAYER_NODES * 3 + 1;
        let mut grad = vec![0.0; self.len() * per + 1];
        let mut loss = 0.0;
        let mut z = [0.0; FIRST_LAYER_NODES];
        let mut hidden = vec![0.0; self.len()];
        let mut pre = vec![0.0; self.len()];
        let scale = 1.0 / xs.len().max(1) as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let mut out = self.output_bias;
            for (s, sub) in self.subnets.iter().enumerate() {
                let mut u = -self.q;
                for k in 0..FIRST_LAYER_NODES {
                    u += self.v[k] * relu(sub.w[k][0] * x[0] + sub.w[k][1] * x[1] + sub.b[k]);
                }
                pre[s] = u;
                hidden[s] = relu(u);
                out += sub.c * hidden[s];
            }
            let e = out - y;
            loss += e * e * scale;
            let de = 2.0 * e * scale;
            for (s, sub) in self.subnets.iter().enumerate() {
                let g = &mut grad[s * per..(s + 1) * per];
                g[per - 1] += de * hidden[s];
                // ReLU subgradient at 0 is 0.
                if pre[s] <= 0.0 {
                    continue;
                }
                let du = de * sub.c;
                for k in 0..FIRST_LAYER_NODES {
                    z[k] = sub.w[k][0] * x[0] + sub.w[k][1] * x[1] + sub.b[k];
                    if z[k] > 0.0 {
                        let dz = du * self.v[k];
                        g[3 * k] += dz * x[0];
                        g[3 * k + 1] += dz * x[1];
                        g[3 * k + 2] += dz;
                    }
                }
            }
            *grad.last_mut().unwrap() += de;
        }
        (loss, grad)
    }

    /// Pre-activations of all first- and second-layer nodes at `x`.
    pub fn preactivations(&self, x: [f64; 2]) -> Vec<f64> {
        let mut out = Vec::new();
        for sub in &self.subnets {
            let mut u = -self.q;
            for k in 0..FIRST_LAYER_NODES {
                let z = sub.w[k][0] * x[0] + sub.w[k][1] * x[1] + sub.b[k];
                out.push(z);
                u += self.v[k] * relu(z);
            }
            out.push(u);
        }
        out
    }

    /// Flat trainable parameters, in gradient order.
    pub fn trainable(&self) -> Vec<f64> {
        self.params()
    }

    pub fn set_trainable(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.len() * (FIRST_LAYER_NODES * 3 + 1) + 1 {
            return Err(invalid("wrong number of trainable parameters"));
        }
        self.set_params(p);
        Ok(())
    }
}

/// `n_sub` randomly initialized bump subnetworks with the trainable-layer mask.
pub fn build_fixed_topology(n_sub: usize, seed: u64) -> Result<(FixedTopology, [bool; 3])> {
    Ok((FixedTopology::random(n_sub, seed)?, TRAINABLE_LAYERS))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Points per axis of the sample grid on `[−1, 1]²`.
    pub grid_n: usize,
    /// The learning rate is multiplied by `decay` every `decay_every` epochs.
    pub decay_every: usize,
    pub decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 64,
            seed: 1,
            grid_n: 64,
            decay_every: 100,
            decay: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::cube(2, -1.0, 1.0, self.grid_n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be non-negative, got {}", self.learning_rate)));
        }
        if self.grid_n < 2 {
            return Err(invalid("the sample grid needs at least 2 points per axis"));
        }
        if self.decay_every == 0 {
            return Err(invalid("decay period must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossTrace {
    /// Mean squared error over each epoch's minibatches.
    pub epoch_loss: Vec<f64>,
    pub final_l2_error: f64,
}

/// Minibatch SGD on the mean squared error over the target's grid samples; layer 2 stays frozen.
pub fn sgd_train(
    init: &FixedTopology,
    target: &SampledFunction,
    cfg: &TrainConfig,
) -> Result<(FixedTopology, LossTrace)> {
    cfg.validate()?;
    if target.grid.dim() != 2 {
        return Err(invalid("training targets live on 2-D grids"));
    }
    let xs: Vec<[f64; 2]> = (0..target.grid.len())
        .map(|i| {
            let p = target.grid.point(i);
            [p[0], p[1]]
        })
        .collect();
    let mut net = init.clone();
    let mut params = net.params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut bx = Vec::with_capacity(cfg.batch_size);
    let mut by = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.decay.powi((epoch / cfg.decay_every) as i32);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| xs[i]));
            by.extend(chunk.iter().map(|&i| target.values[i]));
            let (loss, grad) = net.loss_and_gradient(&bx, &by);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch: epoch + 1 });
            }
            total += loss * chunk.len() as f64;
            if lr != 0.0 {
                for (p, g) in params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
                net.set_params(&params);
            }
        }
        let mean = total / xs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: epoch + 1 });
        }
        epoch_loss.push(mean);
    }
    let final_l2_error = crate::grid::grid_norms(&net.sample(&target.grid)?, target)?.0;
    Ok((net, LossTrace { epoch_loss, final_l2_error }))
}

/// Weighted sum of the `m_sub` subnetworks with the largest `|c*|` (ties to the lower index),
/// using the `c*` weights as they are.
pub fn select_top_subnetworks(net: &FixedTopology, coeffs: &[f64], m_sub: usize) -> Result<Network> {
    Ok(normalize_network(&select_top_topology(net, coeffs, m_sub)?.to_network()?))
}

/// As [`select_top_subnetworks`], keeping the trainable representation.
pub fn select_top_topology(net: &FixedTopology, coeffs: &[f64], m_sub: usize) -> Result<FixedTopology> {
    if coeffs.len() != net.len() {
        return Err(Error::DimensionMismatch {
            context: "Lasso coefficients".into(),
            expected: net.len(),
            found: coeffs.len(),
        });
    }
    if m_sub > net.len() {
        return Err(Error::NotEnoughAtoms {
            requested: m_sub,
            available: net.len(),
        });
    }
    let mut idx: Vec<usize> = (0..net.len()).collect();
    idx.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()).then(a.cmp(&b)));
    idx.truncate(m_sub);
    idx.sort_unstable();
    let kept: Vec<f64> = idx.iter().map(|&i| coeffs[i]).collect();
    let mut sub = net.subset(&idx);
    for (s, c) in sub.subnets.iter_mut().zip(kept) {
        s.c = c;
    }
    Ok(sub)
}
