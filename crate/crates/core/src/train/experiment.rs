use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{lasso_path_fits, select_top_topology, sgd_train, FixedTopology, TrainConfig};
use crate::affine::{generate_cartoon, line_singularity_target, CartoonParams};
use crate::error::{invalid, Result};
use crate::grid::{grid_norms, SampledFunction};
use crate::network::{normalize_network, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Line,
    Cartoon,
}

impl std::str::FromStr for TargetKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(Self::Line),
            "cartoon" => Ok(Self::Cartoon),
            other => Err(invalid(format!("unknown target `{other}`, expected line or cartoon"))),
        }
    }
}

/// Experiment settings; serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetKind,
    /// Subnetwork counts (`line`) or `M_sub` values (`cartoon`).
    pub sizes: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub grid_n: usize,
    /// Line target: normal angle in degrees and offset.
    pub theta_deg: f64,
    pub offset: f64,
    /// Cartoon target: the instance and the size of the large network.
    pub beta: f64,
    pub cartoon_seed: u64,
    pub n_sub_large: usize,
    pub lambda_steps: usize,
    pub lambda_ratio: f64,
    /// Pick `λ` separately for every `M_sub`; otherwise one fit, sized for the largest `M_sub`,
    /// is truncated to its top `M_sub` coefficients.
    pub lambda_per_size: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: TargetKind::Line,
            sizes: vec![4, 8, 16, 32, 64],
            epochs: 200,
            lr: 0.01,
            batch_size: 64,
            seed: 1,
            grid_n: 64,
            theta_deg: 30.0,
            offset: 0.0,
            beta: 2.0,
            cartoon_seed: 7,
            n_sub_large: 512,
            lambda_steps: 60,
            lambda_ratio: 0.85,
            lambda_per_size: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(format!("experiment config: {e}")))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_size: self.batch_size,
            seed: self.seed,
            grid_n: self.grid_n,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(invalid("sizes must be a non-empty list of positive counts"));
        }
        if self.target == TargetKind::Cartoon && self.sizes.iter().any(|&m| m > self.n_sub_large) {
            return Err(invalid(format!("M_sub values must not exceed n_sub_large = {}", self.n_sub_large)));
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) || self.lambda_steps == 0 {
            return Err(invalid("lambda_ratio must lie in (0, 1) and lambda_steps be positive"));
        }
        Ok(())
    }

    /// Target samples on the training grid; the cartoon is pulled back from `[0, 1]²`.
    pub fn target_samples(&self) -> Result<SampledFunction> {
        let grid = self.train_config().grid()?;
        match self.target {
            TargetKind::Line => line_singularity_target(self.theta_deg.to_radians(), self.offset, &grid),
            TargetKind::Cartoon => {
                let f = generate_cartoon(CartoonParams {
                    beta: self.beta,
                    nu: 1.0,
                    seed: self.cartoon_seed,
                })?;
                Ok(grid.sample(|x| f.eval([(x[0] + 1.0) / 2.0, (x[1] + 1.0) / 2.0])))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    /// `n_sub` (`line`) or `M_sub` (`cartoon`).
    pub size: usize,
    pub edges: usize,
    pub l2_error: f64,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Sorted by edges.
    pub rows: Vec<ExperimentRow>,
    /// Network of the last row.
    pub network: Network,
    /// Epoch-mean losses of every training run, in run order.
    pub traces: Vec<Vec<f64>>,
}

impl ExperimentOutput {
    /// Writes `edges,l2_error,epochs,seed`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["edges", "l2_error", "epochs", "seed"])?;
        for r in &self.rows {
            w.write_record([r.edges.to_string(), format!("{:e}", r.l2_error), r.epochs.to_string(), r.seed.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluate(top: &FixedTopology, target: &SampledFunction) -> Result<(Network, usize, f64)> {
    let net = normalize_network(&top.to_network()?);
    let err = grid_norms(&net.sample(&target.grid)?, target)?.0;
    Ok((net.clone(), net.connectivity(), err))
}

/// Error against edge count: one trained network per size on the line target; one large
/// network, a Lasso output layer and a sweep over `M_sub` on the cartoon target.
pub fn error_vs_edges_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let target = cfg.target_samples()?;
    let tc = cfg.train_config();
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut nets = Vec::new();
    match cfg.target {
        TargetKind::Line => {
            for &n in &cfg.sizes {
                let init = FixedTopology::random(n, cfg.seed)?;
                let (trained, trace) = sgd_train(&init, &target, &tc)?;
                traces.push(trace.epoch_loss);
                let (net, edges, l2_error) = evaluate(&trained, &target)?;
                rows.push(ExperimentRow {
                    size: n,
                    edges,
                    l2_error,
                    epochs: cfg.epochs,
                    seed: cfg.seed,
                });
                nets.push(net);
            }
        }
        TargetKind::Cartoon => {
            let init = FixedTopology::random(cfg.n_sub_large, cfg.seed)?;
            let (trained, trace) = sgd_train(&init, &target, &tc)?;
            traces.push(trace.epoch_loss);
            let features = trained.features(&target.grid);
            let bias = trained.output_bias;
            let shifted = SampledFunction::new(target.grid.clone(), target.values.iter().map(|v| v - bias).collect())?;
            let max_m = *cfg.sizes.iter().max().unwrap();
            let fits = lasso_path_fits(&features, &shifted, max_m, cfg.lambda_steps, cfg.lambda_ratio)?;
            for &m in &cfg.sizes {
                let fit = if cfg.lambda_per_size {
                    fits.iter().rev().find(|f| f.active() <= m).unwrap_or(&fits[0])
                } else {
                    fits.last().unwrap()
                };
                let top = select_top_topology(&trained, &fit.coeffs, m)?;
                let (net, edges, l2_error) = evaluate(&top, &target)?;
                rows.push(ExperimentRow {
                    size: m,
                    edges,
                    l2_error,
                    epochs: cfg.epochs,
                    seed: cfg.seed,
                });
                nets.push(net);
            }
        }
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].edges, rows[i].size));
    let network = nets.swap_remove(*order.last().unwrap());
    let rows = order.iter().map(|&i| rows[i].clone()).collect();
    Ok(ExperimentOutput { rows, network, traces })
}
