use std::io::Write;

use super::{transfer_to_network, MTermSolver};
use crate::affine::ShearletSystem;
use crate::codec::{encode_network, quantize_network, required_range_bits};
use crate::error::{invalid, Result};
use crate::grid::{grid_norms, Grid, SampledFunction};
use crate::network::{normalize_network, Network};

/// Least-squares power law `error ≈ 2^intercept · M^slope` on log2–log2 axes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    /// `γ̂ = −slope`.
    pub fn gamma(&self) -> f64 {
        -self.slope
    }
}

pub fn estimate_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(invalid(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(invalid("M must be strictly increasing"));
        }
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite()) || !(p.0 > 0.0)) {
        return Err(invalid(format!("rate points must be positive, got {p:?}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateOptions {
    pub ms: Vec<usize>,
    /// `c` in the search depth `π(M) = c·M²`.
    pub depth_factor: usize,
    pub refit: bool,
    /// Build, quantize and encode the network for every `M`.
    pub networks: bool,
    /// Points per axis of the grid on which quantization error is checked.
    pub quantization_check_points: usize,
    pub max_fractional_bits: u32,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            ms: vec![8, 16, 32, 64, 128, 256, 512],
            depth_factor: 64,
            refit: true,
            networks: true,
            quantization_check_points: 64,
            max_fractional_bits: 40,
        }
    }
}

/// One row of a rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub m: usize,
    pub edges: usize,
    pub bits: usize,
    /// M-term residual on the target grid.
    pub l2_error: f64,
    /// Error of the transferred network.
    pub network_error: f64,
    /// Error of the quantized network.
    pub quantized_error: f64,
    pub refit_fallback: bool,
    pub max_coefficient: f64,
}

/// M-term and M-edge errors for each requested `M`, nested greedy selections over a shared analysis.
pub fn rate_experiment(
    target: &SampledFunction,
    sys: &ShearletSystem,
    generator: &Network,
    opts: &RateOptions,
) -> Result<Vec<RateRow>> {
    if opts.ms.is_empty() {
        return Err(invalid("no M values requested"));
    }
    let depth_of = |m: usize| opts.depth_factor.saturating_mul(m * m).max(m);
    let max_depth = opts.ms.iter().map(|&m| depth_of(m)).max().unwrap_or(0);
    let mut solver = MTermSolver::new(sys, target, max_depth)?;
    let check = Grid::cube(2, target.grid.lower()[0], target.grid.upper()[0], opts.quantization_check_points)?;
    let area = target.grid.measure();
    let mut rows = Vec::new();
    for &m in &opts.ms {
        let exp = solver.solve(m, depth_of(m), opts.refit)?;
        let mut row = RateRow {
            m,
            edges: 0,
            bits: 0,
            l2_error: exp.residual,
            network_error: f64::NAN,
            quantized_error: f64::NAN,
            refit_fallback: exp.refit_fallback,
            max_coefficient: exp.max_coefficient,
        };
        if opts.networks {
            let t = transfer_to_network(&exp, sys, generator)?;
            let samples = t.network.sample(&target.grid)?;
            row.edges = t.connectivity();
            row.network_error = grid_norms(&samples, target)?.0;
            let eta = (exp.residual / (4.0 * area.sqrt())).min(0.25);
            let range = required_range_bits(&t.network);
            let q = quantize_network(&t.network, eta, &check, opts.max_fractional_bits, range)?;
            let qnet = normalize_network(&q.network);
            row.bits = encode_network(&qnet, q.spec)?.payload.len();
            row.quantized_error = grid_norms(&qnet.sample(&target.grid)?, target)?.0;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `M,edges,bits,l2_error`.
pub fn write_rate_csv(out: impl Write, rows: &[RateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["M", "edges", "bits", "l2_error"])?;
    for r in rows {
        w.write_record([r.m.to_string(), r.edges.to_string(), r.bits.to_string(), format!("{:e}", r.l2_error)])?;
    }
    w.flush()?;
    Ok(())
}
