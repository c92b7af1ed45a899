use super::{synthesize, transfer_to_network, MTermSolver};
use crate::affine::ShearletSystem;
use crate::codec::{encode_network, quantize_network, required_range_bits, EncodedNetwork};
use crate::error::{invalid, Error, Result};
use crate::grid::{grid_norms, SampledFunction};
use crate::network::{normalize_network, Network};

/// `M_ε = ⌈(C/ε)^{1/γ}⌉`.
pub fn m_epsilon(c: f64, gamma: f64, eps: f64) -> Result<usize> {
    if !(c > 0.0 && gamma > 0.0 && eps > 0.0) {
        return Err(invalid(format!("C, γ and ε must be positive, got {c}, {gamma}, {eps}")));
    }
    let m = (c / eps).powf(1.0 / gamma);
    // Guard against 10.000000000000002 becoming 11.
    let rounded = m.round();
    let m = if (m - rounded).abs() <= 1e-9 * rounded.max(1.0) { rounded } else { m.ceil() };
    if !(m.is_finite() && m < 1e9) {
        return Err(invalid(format!("M_ε = {m} is out of reach")));
    }
    Ok(m as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOptions {
    pub c: f64,
    pub gamma: f64,
    /// `c` in the search depth `π(M) = c·M²`.
    pub depth_factor: usize,
    pub max_fractional_bits: u32,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 1.0,
            depth_factor: 64,
            max_fractional_bits: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    pub eps: f64,
    pub m_eps: usize,
    pub search_depth: usize,
    pub edges: usize,
    pub bits: usize,
    pub fractional_bits: u32,
    pub range_bits: u32,
    pub mterm_error: f64,
    pub transfer_error: f64,
    pub quantization_sup_error: f64,
    pub l2_error: f64,
    pub refit_fallback: bool,
    pub max_coefficient: f64,
}

impl std::fmt::Display for LearnReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "eps            {:e}", self.eps)?;
        writeln!(f, "M_eps          {}", self.m_eps)?;
        writeln!(f, "search depth   {}", self.search_depth)?;
        writeln!(f, "edges          {}", self.edges)?;
        writeln!(f, "bits           {}", self.bits)?;
        writeln!(f, "F, R           {}, {}", self.fractional_bits, self.range_bits)?;
        writeln!(f, "m-term error   {:e}", self.mterm_error)?;
        writeln!(f, "transfer error {:e}", self.transfer_error)?;
        writeln!(f, "quant sup err  {:e}", self.quantization_sup_error)?;
        write!(f, "l2 error       {:e}", self.l2_error)
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub network: Network,
    pub encoded: EncodedNetwork,
    pub report: LearnReport,
}

fn check(stage: &'static str, achieved: f64, budget: f64) -> Result<()> {
    if achieved <= budget {
        Ok(())
    } else {
        Err(Error::BudgetMissed { stage, achieved, budget })
    }
}

/// `Learn(ε, f)`: M_ε-term approximation to `ε/2`, exact transfer (`ε/4` allowed), and
/// quantization to an `L²` share of `ε/4`; the final grid error must not exceed `ε`.
pub fn learn_pipeline(
    target: &SampledFunction,
    eps: f64,
    sys: &ShearletSystem,
    generator: &Network,
    opts: &LearnOptions,
) -> Result<LearnOutput> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    let m = m_epsilon(opts.c, opts.gamma, eps)?;
    let depth = opts.depth_factor.saturating_mul(m.saturating_mul(m)).max(m);
    if sys.len() < m {
        return Err(Error::NotEnoughAtoms {
            requested: m,
            available: sys.len(),
        });
    }
    let mut solver = MTermSolver::new(sys, target, depth)?;
    let exp = solver.solve(m, depth, true)?;
    check("m-term approximation", exp.residual, eps / 2.0)?;

    let transfer = transfer_to_network(&exp, sys, generator)?;
    let samples = transfer.network.sample(&target.grid)?;
    let transfer_error = grid_norms(&samples, &synthesize(&exp, sys, &target.grid))?.0;
    check("transfer", transfer_error, eps / 4.0)?;

    let eta = eps / (4.0 * target.grid.measure().sqrt());
    let range = required_range_bits(&transfer.network);
    let q = quantize_network(&transfer.network, eta, &target.grid, opts.max_fractional_bits, range)
        .map_err(|e| match e {
            Error::QuantizationFailed { achieved, .. } => Error::BudgetMissed {
                stage: "quantization",
                achieved,
                budget: eta,
            },
            other => other,
        })?;
    let network = normalize_network(&q.network);
    let l2_error = grid_norms(&network.sample(&target.grid)?, target)?.0;
    check("final", l2_error, eps)?;
    let encoded = encode_network(&network, q.spec)?;
    let report = LearnReport {
        eps,
        m_eps: m,
        search_depth: depth.min(sys.len()),
        edges: network.connectivity(),
        bits: encoded.payload.len(),
        fractional_bits: q.spec.fractional_bits,
        range_bits: q.spec.range_bits,
        mterm_error: exp.residual,
        transfer_error,
        quantization_sup_error: q.sup_error,
        l2_error,
        refit_fallback: exp.refit_fallback,
        max_coefficient: exp.max_coefficient,
    };
    Ok(LearnOutput {
        network,
        encoded,
        report,
    })
}
