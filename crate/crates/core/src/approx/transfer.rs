use super::Expansion;
use crate::affine::ShearletSystem;
use crate::error::{Error, Result};
use crate::network::{normalize_network, parallel_sum, sum_of_translates, Network};

/// Network realizing an expansion, with its edge accounting.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub network: Network,
    /// `R′`: edges of one atom subnetwork, `r·(M_f + (d−1)·M_1(f))`.
    pub per_atom_edges: usize,
    pub terms: usize,
}

impl Transfer {
    pub fn connectivity(&self) -> usize {
        self.network.connectivity()
    }

    /// `(R′ + 1)·M`.
    pub fn edge_bound(&self) -> usize {
        (self.per_atom_edges + 1) * self.terms
    }
}

/// Compiles `Σ c_i φ_i` into one network: each atom is the generator network composed with
/// the moment filter and `x ↦ A_j x − δ b`, and the atoms run in parallel.
pub fn transfer_to_network(exp: &Expansion, sys: &ShearletSystem, generator: &Network) -> Result<Transfer> {
    if generator.input_dim() != 2 || generator.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "generator network input".into(),
            expected: 2,
            found: generator.input_dim(),
        });
    }
    let cone = sys.generator().cone_combination();
    let variants = [generator.clone(), sum_of_translates(generator, &cone.coeffs, &cone.shifts)?];
    let d = generator.input_dim();
    let per_atom_edges = cone.len() * (generator.connectivity() + (d - 1) * generator.layers()[0].nnz());
    if exp.terms.is_empty() {
        return Ok(Transfer {
            network: Network::constant(d, 0.0, generator.activation()),
            per_atom_edges,
            terms: 0,
        });
    }
    let mut nets = Vec::with_capacity(exp.terms.len());
    let mut coeffs = Vec::with_capacity(exp.terms.len());
    for t in &exp.terms {
        let atom = sys.atoms().get(t.index).ok_or(Error::NotEnoughAtoms {
            requested: t.index + 1,
            available: sys.len(),
        })?;
        nets.push(sys.atom_network(atom, &variants)?);
        coeffs.push(t.coefficient);
    }
    let network = normalize_network(&parallel_sum(&nets, &coeffs)?);
    Ok(Transfer {
        network,
        per_atom_edges,
        terms: exp.terms.len(),
    })
}
