//! Best M-term approximation over a dictionary, transfer of expansions to
//! networks, the quantized Learn pipeline, and rate estimation.

mod learn;
mod rate;
mod transfer;

pub use learn::{learn_pipeline, m_epsilon, LearnOptions, LearnOutput, LearnReport};
pub use rate::{estimate_rate, rate_experiment, write_rate_csv, RateFit, RateOptions, RateRow};
pub use transfer::{transfer_to_network, Transfer};

use nalgebra::{DMatrix, DVector};

use crate::affine::ShearletSystem;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, Patch, SampledFunction};

/// Default coefficient bound `D`.
pub const DEFAULT_COEFFICIENT_BOUND: f64 = 100.0;
/// Ridge added to the Gram diagonal, relative to its largest entry.
pub const REFIT_RIDGE: f64 = 1e-10;

/// Default search-depth polynomial `π(M) = 64 M²`.
pub fn default_search_depth(m: usize) -> usize {
    64usize.saturating_mul(m.saturating_mul(m))
}

/// A finite, canonically ordered family of sampled atoms on a 2-D grid.
pub trait Dictionary {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(⟨target, φ_i⟩, ‖φ_i‖²)` for the first `limit` atoms, discrete L² on the target grid.
    fn analyze(&self, target: &SampledFunction, limit: usize) -> Result<(Vec<f64>, Vec<f64>)>;

    /// Samples of atom `i` on its bounding node block.
    fn patch(&self, i: usize, grid: &Grid) -> Patch;
}

impl Dictionary for ShearletSystem {
    fn len(&self) -> usize {
        ShearletSystem::len(self)
    }

    fn analyze(&self, target: &SampledFunction, limit: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        ShearletSystem::analyze(self, target, limit)
    }

    fn patch(&self, i: usize, grid: &Grid) -> Patch {
        self.atom_patch(&self.atoms()[i], grid)
    }
}

/// Explicitly sampled atoms sharing one grid.
#[derive(Debug, Clone)]
pub struct ToyDictionary {
    grid: Grid,
    atoms: Vec<SampledFunction>,
}

impl ToyDictionary {
    pub fn new(grid: Grid, atoms: Vec<SampledFunction>) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(invalid("toy dictionaries live on 2-D grids"));
        }
        if let Some(i) = atoms.iter().position(|a| a.grid != grid) {
            return Err(invalid(format!("toy atom {i} is sampled on a different grid")));
        }
        Ok(Self { grid, atoms })
    }

    pub fn atoms(&self) -> &[SampledFunction] {
        &self.atoms
    }
}

impl Dictionary for ToyDictionary {
    fn len(&self) -> usize {
        self.atoms.len()
    }

    fn analyze(&self, target: &SampledFunction, limit: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if target.grid != self.grid {
            return Err(invalid("target and dictionary grids differ"));
        }
        let mut dots = Vec::new();
        let mut norms = Vec::new();
        for a in self.atoms.iter().take(limit) {
            dots.push(target.inner(a)?);
            norms.push(a.inner(a)?);
        }
        Ok((dots, norms))
    }

    fn patch(&self, i: usize, _grid: &Grid) -> Patch {
        Patch::from_full(&self.atoms[i])
    }
}

/// Discrete inner products `Δx² Σ target · φ_i` for the first `limit` atoms.
pub fn analysis_coefficients(target: &SampledFunction, dict: &impl Dictionary, limit: usize) -> Result<Vec<f64>> {
    Ok(dict.analyze(target, limit)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub index: usize,
    pub coefficient: f64,
}

/// `Σ c_i φ_i` over selected atoms, with its grid residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub terms: Vec<Term>,
    pub residual: f64,
    pub search_depth: usize,
    pub refit: bool,
    /// The least-squares refit was rejected and thresholded coefficients kept.
    pub refit_fallback: bool,
    pub max_coefficient: f64,
    pub coefficient_bound: f64,
}

impl Expansion {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn exceeds_coefficient_bound(&self) -> bool {
        self.max_coefficient > self.coefficient_bound
    }
}

/// Samples of an expansion on `grid`.
pub fn synthesize(exp: &Expansion, dict: &impl Dictionary, grid: &Grid) -> SampledFunction {
    let mut out = SampledFunction::zeros(grid);
    let n = grid.points_per_dim();
    for t in &exp.terms {
        dict.patch(t.index, grid).add_scaled_into(&mut out.values, n, t.coefficient);
    }
    out
}

/// Cached analysis of one target, answering M-term queries for many `M`.
pub struct MTermSolver<'a, D: Dictionary> {
    dict: &'a D,
    target: &'a SampledFunction,
    dots: Vec<f64>,
    norms: Vec<f64>,
    patches: Vec<Option<Patch>>,
    pub coefficient_bound: f64,
}

impl<'a, D: Dictionary> MTermSolver<'a, D> {
    /// Analyzes the first `max_depth` atoms once.
    pub fn new(dict: &'a D, target: &'a SampledFunction, max_depth: usize) -> Result<Self> {
        if target.grid.dim() != 2 {
            return Err(invalid("M-term approximation expects a 2-D grid"));
        }
        let depth = max_depth.min(dict.len());
        let (dots, norms) = dict.analyze(target, depth)?;
        Ok(Self {
            dict,
            target,
            patches: vec![None; dots.len()],
            dots,
            norms,
            coefficient_bound: DEFAULT_COEFFICIENT_BOUND,
        })
    }

    pub fn analyzed(&self) -> usize {
        self.dots.len()
    }

    pub fn dots(&self) -> &[f64] {
        &self.dots
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    fn patch(&mut self, i: usize) -> &Patch {
        if self.patches[i].is_none() {
            self.patches[i] = Some(self.dict.patch(i, &self.target.grid));
        }
        self.patches[i].as_ref().unwrap()
    }

    /// Indices of the `m` largest `|⟨f, φ⟩|/‖φ‖` among the first `depth`, ties to the lower index.
    pub fn select(&self, m: usize, depth: usize) -> Result<Vec<usize>> {
        let depth = depth.min(self.analyzed());
        if m > depth {
            return Err(Error::NotEnoughAtoms {
                requested: m,
                available: depth,
            });
        }
        let score = |i: usize| {
            if self.norms[i] > 0.0 {
                self.dots[i].abs() / self.norms[i].sqrt()
            } else {
                0.0
            }
        };
        let mut idx: Vec<usize> = (0..depth).collect();
        idx.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
        idx.truncate(m);
        idx.sort_unstable();
        Ok(idx)
    }

    fn residual(&mut self, idx: &[usize], coeffs: &[f64]) -> f64 {
        let grid = self.target.grid.clone();
        let n = grid.points_per_dim();
        let mut r = self.target.values.clone();
        for (&i, &c) in idx.iter().zip(coeffs) {
            if c != 0.0 {
                self.patch(i).add_scaled_into(&mut r, n, -c);
            }
        }
        (r.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt()
    }

    fn least_squares(&mut self, idx: &[usize]) -> Option<Vec<f64>> {
        let m = idx.len();
        let cell = self.target.grid.cell_volume();
        for &i in idx {
            self.patch(i);
        }
        let mut gram = DMatrix::zeros(m, m);
        for a in 0..m {
            let pa = self.patches[idx[a]].as_ref().unwrap();
            for b in a..m {
                let v = if a == b {
                    self.norms[idx[a]]
                } else {
                    pa.dot(self.patches[idx[b]].as_ref().unwrap()) * cell
                };
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        let scale = (0..m).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        if scale <= 0.0 {
            return None;
        }
        for i in 0..m {
            gram[(i, i)] += REFIT_RIDGE * scale;
        }
        let rhs = DVector::from_iterator(m, idx.iter().map(|&i| self.dots[i]));
        let sol = gram.cholesky()?.solve(&rhs);
        sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
    }

    pub fn solve(&mut self, m: usize, depth: usize, refit: bool) -> Result<Expansion> {
        let idx = self.select(m, depth)?;
        let thresholded: Vec<f64> = idx
            .iter()
            .map(|&i| if self.norms[i] > 0.0 { self.dots[i] / self.norms[i] } else { 0.0 })
            .collect();
        let mut coeffs = thresholded.clone();
        let mut residual = self.residual(&idx, &coeffs);
        let mut fallback = false;
        if refit && !idx.is_empty() {
            match self.least_squares(&idx) {
                Some(c) => {
                    let r = self.residual(&idx, &c);
                    if r <= residual {
                        coeffs = c;
                        residual = r;
                    } else {
                        fallback = true;
                    }
                }
                None => fallback = true,
            }
        }
        let max_coefficient = coeffs.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
        Ok(Expansion {
            terms: idx
                .into_iter()
                .zip(coeffs)
                .map(|(index, coefficient)| Term { index, coefficient })
                .collect(),
            residual,
            search_depth: depth.min(self.analyzed()),
            refit,
            refit_fallback: fallback,
            max_coefficient,
            coefficient_bound: self.coefficient_bound,
        })
    }
}

/// Greedy selection of `m` atoms among the first `search_depth`, optionally refit by least squares.
pub fn m_term_approx(
    target: &SampledFunction,
    dict: &impl Dictionary,
    m: usize,
    search_depth: usize,
    refit: bool,
) -> Result<Expansion> {
    if search_depth < m {
        return Err(invalid(format!("search depth {search_depth} is below M = {m}")));
    }
    if dict.len() < m {
        return Err(Error::NotEnoughAtoms {
            requested: m,
            available: dict.len(),
        });
    }
    MTermSolver::new(dict, target, search_depth)?.solve(m, search_depth, refit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disjoint_boxes(grid: &Grid, count: usize) -> Vec<SampledFunction> {
        (0..count)
            .map(|k| {
                grid.sample(|x| {
                    let cell = ((x[0] * 4.0).floor().min(3.0) as usize) * 4 + (x[1] * 4.0).floor().min(3.0) as usize;
                    if cell == k {
                        1.0 + x[0]
                    } else {
                        0.0
                    }
                })
            })
            .collect()
    }

    #[test]
    fn unit_atom_coefficient() {
        let grid = Grid::cube(2, 0.0, 1.0, 32).unwrap();
        let mut atoms = disjoint_boxes(&grid, 3);
        let n = atoms[1].l2_norm();
        atoms[1].values.iter_mut().for_each(|v| *v /= n);
        let dict = ToyDictionary::new(grid.clone(), atoms.clone()).unwrap();
        let c = analysis_coefficients(&atoms[1], &dict, 3).unwrap();
        assert!((c[1] - 1.0).abs() < 1e-12);
        assert!(c[0].abs() < 1e-12 && c[2].abs() < 1e-12);
    }

    #[test]
    fn exact_span_and_zero_terms() {
        let grid = Grid::cube(2, 0.0, 1.0, 32).unwrap();
        let atoms = disjoint_boxes(&grid, 6);
        let dict = ToyDictionary::new(grid.clone(), atoms.clone()).unwrap();
        let mut target = SampledFunction::zeros(&grid);
        for (k, c) in [(1usize, 2.0), (4, -0.5)] {
            for (t, a) in target.values.iter_mut().zip(&atoms[k].values) {
                *t += c * a;
            }
        }
        let exp = m_term_approx(&target, &dict, 2, 6, true).unwrap();
        assert!(exp.residual <= 1e-8);
        assert_eq!(exp.terms.iter().map(|t| t.index).collect::<Vec<_>>(), vec![1, 4]);
        let zero = m_term_approx(&target, &dict, 0, 6, true).unwrap();
        assert!((zero.residual - target.l2_norm()).abs() < 1e-12);
        assert!(m_term_approx(&target, &dict, 7, 7, true).is_err());
        assert!(m_term_approx(&target, &dict, 3, 2, true).is_err());
    }

    #[test]
    fn refit_never_worse_and_nested_monotone() {
        let grid = Grid::cube(2, 0.0, 1.0, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let atoms: Vec<SampledFunction> = (0..10)
            .map(|_| {
                let (a, b, c): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
                grid.sample(|x| (a * 7.0 * x[0] + b * 5.0 * x[1] + c).sin())
            })
            .collect();
        let dict = ToyDictionary::new(grid.clone(), atoms).unwrap();
        let target = grid.sample(|x| x[0] * x[1] - 0.3);
        let mut solver = MTermSolver::new(&dict, &target, 10).unwrap();
        let mut prev = f64::INFINITY;
        for m in 0..=10 {
            let plain = solver.solve(m, 10, false).unwrap();
            let refit = solver.solve(m, 10, true).unwrap();
            assert!(refit.residual <= plain.residual + 1e-12);
            assert!(refit.residual <= prev + 1e-10);
            prev = refit.residual;
        }
    }
}
