use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Vector2};

use super::{make_vanishing_moments, shear_matrices, shear_range, Box2, TranslateCombination};
use crate::activation::ActivationKind;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, Patch, SampledFunction};
use crate::network::{bump_network, hat_sup, sum_of_translates, BumpShape, Network};

/// Parameters of a cone-adapted α-shearlet system over a bump generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ShearletParams {
    pub alpha: f64,
    pub delta: f64,
    pub l_max: u32,
    pub activation: ActivationKind,
    pub shape: BumpShape,
    /// Directional vanishing moments of the cone generator (orders `0..moments`).
    pub moments: usize,
    /// `B`: the moment filter uses shifts `ℓ/B`.
    pub moment_spacing_inv: f64,
    pub domain: Box2,
}

impl Default for ShearletParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            delta: 0.25,
            l_max: 4,
            activation: ActivationKind::Relu,
            shape: BumpShape::default(),
            moments: 7,
            moment_spacing_inv: 1.0,
            domain: Box2::unit(),
        }
    }
}

impl ShearletParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("α must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("δ must be positive, got {}", self.delta)));
        }
        if self.l_max > 12 {
            return Err(invalid(format!("ℓ_max = {} is beyond desk scale (max 12)", self.l_max)));
        }
        if !self.activation.is_relu_like() {
            return Err(invalid(format!(
                "generator under activation {} has unbounded support",
                self.activation
            )));
        }
        if self.moments == 0 {
            return Err(invalid("the cone generator needs at least one vanishing moment"));
        }
        Ok(())
    }
}

/// The bump `f` and the cone generator `g = Σ c_m f(· − (m/B) e_1)`.
#[derive(Debug, Clone)]
pub struct Generator {
    activation: ActivationKind,
    shape: BumpShape,
    hat_terms: Vec<(f64, f64)>,
    q: f64,
    end: f64,
    cone: TranslateCombination,
}

impl Generator {
    pub fn new(params: &ShearletParams) -> Result<Self> {
        params.validate()?;
        // A binomial row of length R kills moments of order below R − 1.
        let cone = make_vanishing_moments(2, params.moments + 1, params.moment_spacing_inv, 0)?;
        Ok(Self {
            activation: params.activation,
            shape: params.shape,
            hat_terms: params.shape.terms(),
            q: hat_sup(params.shape, params.activation),
            end: params.shape.support_end(params.activation),
            cone,
        })
    }

    pub fn cone_combination(&self) -> &TranslateCombination {
        &self.cone
    }

    #[inline]
    fn hat(&self, u: f64) -> f64 {
        if u <= 0.0 || u >= self.end {
            return 0.0;
        }
        let mut acc = 0.0;
        for &(shift, coef) in &self.hat_terms {
            acc += coef * self.activation.apply(u - shift);
        }
        acc
    }

    /// The bump `f(y) = ρ(t(y_1) + t(y_2) − q)`.
    #[inline]
    pub fn base(&self, y: [f64; 2]) -> f64 {
        let t1 = self.hat(y[1]);
        if t1 == 0.0 {
            return 0.0;
        }
        self.activation.apply(self.hat(y[0]) + t1 - self.q)
    }

    /// `g_s(y)`: `s = 0` is the bump, `s = 1` the cone generator.
    #[inline]
    pub fn eval(&self, s: usize, y: [f64; 2]) -> f64 {
        if s == 0 {
            return self.base(y);
        }
        let t1 = self.hat(y[1]);
        if t1 == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (c, shift) in self.cone.coeffs.iter().zip(&self.cone.shifts) {
            let u = y[0] - shift[0];
            if u <= 0.0 || u >= self.end {
                continue;
            }
            acc += c * self.activation.apply(self.hat(u) + t1 - self.q);
        }
        acc
    }

    /// Closed box containing the support of `g_s`.
    pub fn support(&self, s: usize) -> Box2 {
        let reach = if s == 0 {
            0.0
        } else {
            self.cone.shifts.iter().map(|v| v[0]).fold(0.0, f64::max)
        };
        Box2 {
            lo: [0.0, 0.0],
            hi: [self.end + reach, self.end],
        }
    }

    /// Network realizing `g_s` exactly.
    pub fn network(&self, s: usize) -> Result<Network> {
        let f = bump_network(self.activation, 2, self.shape.p1, self.shape.p2, self.shape.p3)?;
        if s == 0 {
            Ok(f)
        } else {
            sum_of_translates(&f, &self.cone.coeffs, &self.cone.shifts)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Lowpass,
    Cone,
}

impl std::fmt::Display for Part {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Part::Lowpass => "lowpass",
            Part::Cone => "cone",
        })
    }
}

/// One dilation matrix `A_j = S_k D_{α,2^ℓ} J^τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixInfo {
    pub j: usize,
    pub ell: u32,
    pub k: i64,
    pub tau: bool,
    pub a: Matrix2<f64>,
    pub inverse: Matrix2<f64>,
    pub det: f64,
    /// Largest absolute entry.
    pub norm: f64,
}

impl MatrixInfo {
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(2, 2, self.a.iter().copied())
    }

    /// Smallest eigenvalue modulus.
    pub fn min_eigenvalue_modulus(&self) -> f64 {
        let tr = self.a.trace();
        let det = self.a.determinant();
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let r = disc.sqrt();
            ((tr + r) / 2.0).abs().min(((tr - r) / 2.0).abs())
        } else {
            det.abs().sqrt()
        }
    }
}

/// Element `|det A_j|^{1/2} g_s(A_j x − δ b)` of the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub part: Part,
    pub s: usize,
    pub j: usize,
    pub ell: u32,
    pub k: i64,
    pub tau: bool,
    pub b: [i64; 2],
    pub det: f64,
}

impl Atom {
    fn key(&self) -> (f64, usize, usize, [i64; 2]) {
        (self.det, self.j, self.s, self.b)
    }
}

/// Sorts atoms by `(|det A_j|, j, s, b)`.
pub fn canonical_order(atoms: &mut [Atom]) {
    atoms.sort_by(|x, y| {
        let (a, b) = (x.key(), y.key());
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
    });
}

/// Checks of the affine-system conditions for a generated system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDiagnostics {
    /// `c_b = (d·R_Ω + R_s)/δ`.
    pub c_b: f64,
    /// `max ‖b‖∞ / ‖A_j‖` over all atoms; must not exceed `c_b`.
    pub translation_ratio: f64,
    /// Exponent used for the determinant-growth constant.
    pub growth_exponent: f64,
    /// `min_{j≥2} Σ_{k<j} |det A_k| / ‖A_j‖^a`.
    pub growth_constant: f64,
    /// `min_j #atoms(j) / |det A_j|`.
    pub c_o: f64,
    /// Matrices with an eigenvalue of modulus below 1.
    pub eigenvalue_violations: Vec<usize>,
    pub determinants_nondecreasing: bool,
}

/// An α-shearlet system restricted to a box, atoms in canonical order.
#[derive(Debug, Clone)]
pub struct ShearletSystem {
    params: ShearletParams,
    generator: Generator,
    matrices: Vec<MatrixInfo>,
    atoms: Vec<Atom>,
    /// `blocks[i] = (j, s, start, end)`: contiguous atom ranges sharing `(j, s)`.
    blocks: Vec<(usize, usize, usize, usize)>,
}

fn sat_disjoint(a: &[[f64; 2]; 4], b: &[[f64; 2]; 4], axis: [f64; 2]) -> bool {
    let proj = |pts: &[[f64; 2]; 4]| {
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let v = p[0] * axis[0] + p[1] * axis[1];
            (lo.min(v), hi.max(v))
        })
    };
    let (alo, ahi) = proj(a);
    let (blo, bhi) = proj(b);
    let tol = 1e-12 * (1.0 + alo.abs().max(ahi.abs()).max(blo.abs()).max(bhi.abs()));
    ahi <= blo + tol || bhi <= alo + tol
}

impl ShearletSystem {
    pub fn new(params: ShearletParams) -> Result<Self> {
        Self::with_limit(params, usize::MAX)
    }

    /// Builds only the first `limit` atoms of the canonical ordering.
    pub fn with_limit(params: ShearletParams, limit: usize) -> Result<Self> {
        let generator = Generator::new(&params)?;
        let mut matrices = Vec::new();
        for ell in 0..=params.l_max {
            let a = (ell as f64).exp2();
            let kmax = shear_range(params.alpha, ell);
            for tau in [false, true] {
                for k in -kmax..=kmax {
                    let (d, s, jm) = shear_matrices(params.alpha, a, k, tau);
                    let m = s * d * jm;
                    let inverse = m
                        .try_inverse()
                        .ok_or(Error::SingularMatrix { det: m.determinant() })?;
                    matrices.push(MatrixInfo {
                        j: matrices.len(),
                        ell,
                        k,
                        tau,
                        a: m,
                        inverse,
                        // Exact value; the computed determinant may differ in the last bit.
                        det: (ell as f64 * (1.0 + params.alpha)).exp2(),
                        norm: m.amax(),
                    });
                }
            }
        }
        let mut system = Self {
            params,
            generator,
            matrices,
            atoms: Vec::new(),
            blocks: Vec::new(),
        };
        let lowpass_j = system
            .matrices
            .iter()
            .position(|m| m.ell == 0 && !m.tau && m.k == 0)
            .expect("scale 0 has the identity");
        'outer: for j in 0..system.matrices.len() {
            let parts: &[usize] = if j == lowpass_j { &[0, 1] } else { &[1] };
            for &s in parts {
                let start = system.atoms.len();
                for b in system.translations(j, s) {
                    if system.atoms.len() >= limit {
                        break;
                    }
                    let m = &system.matrices[j];
                    system.atoms.push(Atom {
                        part: if s == 0 { Part::Lowpass } else { Part::Cone },
                        s,
                        j,
                        ell: m.ell,
                        k: m.k,
                        tau: m.tau,
                        b,
                        det: m.det,
                    });
                }
                if system.atoms.len() > start {
                    system.blocks.push((j, s, start, system.atoms.len()));
                }
                if system.atoms.len() >= limit {
                    break 'outer;
                }
            }
        }
        Ok(system)
    }

    pub fn params(&self) -> &ShearletParams {
        &self.params
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn matrices(&self) -> &[MatrixInfo] {
        &self.matrices
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Integer translations `b`, lexicographic, whose open support meets the open domain.
    pub fn translations(&self, j: usize, s: usize) -> Vec<[i64; 2]> {
        let m = &self.matrices[j];
        let supp = self.generator.support(s);
        let delta = self.params.delta;
        let poly: [[f64; 2]; 4] = self.params.domain.corners().map(|c| {
            let v = m.a * Vector2::new(c[0], c[1]);
            [v[0], v[1]]
        });
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &poly {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let t0 = ((xmin - supp.hi[0]) / delta).floor() as i64;
        let t1 = ((xmax - supp.lo[0]) / delta).ceil() as i64;
        let u0 = ((ymin - supp.hi[1]) / delta).floor() as i64;
        let u1 = ((ymax - supp.lo[1]) / delta).ceil() as i64;
        let e0 = m.a * Vector2::new(1.0, 0.0);
        let e1 = m.a * Vector2::new(0.0, 1.0);
        let axes = [[1.0, 0.0], [0.0, 1.0], [-e0[1], e0[0]], [-e1[1], e1[0]]];
        let mut out = Vec::new();
        for b0 in t0..=t1 {
            for b1 in u0..=u1 {
                let lo = [delta * b0 as f64 + supp.lo[0], delta * b1 as f64 + supp.lo[1]];
                let hi = [delta * b0 as f64 + supp.hi[0], delta * b1 as f64 + supp.hi[1]];
                let rect = Box2 { lo, hi }.corners();
                if axes.iter().all(|&ax| !sat_disjoint(&rect, &poly, ax)) {
                    out.push([b0, b1]);
                }
            }
        }
        out
    }

    /// `|det A_j|^{1/2} g_s(A_j x − δ b)`.
    #[inline]
    pub fn atom_value(&self, atom: &Atom, x: [f64; 2]) -> f64 {
        let m = &self.matrices[atom.j];
        let y = m.a * Vector2::new(x[0], x[1]);
        let d = self.params.delta;
        m.det.sqrt() * self.generator.eval(atom.s, [y[0] - d * atom.b[0] as f64, y[1] - d * atom.b[1] as f64])
    }

    /// Samples of an atom on the bounding node block of its support.
    pub fn atom_patch(&self, atom: &Atom, grid: &Grid) -> Patch {
        assert_eq!(grid.dim(), 2, "shearlet atoms live on 2-D grids");
        let m = &self.matrices[atom.j];
        let supp = self.generator.support(atom.s);
        let d = self.params.delta;
        let shifted = Box2 {
            lo: [supp.lo[0] + d * atom.b[0] as f64, supp.lo[1] + d * atom.b[1] as f64],
            hi: [supp.hi[0] + d * atom.b[0] as f64, supp.hi[1] + d * atom.b[1] as f64],
        };
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for c in shifted.corners() {
            let x = m.inverse * Vector2::new(c[0], c[1]);
            for k in 0..2 {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        let (r0, r1) = grid.index_range(0, lo[0], hi[0]);
        let (c0, c1) = grid.index_range(1, lo[1], hi[1]);
        if r1 <= r0 || c1 <= c0 {
            return Patch::empty();
        }
        let mut values = Vec::with_capacity((r1 - r0) * (c1 - c0));
        for r in r0..r1 {
            let x0 = grid.coord(0, r);
            for c in c0..c1 {
                values.push(self.atom_value(atom, [x0, grid.coord(1, c)]));
            }
        }
        Patch {
            start: [r0, c0],
            extent: [r1 - r0, c1 - c0],
            values,
        }
    }

    pub fn atom_evaluate(&self, atom: &Atom, grid: &Grid) -> SampledFunction {
        self.atom_patch(atom, grid).to_full(grid)
    }

    /// Discrete inner products `⟨target, φ_i⟩` and squared norms `‖φ_i‖²` for the first
    /// `limit` atoms, by one pass over the grid per dilation matrix.
    pub fn analyze(&self, target: &SampledFunction, limit: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = &target.grid;
        if grid.dim() != 2 {
            return Err(Error::DimensionMismatch {
                context: "shearlet analysis grid".into(),
                expected: 2,
                found: grid.dim(),
            });
        }
        let limit = limit.min(self.atoms.len());
        let mut dots = vec![0.0; limit];
        let mut norms = vec![0.0; limit];
        let n = grid.points_per_dim();
        let delta = self.params.delta;
        for &(j, s, start, end) in &self.blocks {
            if start >= limit {
                break;
            }
            let end = end.min(limit);
            let atoms = &self.atoms[start..end];
            let (b0min, b0max) = atoms.iter().fold((i64::MAX, i64::MIN), |(lo, hi), a| (lo.min(a.b[0]), hi.max(a.b[0])));
            let (b1min, b1max) = atoms.iter().fold((i64::MAX, i64::MIN), |(lo, hi), a| (lo.min(a.b[1]), hi.max(a.b[1])));
            let w = (b1max - b1min + 1) as usize;
            let mut index = vec![usize::MAX; (b0max - b0min + 1) as usize * w];
            for (i, a) in atoms.iter().enumerate() {
                index[(a.b[0] - b0min) as usize * w + (a.b[1] - b1min) as usize] = start + i;
            }
            let m = &self.matrices[j];
            let supp = self.generator.support(s);
            let scale = m.det.sqrt();
            let g = &self.generator;
            let shifts: Vec<(f64, f64)> = if s == 0 {
                vec![(1.0, 0.0)]
            } else {
                g.cone.coeffs.iter().zip(&g.cone.shifts).map(|(&c, v)| (c, v[0])).collect()
            };
            let r_terms = shifts.len();
            let mut hats = Vec::new();
            let mut t1s = Vec::new();
            for r in 0..n {
                let x0 = grid.coord(0, r);
                for c in 0..n {
                    let x1 = grid.coord(1, c);
                    let fx = target.values[r * n + c];
                    let y = m.a * Vector2::new(x0, x1);
                    let lo0 = (((y[0] - supp.hi[0]) / delta).floor() as i64 + 1).max(b0min);
                    let hi0 = (((y[0] - supp.lo[0]) / delta).ceil() as i64 - 1).min(b0max);
                    let lo1 = (((y[1] - supp.hi[1]) / delta).floor() as i64 + 1).max(b1min);
                    let hi1 = (((y[1] - supp.lo[1]) / delta).ceil() as i64 - 1).min(b1max);
                    if lo0 > hi0 || lo1 > hi1 {
                        continue;
                    }
                    t1s.clear();
                    t1s.extend((lo1..=hi1).map(|b1| g.hat(y[1] - delta * b1 as f64)));
                    hats.clear();
                    for b0 in lo0..=hi0 {
                        let z0 = y[0] - delta * b0 as f64;
                        for &(_, shift) in &shifts {
                            let u = z0 - shift;
                            // NaN marks a translate whose first coordinate is off its support.
                            hats.push(if u <= 0.0 || u >= g.end { f64::NAN } else { g.hat(u) });
                        }
                    }
                    for (i0, b0) in (lo0..=hi0).enumerate() {
                        let row = (b0 - b0min) as usize * w;
                        let hs = &hats[i0 * r_terms..][..r_terms];
                        if hs.iter().all(|h| h.is_nan()) {
                            continue;
                        }
                        for (i1, b1) in (lo1..=hi1).enumerate() {
                            let t1 = t1s[i1];
                            if t1 == 0.0 {
                                continue;
                            }
                            let idx = index[row + (b1 - b1min) as usize];
                            if idx == usize::MAX {
                                continue;
                            }
                            let mut acc = 0.0;
                            for (&(coef, _), &h) in shifts.iter().zip(hs) {
                                if !h.is_nan() {
                                    acc += coef * g.activation.apply(h + t1 - g.q);
                                }
                            }
                            let v = scale * acc;
                            if v != 0.0 {
                                dots[idx] += v * fx;
                                norms[idx] += v * v;
                            }
                        }
                    }
                }
            }
        }
        let cell = grid.cell_volume();
        dots.iter_mut().for_each(|v| *v *= cell);
        norms.iter_mut().for_each(|v| *v *= cell);
        Ok((dots, norms))
    }

    /// Network realizing one atom exactly: the generator composed with `x ↦ A_j x − δ b`.
    pub fn atom_network(&self, atom: &Atom, generators: &[Network; 2]) -> Result<Network> {
        let m = &self.matrices[atom.j];
        let d = self.params.delta;
        crate::network::affine_transform_network(
            &generators[atom.s],
            &m.to_dmatrix(),
            &[d * atom.b[0] as f64, d * atom.b[1] as f64],
        )
    }

    /// Exact networks of the two generators `g_0 = f` and `g_1`.
    pub fn generator_networks(&self) -> Result<[Network; 2]> {
        Ok([self.generator.network(0)?, self.generator.network(1)?])
    }

    /// Per-atom edge bound `r·(M_f + (d−1)·M_1(f))` for the cone generator (`r` translates).
    pub fn atom_edge_bound(&self) -> Result<usize> {
        let f = self.generator.network(0)?;
        let r = self.generator.cone.len().max(1);
        Ok(r * (f.connectivity() + f.layers()[0].nnz()))
    }

    pub fn diagnostics(&self, growth_exponent: f64) -> SystemDiagnostics {
        let d = 2.0;
        let rs = self.generator.support(1).radius().max(self.generator.support(0).radius());
        let c_b = (d * self.params.domain.radius() + rs) / self.params.delta;
        let translation_ratio = self
            .atoms
            .iter()
            .map(|a| a.b[0].abs().max(a.b[1].abs()) as f64 / self.matrices[a.j].norm)
            .fold(0.0, f64::max);
        let mut growth_constant = f64::INFINITY;
        let mut acc = 0.0;
        for (j, m) in self.matrices.iter().enumerate() {
            if j >= 1 {
                growth_constant = growth_constant.min(acc / m.norm.powf(growth_exponent));
            }
            acc += m.det;
        }
        let mut counts = vec![0usize; self.matrices.len()];
        for a in &self.atoms {
            counts[a.j] += 1;
        }
        let complete = self.atoms.last().map(|a| a.j + 1).unwrap_or(0);
        let c_o = (0..complete.saturating_sub(1))
            .map(|j| counts[j] as f64 / self.matrices[j].det)
            .fold(f64::INFINITY, f64::min);
        SystemDiagnostics {
            c_b,
            translation_ratio,
            growth_exponent,
            growth_constant,
            c_o,
            eigenvalue_violations: self
                .matrices
                .iter()
                .filter(|m| m.min_eigenvalue_modulus() < 1.0 - 1e-12)
                .map(|m| m.j)
                .collect(),
            determinants_nondecreasing: self.matrices.windows(2).all(|w| w[0].det <= w[1].det),
        }
    }

    /// CSV listing with columns `part,s,l,k,tau,b1,b2,detA,norm`.
    pub fn write_atoms_csv(&self, out: impl Write, norms: Option<&[f64]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["part", "s", "l", "k", "tau", "b1", "b2", "detA", "norm"])?;
        for (i, a) in self.atoms.iter().enumerate() {
            let norm = norms.and_then(|n| n.get(i)).map(|v| format!("{v:?}")).unwrap_or_default();
            w.write_record([
                a.part.to_string(),
                a.s.to_string(),
                a.ell.to_string(),
                a.k.to_string(),
                (a.tau as u8).to_string(),
                a.b[0].to_string(),
                a.b[1].to_string(),
                format!("{:?}", a.det),
                norm,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::grid_norms;
    use crate::network::normalize_network;

    fn small(l_max: u32) -> ShearletSystem {
        ShearletSystem::new(ShearletParams {
            l_max,
            ..ShearletParams::default()
        })
        .unwrap()
    }

    #[test]
    fn generator_support_and_moments_filter() {
        let sys = small(0);
        let g = sys.generator();
        assert_eq!(g.support(1), Box2 { lo: [0.0, 0.0], hi: [9.0, 2.0] });
        assert_eq!(g.base([1.0, 1.0]), 1.0);
        assert_eq!(g.eval(1, [1.0, 1.0]), 1.0);
        assert_eq!(g.eval(1, [2.0, 1.0]), -7.0);
        assert_eq!(g.eval(1, [9.5, 1.0]), 0.0);
    }

    #[test]
    fn generator_networks_match_closed_form() {
        let sys = small(0);
        let nets = sys.generator_networks().unwrap();
        assert_eq!(nets[1].connectivity(), 8 * 13);
        let grid = Grid::new(vec![-0.5, -0.5], vec![10.0, 2.5], 97).unwrap();
        for s in 0..2 {
            let closed = grid.sample(|x| sys.generator().eval(s, [x[0], x[1]]));
            let (_, sup) = grid_norms(&nets[s].sample(&grid).unwrap(), &closed).unwrap();
            assert!(sup <= 1e-12, "s={s} sup={sup}");
        }
    }

    #[test]
    fn canonical_order_is_by_determinant_then_index() {
        let sys = small(2);
        let atoms = sys.atoms();
        for w in atoms.windows(2) {
            assert!(w[0].key() <= w[1].key() || w[0].det < w[1].det);
        }
        let first_l1 = atoms.iter().position(|a| a.ell == 1).unwrap();
        assert!(atoms[..first_l1].iter().all(|a| a.ell == 0));
        assert!(atoms[first_l1..].iter().all(|a| a.ell >= 1));
        let mut shuffled = atoms.to_vec();
        shuffled.reverse();
        canonical_order(&mut shuffled);
        assert_eq!(shuffled, atoms);
        let mut again = shuffled.clone();
        canonical_order(&mut again);
        assert_eq!(again, shuffled);
    }

    #[test]
    fn matrix_counts_per_scale() {
        let sys = small(4);
        for ell in 0..=4 {
            let count = sys.matrices().iter().filter(|m| m.ell == ell).count() as i64;
            assert_eq!(count, 2 * (2 * shear_range(0.5, ell) + 1));
        }
    }

    #[test]
    fn atom_identity_and_translation() {
        let sys = small(0);
        let grid = Grid::cube(2, 0.0, 1.0, 65).unwrap();
        let lowpass: Vec<&Atom> = sys.atoms().iter().filter(|a| a.part == Part::Lowpass).collect();
        let zero = lowpass.iter().find(|a| a.b == [0, 0]).unwrap();
        let sampled = sys.atom_evaluate(zero, &grid);
        let direct = grid.sample(|x| sys.generator().base([x[0], x[1]]));
        assert_eq!(sampled.values, direct.values);
        // δ = 0.25 is 16 grid steps at n = 65.
        let shifted = lowpass.iter().find(|a| a.b == [-1, 0]).unwrap();
        let s = sys.atom_evaluate(shifted, &grid);
        for r in 0..65 - 16 {
            for c in 0..65 {
                assert_eq!(s.values[r * 65 + c], sampled.values[(r + 16) * 65 + c]);
            }
        }
    }

    #[test]
    fn analysis_matches_patches() {
        let sys = small(1);
        let grid = Grid::cube(2, 0.0, 1.0, 41).unwrap();
        let target = grid.sample(|x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let (dots, norms) = sys.analyze(&target, sys.len()).unwrap();
        for (i, a) in sys.atoms().iter().enumerate().step_by(7) {
            let p = sys.atom_patch(a, &grid);
            let dot = p.dot_full(&target.values, 41) * grid.cell_volume();
            let nrm = p.sum_sq() * grid.cell_volume();
            assert!((dot - dots[i]).abs() <= 1e-10 * (1.0 + dot.abs()), "atom {i}");
            assert!((nrm - norms[i]).abs() <= 1e-10 * (1.0 + nrm));
        }
    }

    #[test]
    fn atom_network_matches_atom() {
        let sys = small(2);
        let nets = sys.generator_networks().unwrap();
        let grid = Grid::cube(2, 0.0, 1.0, 33).unwrap();
        for a in sys.atoms().iter().step_by(97) {
            let net = normalize_network(&sys.atom_network(a, &nets).unwrap());
            assert!(net.connectivity() <= sys.atom_edge_bound().unwrap());
            let (l2, _) = grid_norms(&net.sample(&grid).unwrap(), &sys.atom_evaluate(a, &grid)).unwrap();
            assert!(l2 <= 1e-10);
        }
    }

    #[test]
    fn limit_truncates_canonical_prefix() {
        let full = small(2);
        let part = ShearletSystem::with_limit(full.params().clone(), 100).unwrap();
        assert_eq!(part.len(), 100);
        assert_eq!(part.atoms(), &full.atoms()[..100]);
    }

    #[test]
    fn diagnostics_hold() {
        let sys = small(4);
        let diag = sys.diagnostics(1.0);
        assert!(diag.translation_ratio <= diag.c_b);
        assert!(diag.growth_constant > 0.0);
        assert!(diag.c_o > 0.0);
        assert!(diag.determinants_nondecreasing);
        // Sheared cone-swapped matrices are not expanding in every direction.
        for &j in &diag.eigenvalue_violations {
            let m = &sys.matrices()[j];
            assert!(m.tau && m.k != 0);
        }
    }

    #[test]
    fn rejects_unbounded_generator() {
        let params = ShearletParams {
            activation: ActivationKind::sigmoidal(2, 1.0).unwrap(),
            ..ShearletParams::default()
        };
        assert!(ShearletSystem::new(params).is_err());
    }
}
