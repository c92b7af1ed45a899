use crate::error::{invalid, Error, Result};
use crate::grid::SampledFunction;

/// Stop once the KKT violation is below this.
pub const LASSO_TOLERANCE: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;
const FEATURE_SIGN_AFTER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub lambda: f64,
    pub coeffs: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn active(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != 0.0).count()
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

struct Problem {
    n: usize,
    gram: Vec<f64>,
    fty: Vec<f64>,
}

impl Problem {
    fn new(features: &[SampledFunction], target: &SampledFunction) -> Result<Self> {
        for f in features {
            if f.values.len() != target.values.len() {
                return Err(Error::DimensionMismatch {
                    context: "Lasso feature".into(),
                    expected: target.values.len(),
                    found: f.values.len(),
                });
            }
        }
        let n = features.len();
        let w = target.grid.cell_volume();
        let dot = |a: &[f64], b: &[f64]| w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let g = dot(&features[i].values, &features[j].values);
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        let fty = features.iter().map(|f| dot(&f.values, &target.values)).collect();
        Ok(Self { n, gram, fty })
    }

    fn lambda_max(&self) -> f64 {
        self.fty.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest KKT violation given the residual correlations `corr = Fᵀ(y − Fc)`.
    fn violation(&self, lambda: f64, c: &[f64], corr: &[f64]) -> f64 {
        c.iter().zip(corr).fold(0.0f64, |worst, (&ci, &r)| {
            let v = if ci == 0.0 {
                (r.abs() - lambda).max(0.0)
            } else {
                (r - lambda * ci.signum()).abs()
            };
            worst.max(v)
        })
    }

    fn correlations(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.gram[i * n..(i + 1) * n];
                self.fty[i] - row.iter().zip(c).filter(|(_, cj)| **cj != 0.0).map(|(g, cj)| g * cj).sum::<f64>()
            })
            .collect()
    }

    /// `½cᵀGc − cᵀFᵀy + λ‖c‖₁`, the objective up to a constant.
    fn objective(&self, lambda: f64, c: &[f64]) -> f64 {
        let n = self.n;
        let mut q = 0.0;
        for i in (0..n).filter(|&i| c[i] != 0.0) {
            for j in (0..n).filter(|&j| c[j] != 0.0) {
                q += c[i] * self.gram[i * n + j] * c[j];
            }
        }
        0.5 * q + c.iter().zip(&self.fty).map(|(ci, f)| lambda * ci.abs() - ci * f).sum::<f64>()
    }

    /// Feature-sign search from `c`: exact solves on a signed support, with a line search over
    /// zero crossings. Finishes the job when coordinate descent stalls on correlated features.
    fn feature_sign(&self, lambda: f64, mut c: Vec<f64>) -> Option<Vec<f64>> {
        let n = self.n;
        let mut theta: Vec<f64> = c.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        for _ in 0..4 * n + 10 {
            let corr = self.correlations(&c);
            if self.violation(lambda, &c, &corr) <= LASSO_TOLERANCE {
                return Some(c);
            }
            let entering = (0..n)
                .filter(|&i| theta[i] == 0.0 && corr[i].abs() > lambda)
                .max_by(|&i, &j| corr[i].abs().total_cmp(&corr[j].abs()));
            if let Some(i) = entering {
                theta[i] = corr[i].signum();
            }
            for _ in 0..n + 10 {
                let active: Vec<usize> = (0..n).filter(|&i| theta[i] != 0.0).collect();
                if active.is_empty() {
                    break;
                }
                let k = active.len();
                let g = nalgebra::DMatrix::from_fn(k, k, |a, b| self.gram[active[a] * n + active[b]]);
                let rhs = nalgebra::DVector::from_fn(k, |a, _| self.fty[active[a]] - lambda * theta[active[a]]);
                let sol = g.cholesky()?.solve(&rhs);
                let mut x = vec![0.0; n];
                for (a, &i) in active.iter().enumerate() {
                    x[i] = sol[a];
                }
                let consistent = active.iter().all(|&i| x[i] != 0.0 && x[i].signum() == theta[i]);
                let mut best = x.clone();
                let mut best_obj = self.objective(lambda, &x);
                for &i in &active {
                    if c[i] != 0.0 && x[i].signum() != c[i].signum() {
                        let t = c[i] / (c[i] - x[i]);
                        let mut p: Vec<f64> = c.iter().zip(&x).map(|(ci, xi)| ci + t * (xi - ci)).collect();
                        p[i] = 0.0;
                        let o = self.objective(lambda, &p);
                        if o < best_obj {
                            best_obj = o;
                            best = p;
                        }
                    }
                }
                let took_x = best == x;
                c = best;
                for i in 0..n {
                    theta[i] = if c[i] == 0.0 { 0.0 } else { c[i].signum() };
                }
                if consistent && took_x {
                    break;
                }
            }
        }
        None
    }

    /// Cyclic coordinate descent from `c`, keeping `Fᵀ(y − Fc)` up to date.
    fn solve(&self, lambda: f64, mut c: Vec<f64>) -> LassoFit {
        let n = self.n;
        let mut corr: Vec<f64> = (0..n)
            .map(|i| self.fty[i] - (0..n).map(|j| self.gram[i * n + j] * c[j]).sum::<f64>())
            .collect();
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < LASSO_MAX_SWEEPS {
            sweeps += 1;
            for i in 0..n {
                let gii = self.gram[i * n + i];
                if gii == 0.0 {
                    continue;
                }
                let new = soft_threshold(corr[i] + gii * c[i], lambda) / gii;
                let delta = new - c[i];
                if delta != 0.0 {
                    let row = &self.gram[i * n..(i + 1) * n];
                    for (r, g) in corr.iter_mut().zip(row) {
                        *r -= g * delta;
                    }
                    c[i] = new;
                }
            }
            if self.violation(lambda, &c, &corr) <= LASSO_TOLERANCE {
                converged = true;
                break;
            }
            if sweeps == FEATURE_SIGN_AFTER {
                if let Some(exact) = self.feature_sign(lambda, c.clone()) {
                    c = exact;
                    converged = true;
                    break;
                }
            }
        }
        LassoFit {
            lambda,
            coeffs: c,
            sweeps,
            converged,
        }
    }
}

/// Minimizes `½‖y − Fc‖² + λ‖c‖₁` in the grid `L²` norm by cyclic coordinate descent.
pub fn lasso_last_layer(features: &[SampledFunction], target: &SampledFunction, lambda: f64) -> Result<LassoFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("λ must be non-negative, got {lambda}")));
    }
    let p = Problem::new(features, target)?;
    Ok(p.solve(lambda, vec![0.0; features.len()]))
}

/// Largest KKT violation of `c` for the Lasso problem at `λ`.
pub fn kkt_violation(features: &[SampledFunction], target: &SampledFunction, fit: &LassoFit) -> Result<f64> {
    let p = Problem::new(features, target)?;
    let n = p.n;
    let corr: Vec<f64> = (0..n)
        .map(|i| p.fty[i] - (0..n).map(|j| p.gram[i * n + j] * fit.coeffs[j]).sum::<f64>())
        .collect();
    Ok(p.violation(fit.lambda, &fit.coeffs, &corr))
}

/// Warm-started fits on `λ_k = ½·λ_max·ratio^k`, stopping before the first fit whose active
/// set exceeds `max_active`. The first entry is at `λ_max` (all zero) if even `½·λ_max` is too dense.
pub fn lasso_path_fits(
    features: &[SampledFunction],
    target: &SampledFunction,
    max_active: usize,
    steps: usize,
    ratio: f64,
) -> Result<Vec<LassoFit>> {
    if !(ratio > 0.0 && ratio < 1.0) || steps == 0 {
        return Err(invalid("λ path needs at least one step and a ratio in (0, 1)"));
    }
    let p = Problem::new(features, target)?;
    let mut lambda = 0.5 * p.lambda_max();
    let first = p.solve(lambda, vec![0.0; p.n]);
    if first.active() > max_active {
        return Ok(vec![p.solve(p.lambda_max(), vec![0.0; p.n])]);
    }
    let mut fits = vec![first];
    for _ in 1..steps {
        lambda *= ratio;
        let fit = p.solve(lambda, fits.last().unwrap().coeffs.clone());
        if fit.active() > max_active {
            break;
        }
        fits.push(fit);
    }
    Ok(fits)
}

/// The fit at the smallest path `λ` whose active set has at most `max_active` entries.
pub fn lasso_path(
    features: &[SampledFunction],
    target: &SampledFunction,
    max_active: usize,
    steps: usize,
    ratio: f64,
) -> Result<LassoFit> {
    Ok(lasso_path_fits(features, target, max_active, steps, ratio)?.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn orthonormal() -> (Vec<SampledFunction>, SampledFunction) {
        let grid = Grid::cube(1, 0.0, 1.0, 5).unwrap();
        let r = 1.0 / grid.cell_volume().sqrt();
        let e = |i: usize| {
            let mut v = vec![0.0; 5];
            v[i] = r;
            SampledFunction::new(grid.clone(), v).unwrap()
        };
        let y = SampledFunction::new(grid.clone(), [2.0, -0.5, 0.25, 1.0, 0.0].map(|v| v * r).to_vec()).unwrap();
        ((0..3).map(e).collect(), y)
    }

    #[test]
    fn correlated_features_reach_exact_kkt() {
        let grid = Grid::cube(1, 0.0, 1.0, 200).unwrap();
        let features: Vec<_> = (1..=8).map(|k| grid.sample(|x| x[0].powi(k))).collect();
        let y = grid.sample(|x| (5.0 * x[0]).sin());
        for lambda in [1e-2, 1e-4, 1e-6] {
            let fit = lasso_last_layer(&features, &y, lambda).unwrap();
            assert!(fit.converged, "λ {lambda}");
            assert!(kkt_violation(&features, &y, &fit).unwrap() <= LASSO_TOLERANCE);
        }
    }

    #[test]
    fn closed_forms() {
        let (f, y) = orthonormal();
        let ls = lasso_last_layer(&f, &y, 0.0).unwrap();
        for (c, want) in ls.coeffs.iter().zip([2.0, -0.5, 0.25]) {
            assert!((c - want).abs() < 1e-12);
        }
        let st = lasso_last_layer(&f, &y, 0.3).unwrap();
        for (c, want) in st.coeffs.iter().zip([1.7, -0.2, 0.0]) {
            assert!((c - want).abs() < 1e-12);
        }
        let zero = lasso_last_layer(&f, &y, 2.0).unwrap();
        assert!(zero.coeffs.iter().all(|c| *c == 0.0));
        assert!(lasso_last_layer(&f, &y, -1.0).is_err());
    }

    #[test]
    fn path_respects_active_bound() {
        let (f, y) = orthonormal();
        let fit = lasso_path(&f, &y, 2, 40, 0.8).unwrap();
        assert!(fit.active() <= 2);
        assert!(kkt_violation(&f, &y, &fit).unwrap() < 1e-6);
    }
}
