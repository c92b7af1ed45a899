use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Grid, SampledFunction};

/// Number of cosine terms in the boundary radius.
pub const RADIUS_TERMS: usize = 8;
pub const R_MIN: f64 = 0.1;
pub const R_MAX: f64 = 0.42;
const MAX_RETRIES: usize = 64;
const RADIUS_CHECK_NODES: usize = 4096;

#[inline]
fn psi(u: f64) -> f64 {
    let u4 = (u * u) * (u * u);
    if u4 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u4)).exp()
    }
}

/// `amplitude · Π ψ((x_i − c_i)/h_i)` with `ψ(u) = exp(1 − 1/(1 − u⁴))` on `|u| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothBump {
    pub center: [f64; 2],
    pub half_width: [f64; 2],
    pub amplitude: f64,
}

impl SmoothBump {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let a = psi((x[0] - self.center[0]) / self.half_width[0]);
        if a == 0.0 {
            return 0.0;
        }
        self.amplitude * a * psi((x[1] - self.center[1]) / self.half_width[1])
    }

    /// Open support box.
    pub fn support(&self) -> ([f64; 2], [f64; 2]) {
        (
            [self.center[0] - self.half_width[0], self.center[1] - self.half_width[1]],
            [self.center[0] + self.half_width[0], self.center[1] + self.half_width[1]],
        )
    }
}

/// Class parameters of a random cartoon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartoonParams {
    pub beta: f64,
    pub nu: f64,
    pub seed: u64,
}

impl Default for CartoonParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            nu: 1.0,
            seed: 7,
        }
    }
}

/// `f = f0 + χ_B f1`, where `B` is star-shaped about `center` with radius
/// `r(θ) = r0 + Σ a_j cos(jθ + φ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartoonFunction {
    pub beta: f64,
    pub nu: f64,
    pub seed: u64,
    pub center: [f64; 2],
    pub r0: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub f0: SmoothBump,
    pub f1: SmoothBump,
}

impl CartoonFunction {
    pub fn radius(&self, theta: f64) -> f64 {
        let mut r = self.r0;
        for (j, (a, phi)) in self.amplitudes.iter().zip(&self.phases).enumerate() {
            r += a * ((j + 1) as f64 * theta + phi).cos();
        }
        r
    }

    /// `χ_B(x)`; points on the boundary are outside.
    pub fn indicator(&self, x: [f64; 2]) -> bool {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        let rho = dx.hypot(dy);
        rho < self.radius(dy.atan2(dx))
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let base = self.f0.eval(x);
        if self.indicator(x) {
            base + self.f1.eval(x)
        } else {
            base
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        if grid.dim() != 2 {
            return Err(invalid("cartoons are sampled on 2-D grids"));
        }
        Ok(grid.sample(|x| self.eval([x[0], x[1]])))
    }

    /// Extremes of `r` on a fine angular grid.
    pub fn radius_range(&self) -> (f64, f64) {
        (0..RADIUS_CHECK_NODES)
            .map(|i| self.radius(2.0 * PI * i as f64 / RADIUS_CHECK_NODES as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    /// Checks support, boundedness and coefficient decay.
    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.beta) {
            return Err(invalid(format!("β must lie in [1, 2], got {}", self.beta)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid(format!("ν must be positive, got {}", self.nu)));
        }
        if self.amplitudes.len() != self.phases.len() {
            return Err(invalid("amplitude and phase lists differ in length"));
        }
        for (j, a) in self.amplitudes.iter().enumerate() {
            let cap = self.nu * ((j + 1) as f64).powf(-(self.beta + 1.0));
            if a.abs() > cap {
                return Err(invalid(format!("|a_{}| = {} exceeds ν·j^-(β+1) = {cap}", j + 1, a.abs())));
            }
        }
        let (lo, hi) = self.radius_range();
        if !(lo > R_MIN && hi < R_MAX) {
            return Err(invalid(format!("radius range [{lo}, {hi}] leaves ({R_MIN}, {R_MAX})")));
        }
        for c in self.center {
            if !(c - R_MAX > 0.0 && c + R_MAX < 1.0) {
                return Err(invalid(format!("center {:?} puts B outside the unit square", self.center)));
            }
        }
        for bump in [&self.f0, &self.f1] {
            let (lo, hi) = bump.support();
            if !(lo[0] >= 0.0 && lo[1] >= 0.0 && hi[0] <= 1.0 && hi[1] <= 1.0) {
                return Err(invalid(format!("smooth part support {lo:?}..{hi:?} leaves the unit square")));
            }
            if bump.amplitude.abs() > self.nu {
                return Err(invalid(format!("smooth part amplitude {} exceeds ν", bump.amplitude)));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(format!("cannot serialize cartoon: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| invalid(format!("malformed cartoon file: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}

/// Seeded β-cartoon with trigonometric boundary and tensor-bump smooth parts.
pub fn generate_cartoon(params: CartoonParams) -> Result<CartoonFunction> {
    if !(1.0..=2.0).contains(&params.beta) {
        return Err(invalid(format!("β must lie in [1, 2], got {}", params.beta)));
    }
    if !(params.nu > 0.0 && params.nu.is_finite()) {
        return Err(invalid(format!("ν must be positive, got {}", params.nu)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scale = params.nu.min(0.1);
    for _ in 0..MAX_RETRIES {
        let center = [rng.gen_range(0.45..=0.55), rng.gen_range(0.45..=0.55)];
        let r0 = rng.gen_range(0.25..=0.32);
        let mut amplitudes = Vec::with_capacity(RADIUS_TERMS);
        let mut phases = Vec::with_capacity(RADIUS_TERMS);
        for j in 1..=RADIUS_TERMS {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            amplitudes.push(u * scale * (j as f64).powf(-(params.beta + 1.0)));
            phases.push(rng.gen_range(0.0..2.0 * PI));
        }
        let a0 = params.nu * rng.gen_range(0.2..=0.5);
        let a1 = params.nu * rng.gen_range(0.5..=1.0);
        let cartoon = CartoonFunction {
            beta: params.beta,
            nu: params.nu,
            seed: params.seed,
            center,
            r0,
            amplitudes,
            phases,
            f0: SmoothBump {
                center: [0.5, 0.5],
                half_width: [0.49, 0.49],
                amplitude: a0,
            },
            f1: SmoothBump {
                center: [0.5, 0.5],
                half_width: [0.48, 0.48],
                amplitude: a1,
            },
        };
        if cartoon.validate().is_ok() {
            return Ok(cartoon);
        }
    }
    Err(invalid(format!(
        "no admissible boundary after {MAX_RETRIES} draws for seed {}",
        params.seed
    )))
}

/// `χ{⟨(cos θ, sin θ), x⟩ > offset} · w(x)` with `w` a smooth window filling the grid box.
pub fn line_singularity_target(theta: f64, offset: f64, grid: &Grid) -> Result<SampledFunction> {
    if grid.dim() != 2 {
        return Err(invalid("line targets are sampled on 2-D grids"));
    }
    let (lo, hi) = (grid.lower(), grid.upper());
    let window = SmoothBump {
        center: [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
        half_width: [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0],
        amplitude: 1.0,
    };
    let (c, s) = (theta.cos(), theta.sin());
    Ok(grid.sample(|x| {
        if c * x[0] + s * x[1] > offset {
            window.eval([x[0], x[1]])
        } else {
            0.0
        }
    }))
}
