//! Pointwise activation functions.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error};

/// Activation applied componentwise after every layer except the last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    /// `max(0, x)`.
    Relu,
    /// Zero on `(-inf, 0]`, identity on `[knee, inf)`, C^1 cubic splice in between.
    SmoothRelu { knee: f64 },
    /// `x^order * logistic(x / scale)`: behaves like `x^order` at +inf and vanishes at -inf.
    Sigmoidal { order: u32, scale: f64 },
}

impl ActivationKind {
    pub fn smooth_relu(knee: f64) -> Result<Self, Error> {
        if !(knee > 0.0 && knee.is_finite()) {
            return Err(invalid(format!("smooth-relu knee must be positive, got {knee}")));
        }
        Ok(Self::SmoothRelu { knee })
    }

    pub fn sigmoidal(order: u32, scale: f64) -> Result<Self, Error> {
        if order < 2 {
            return Err(invalid(format!("sigmoidal order must be >= 2, got {order}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("sigmoidal scale must be positive, got {scale}")));
        }
        Ok(Self::Sigmoidal { order, scale })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Self::Relu => x.max(0.0),
            Self::SmoothRelu { knee } => {
                if x <= 0.0 {
                    0.0
                } else if x >= knee {
                    x
                } else {
                    // p(0)=0, p'(0)=0, p(K)=K, p'(K)=1
                    x * x * (2.0 / knee - x / (knee * knee))
                }
            }
            Self::Sigmoidal { order, scale } => {
                let logistic = 1.0 / (1.0 + (-x / scale).exp());
                x.powi(order as i32) * logistic
            }
        }
    }

    /// Derivative; the ReLU subgradient at 0 is taken to be 0.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::SmoothRelu { knee } => {
                if x <= 0.0 {
                    0.0
                } else if x >= knee {
                    1.0
                } else {
                    x * (4.0 * knee - 3.0 * x) / (knee * knee)
                }
            }
            Self::Sigmoidal { order, scale } => {
                let s = 1.0 / (1.0 + (-x / scale).exp());
                let k = order as i32;
                k as f64 * x.powi(k - 1) * s + x.powi(k) * s * (1.0 - s) / scale
            }
        }
    }

    /// Width of the transition region to the right of zero (0 for ReLU).
    pub fn knee(&self) -> f64 {
        match *self {
            Self::Relu => 0.0,
            Self::SmoothRelu { knee } => knee,
            Self::Sigmoidal { .. } => f64::INFINITY,
        }
    }

    /// Whether the activation vanishes left of 0 and is the identity right of its knee.
    pub fn is_relu_like(&self) -> bool {
        !matches!(self, Self::Sigmoidal { .. })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Relu => write!(f, "relu"),
            Self::SmoothRelu { knee } => write!(f, "smooth-relu {knee:?}"),
            Self::Sigmoidal { order, scale } => write!(f, "sigmoidal {order} {scale:?}"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    /// Accepts `relu`, `smooth-relu [K]`, `sigmoidal <k> [scale]`; `:` also separates fields.
    fn from_str(s: &str) -> Result<Self, Error> {
        let parts: Vec<&str> = s
            .split(|c: char| c.is_whitespace() || c == ':')
            .filter(|p| !p.is_empty())
            .collect();
        let num = |p: &str| -> Result<f64, Error> {
            p.parse::<f64>()
                .map_err(|_| invalid(format!("bad number `{p}` in activation `{s}`")))
        };
        match parts.as_slice() {
            ["relu"] => Ok(Self::Relu),
            ["smooth-relu"] => Self::smooth_relu(1.0),
            ["smooth-relu", k] => Self::smooth_relu(num(k)?),
            ["sigmoidal", k] => Self::sigmoidal(num(k)? as u32, 1.0),
            ["sigmoidal", k, c] => Self::sigmoidal(num(k)? as u32, num(c)?),
            _ => Err(invalid(format!("unknown activation `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_is_exact() {
        let r = ActivationKind::Relu;
        assert_eq!(r.apply(-3.0), 0.0);
        assert_eq!(r.apply(0.0), 0.0);
        assert_eq!(r.apply(2.5), 2.5);
        assert_eq!(r.derivative(0.0), 0.0);
    }

    #[test]
    fn smooth_relu_splice_is_c1_and_monotone() {
        let k = 0.7;
        let r = ActivationKind::smooth_relu(k).unwrap();
        assert_eq!(r.apply(-1.0), 0.0);
        assert_eq!(r.apply(k), k);
        assert_eq!(r.apply(3.0), 3.0);
        let h = 1e-7;
        for &x in &[0.0, k] {
            let left = (r.apply(x) - r.apply(x - h)) / h;
            let right = (r.apply(x + h) - r.apply(x)) / h;
            assert!((left - right).abs() < 1e-5, "kink at {x}");
        }
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = r.apply(k * i as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn sigmoidal_growth_bound() {
        let r = ActivationKind::sigmoidal(2, 1.0).unwrap();
        for i in -200..=200 {
            let x = i as f64 * 0.5;
            assert!(r.apply(x).abs() <= (1.0 + x.abs()).powi(2));
        }
        assert!((r.apply(200.0) / 200f64.powi(2) - 1.0).abs() < 1e-12);
        assert!(r.apply(-200.0).abs() / 200f64.powi(2) < 1e-12);
    }

    #[test]
    fn parse_roundtrip() {
        for a in [
            ActivationKind::Relu,
            ActivationKind::smooth_relu(0.25).unwrap(),
            ActivationKind::sigmoidal(3, 2.0).unwrap(),
        ] {
            let parsed: ActivationKind = a.to_string().parse().unwrap();
            assert_eq!(parsed, a);
        }
        assert!("tanh".parse::<ActivationKind>().is_err());
        assert_eq!("smooth-relu:2".parse::<ActivationKind>().unwrap().knee(), 2.0);
    }
}
