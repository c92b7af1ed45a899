//! Weight quantization and the bit-exact network encoding.

mod bits;
mod encode;
pub mod file;
mod quantize;

pub use bits::{BitReader, Bitstream};
pub use encode::{
    code_length_bound, decode_network, decode_network_with_dim, encode_network, padded_edge_count,
    EncodedNetwork,
};
pub use quantize::{quantize_network, quantize_value, quantize_weights, required_range_bits, Quantized};

use crate::error::{invalid, Result};

/// Fixed-point grid `2^-F Z ∩ [-2^R, 2^R - 2^-F]`, stored in `W = F + R + 1` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizationSpec {
    pub fractional_bits: u32,
    pub range_bits: u32,
}

/// Largest supported field width; integers are handled as `i64`.
pub const MAX_WIDTH: u32 = 62;

impl QuantizationSpec {
    pub fn new(fractional_bits: u32, range_bits: u32) -> Result<Self> {
        if fractional_bits < 1 {
            return Err(invalid("fractional bits F must be at least 1"));
        }
        if fractional_bits + range_bits + 1 > MAX_WIDTH {
            return Err(invalid(format!(
                "weight width F + R + 1 = {} exceeds {MAX_WIDTH}",
                fractional_bits + range_bits + 1
            )));
        }
        if fractional_bits > 255 || range_bits > 255 {
            return Err(invalid("F and R must fit in one byte"));
        }
        Ok(Self {
            fractional_bits,
            range_bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.fractional_bits + self.range_bits + 1
    }

    pub fn step(&self) -> f64 {
        (-(self.fractional_bits as f64)).exp2()
    }

    /// Range bound `2^R`.
    pub fn bound(&self) -> f64 {
        (self.range_bits as f64).exp2()
    }

    /// Smallest and largest integer codes.
    pub fn code_range(&self) -> (i64, i64) {
        let half = 1i64 << (self.width() - 1);
        (-half, half - 1)
    }

    /// Integer code of an on-grid weight.
    pub fn to_code(&self, w: f64) -> Option<i64> {
        let scaled = w * (self.fractional_bits as f64).exp2();
        let (lo, hi) = self.code_range();
        (scaled.fract() == 0.0 && scaled >= lo as f64 && scaled <= hi as f64).then_some(scaled as i64)
    }

    pub fn from_code(&self, code: i64) -> f64 {
        code as f64 * self.step()
    }
}
