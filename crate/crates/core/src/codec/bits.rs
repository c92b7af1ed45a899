use bitvec::prelude::*;

use crate::error::{Error, Result};

/// Append-only bit sequence, packed most significant bit first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitstream {
    bits: BitVec<u8, Msb0>,
}

impl Bitstream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self {
            bits: BitVec::from_slice(bytes),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push_bit(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    /// Two's complement in `width` bits.
    pub fn push_signed(&mut self, value: i64, width: u32) {
        self.push_bits(value as u64, width);
    }

    /// Packed bytes, zero-padded to a byte boundary.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut copy = self.bits.clone();
        copy.set_uninitialized(false);
        copy.into_vec()
    }

    /// Keeps the first `len` bits.
    pub fn truncate(&mut self, len: usize) {
        self.bits.truncate(len);
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).map(|b| *b)
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { bits: &self.bits, pos: 0 }
    }
}

impl std::fmt::Display for Bitstream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.bits.iter() {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Read cursor over a [`Bitstream`].
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a BitSlice<u8, Msb0>,
    pos: usize,
}

impl BitReader<'_> {
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let bit = self.bits.get(self.pos).map(|b| *b).ok_or_else(|| Error::Decode {
            offset: self.pos,
            message: "unexpected end of stream".into(),
        })?;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        if self.remaining() < width as usize {
            return Err(Error::Decode {
                offset: self.pos,
                message: format!("need {width} bits, {} left", self.remaining()),
            });
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_signed(&mut self, width: u32) -> Result<i64> {
        let raw = self.read_bits(width)?;
        let shift = 64 - width;
        Ok(((raw << shift) as i64) >> shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_roundtrip() {
        let mut s = Bitstream::new();
        s.push_bit(true);
        s.push_bits(0b1011, 4);
        s.push_signed(-3, 5);
        s.push_signed(10, 5);
        assert_eq!(s.to_string(), "110111110101010");
        let mut r = s.reader();
        assert!(r.read_bit().unwrap());
        assert_eq!(r.read_bits(4).unwrap(), 11);
        assert_eq!(r.read_signed(5).unwrap(), -3);
        assert_eq!(r.read_signed(5).unwrap(), 10);
        assert!(matches!(r.read_bit(), Err(Error::Decode { offset: 15, .. })));
    }

    #[test]
    fn byte_packing_is_big_endian() {
        let mut s = Bitstream::new();
        s.push_bits(0b101, 3);
        assert_eq!(s.to_bytes(), vec![0b1010_0000]);
        let back = Bitstream::from_bytes(&[0b1010_0000]);
        assert_eq!(back.len(), 8);
        assert_eq!(back.reader().read_bits(3).unwrap(), 5);
    }
}
