// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Bit sequence helpers. Every multi-bit field in this crate is written
//! most significant bit first.

use crate::error::{Error, Result};

/// Appends fixed-width unsigned fields to a bit vector.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bits: Vec<bool>,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            bits: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Writes the low `width` bits of `value`, MSB first.
    pub fn write(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value >> width == 0, "value does not fit field");
        for i in (0..width).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    pub fn extend_from_slice(&mut self, bits: &[bool]) {
        self.bits.extend_from_slice(bits);
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }
}

/// Reads fixed-width fields from a bit slice, refusing to run past its end.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a [bool]) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let bit = *self
            .bits
            .get(self.pos)
            .ok_or_else(|| Error::Corrupt(format!("stream ended at bit {}", self.pos)))?;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read(&mut self, width: u32) -> Result<u64> {
        if self.remaining() < width as usize {
            return Err(Error::Corrupt(format!(
                "need {width} bits at offset {}, only {} left",
                self.pos,
                self.remaining()
            )));
        }
        let mut v = 0u64;
        for &b in &self.bits[self.pos..self.pos + width as usize] {
            v = (v << 1) | b as u64;
        }
        self.pos += width as usize;
        Ok(v)
    }

    pub fn read_slice(&mut self, n: usize) -> Result<&'a [bool]> {
        if self.remaining() < n {
            return Err(Error::Corrupt(format!(
                "need {n} bits at offset {}, only {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bits[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Interprets `bits` as an unsigned MSB-first integer.
pub fn bits_to_u64(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}

pub fn u64_to_bits(value: u64, width: u32) -> Vec<bool> {
    let mut w = BitWriter::with_capacity(width as usize);
    w.write(value, width);
    w.into_bits()
}

/// Parses a hex string (whitespace ignored) into 4 bits per digit.
pub fn hex_to_bits(hex: &str) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars().filter(|c| !c.is_whitespace()) {
        let d = c
            .to_digit(16)
            .ok_or_else(|| Error::Parse(format!("invalid hex digit {c:?}")))?;
        for i in (0..4).rev() {
            out.push((d >> i) & 1 == 1);
        }
    }
    Ok(out)
}

/// Formats bits as lowercase hex, zero-padding the final nibble.
pub fn bits_to_hex(bits: &[bool]) -> String {
    bits.chunks(4)
        .map(|c| {
            let mut v = 0u32;
            for i in 0..4 {
                v = (v << 1) | c.get(i).copied().unwrap_or(false) as u32;
            }
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}
