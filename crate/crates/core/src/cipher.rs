// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Keyed bit streams: XOR encryption and block shuffling of bit buffers.
//!
//! Every keystream is ChaCha20 keyed with the 128-bit seed followed by 16
//! zero bytes. The ChaCha stream id separates uses of the same key. Bytes
//! are expanded to bits most significant bit first.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bits::hex_to_bits;
use crate::error::{Error, Result};

/// Permutation granularity of [`block_permute`], in bits.
pub const SHUFFLE_BLOCK: usize = 512;

/// Stream id for the image XOR keystream.
pub const STREAM_IMAGE: u64 = 0;
/// Stream id for the filler written into unused gap positions.
pub const STREAM_FILLER: u64 = 1;
/// Stream id for the watermark XOR keystream.
pub const STREAM_WATERMARK: u64 = 0;
/// Stream id for the shuffle PRNG.
pub const STREAM_SHUFFLE: u64 = 0;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Key128(pub [u8; 16]);

impl std::fmt::Debug for Key128 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Key128(..)")
    }
}

impl Key128 {
    /// Parses exactly 32 hexadecimal characters.
    pub fn from_hex(hex: &str) -> Result<Self> {
        let hex = hex.trim();
        if hex.len() != 32 {
            return Err(Error::Parse(format!(
                "key must be 32 hex characters, got {}",
                hex.len()
            )));
        }
        let bits = hex_to_bits(hex)?;
        let mut key = [0u8; 16];
        for (byte, chunk) in key.iter_mut().zip(bits.chunks(8)) {
            *byte = chunk.iter().fold(0, |acc, &b| (acc << 1) | b as u8);
        }
        Ok(Self(key))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Derives a key from a 64-bit number, for experiments that sweep seeds.
    pub fn from_u64(v: u64) -> Self {
        let mut key = [0u8; 16];
        key[8..].copy_from_slice(&v.to_be_bytes());
        Self(key)
    }

    pub fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut seed = [0u8; 32];
        seed[..16].copy_from_slice(&self.0);
        let mut rng = ChaCha20Rng::from_seed(seed);
        rng.set_stream(stream);
        rng
    }
}

/// The three independent secrets held by the content owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyBundle {
    pub image: Key128,
    pub shuffle: Key128,
    pub watermark: Key128,
}

pub fn keystream(key: &Key128, stream: u64, n: usize) -> Vec<bool> {
    let mut rng = key.rng(stream);
    let mut bytes = vec![0u8; n.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    let mut out = Vec::with_capacity(n);
    'outer: for b in bytes {
        for i in (0..8).rev() {
            if out.len() == n {
                break 'outer;
            }
            out.push((b >> i) & 1 == 1);
        }
    }
    out
}

/// XORs `bits` with the keystream; applying it twice is the identity.
pub fn xor_bits(bits: &[bool], key: &Key128, stream: u64) -> Vec<bool> {
    bits.iter()
        .zip(keystream(key, stream, bits.len()))
        .map(|(&b, k)| b ^ k)
        .collect()
}

/// Uniform draw from `0..bound` by rejection on 64-bit outputs.
fn uniform_below(rng: &mut impl RngCore, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - u64::MAX % bound;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Fisher–Yates permutation of `0..m`. Slot `i` of the output is filled from `perm[i]`.
pub fn permutation(key: &Key128, m: usize) -> Vec<usize> {
    let mut rng = key.rng(STREAM_SHUFFLE);
    let mut perm: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let j = uniform_below(&mut rng, i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Shuffles whole [`SHUFFLE_BLOCK`]-bit blocks; a shorter tail stays in place.
pub fn block_permute(bits: &[bool], key: &Key128, direction: Direction) -> Vec<bool> {
    let m = bits.len() / SHUFFLE_BLOCK;
    let perm = permutation(key, m);
    let mut out = bits.to_vec();
    let block = |i: usize| i * SHUFFLE_BLOCK..(i + 1) * SHUFFLE_BLOCK;
    for (i, &p) in perm.iter().enumerate() {
        let (dst, src) = match direction {
            Direction::Forward => (i, p),
            Direction::Inverse => (p, i),
        };
        out[block(dst)].copy_from_slice(&bits[block(src)]);
    }
    out
}
