// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Reed–Solomon RS(31, k) over GF(2^5) and payload packing.
//!
//! Field: primitive polynomial x^5 + x^2 + 1, generator α = 2. Codes are
//! systematic with generator polynomial ∏_{i=1}^{31-k} (x - α^i). A codeword
//! is stored highest-degree coefficient first, so the message symbols are
//! `codeword[..k]`. Symbols are serialized as 5 bits, MSB first.

use crate::error::{Error, Result};

pub const N: usize = 31;
pub const SYMBOL_BITS: usize = 5;
/// Bits occupied by one serialized codeword.
pub const CODEWORD_BITS: usize = N * SYMBOL_BITS;
/// Message length used by the watermark unless configured otherwise.
pub const DEFAULT_K: usize = 3;

const PRIM: u16 = 0x25;

const fn build_tables() -> ([u8; 62], [u8; 32]) {
    let mut exp = [0u8; 62];
    let mut log = [0u8; 32];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 31 {
        exp[i] = x as u8;
        exp[i + 31] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x20 != 0 {
            x ^= PRIM;
        }
        i += 1;
    }
    (exp, log)
}

const TABLES: ([u8; 62], [u8; 32]) = build_tables();
const EXP: [u8; 62] = TABLES.0;
const LOG: [u8; 32] = TABLES.1;

#[inline]
pub fn gf_mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        0
    } else {
        EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
    }
}

/// Multiplicative inverse; `a` must be non-zero.
#[inline]
pub fn gf_inv(a: u8) -> u8 {
    debug_assert!(a != 0);
    EXP[(31 - LOG[a as usize] as usize) % 31]
}

#[inline]
pub fn gf_div(a: u8, b: u8) -> u8 {
    gf_mul(a, gf_inv(b))
}

/// α^e for any integer exponent.
#[inline]
pub fn gf_pow_alpha(e: i64) -> u8 {
    EXP[e.rem_euclid(31) as usize]
}

/// Evaluates a polynomial given highest-degree coefficient first.
fn eval_desc(poly: &[u8], x: u8) -> u8 {
    poly.iter().fold(0, |acc, &c| gf_mul(acc, x) ^ c)
}

/// Evaluates a polynomial given lowest-degree coefficient first.
fn eval_asc(poly: &[u8], x: u8) -> u8 {
    poly.iter().rev().fold(0, |acc, &c| gf_mul(acc, x) ^ c)
}

/// The decoder found more errors than it can correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeFailure;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub message: Vec<u8>,
    pub corrected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsCode {
    k: usize,
    /// Generator polynomial, highest degree first, monic.
    generator: Vec<u8>,
}

impl Default for RsCode {
    fn default() -> Self {
        Self::new(DEFAULT_K).expect("default k is valid")
    }
}

impl RsCode {
    pub fn new(k: usize) -> Result<Self> {
        if !(1..N).contains(&k) {
            return Err(Error::InvalidInput(format!("RS(31,k) needs 1 <= k <= 30, got {k}")));
        }
        let mut generator = vec![1u8];
        for i in 1..=(N - k) {
            // multiply by (x - α^i)
            let root = gf_pow_alpha(i as i64);
            let mut next = vec![0u8; generator.len() + 1];
            for (j, &g) in generator.iter().enumerate() {
                next[j] ^= g;
                next[j + 1] ^= gf_mul(g, root);
            }
            generator = next;
        }
        Ok(Self { k, generator })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parity_len(&self) -> usize {
        N - self.k
    }

    /// Guaranteed correctable symbol errors, ⌊(n-k)/2⌋.
    pub fn t(&self) -> usize {
        (N - self.k) / 2
    }

    pub fn payload_bits_per_codeword(&self) -> usize {
        self.k * SYMBOL_BITS
    }

    pub fn encode(&self, msg: &[u8]) -> Vec<u8> {
        assert_eq!(msg.len(), self.k, "message length");
        debug_assert!(msg.iter().all(|&s| s < 32));
        let nsym = self.parity_len();
        let mut rem = vec![0u8; nsym];
        for &m in msg {
            let factor = m ^ rem[0];
            rem.rotate_left(1);
            rem[nsym - 1] = 0;
            if factor != 0 {
                for (r, &g) in rem.iter_mut().zip(&self.generator[1..]) {
                    *r ^= gf_mul(g, factor);
                }
            }
        }
        let mut cw = msg.to_vec();
        cw.extend_from_slice(&rem);
        cw
    }

    /// S_i = c(α^i) for i = 1..=n-k.
    pub fn syndromes(&self, received: &[u8]) -> Vec<u8> {
        (1..=self.parity_len())
            .map(|i| eval_desc(received, gf_pow_alpha(i as i64)))
            .collect()
    }

    /// Bounded-distance decoding: Berlekamp–Massey, Chien search, Forney.
    pub fn decode(&self, received: &[u8]) -> std::result::Result<Decoded, DecodeFailure> {
        assert_eq!(received.len(), N, "codeword length");
        let synd = self.syndromes(received);
        if synd.iter().all(|&s| s == 0) {
            return Ok(Decoded {
                message: received[..self.k].to_vec(),
                corrected: 0,
            });
        }
        let lambda = berlekamp_massey(&synd);
        let nerr = lambda.len() - 1;
        if nerr == 0 || nerr > self.t() {
            return Err(DecodeFailure);
        }
        // Chien search: the symbol of degree p is in error iff Λ(α^-p) = 0.
        let positions: Vec<usize> = (0..N)
            .filter(|&p| eval_asc(&lambda, gf_pow_alpha(-(p as i64))) == 0)
            .collect();
        if positions.len() != nerr {
            return Err(DecodeFailure);
        }
        // Ω(x) = S(x) Λ(x) mod x^(n-k)
        let nsym = self.parity_len();
        let mut omega = vec![0u8; nsym];
        for (i, &s) in synd.iter().enumerate() {
            for (j, &l) in lambda.iter().enumerate() {
                if i + j < nsym {
                    omega[i + j] ^= gf_mul(s, l);
                }
            }
        }
        // formal derivative in characteristic 2 keeps odd-degree terms
        let dlambda: Vec<u8> = lambda
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &c)| if j % 2 == 1 { c } else { 0 })
            .collect();
        let mut corrected = received.to_vec();
        for &p in &positions {
            let xinv = gf_pow_alpha(-(p as i64));
            let denom = eval_asc(&dlambda, xinv);
            if denom == 0 {
                return Err(DecodeFailure);
            }
            corrected[N - 1 - p] ^= gf_div(eval_asc(&omega, xinv), denom);
        }
        if self.syndromes(&corrected).iter().any(|&s| s != 0) {
            return Err(DecodeFailure);
        }
        Ok(Decoded {
            message: corrected[..self.k].to_vec(),
            corrected: nerr,
        })
    }

    /// Decodes, falling back to the raw systematic symbols when decoding fails.
    /// The flag is `true` on a successful decode.
    pub fn decode_or_raw(&self, received: &[u8]) -> (Vec<u8>, bool) {
        match self.decode(received) {
            Ok(d) => (d.message, true),
            Err(DecodeFailure) => (received[..self.k].to_vec(), false),
        }
    }

    pub fn codewords_for(&self, payload_bits: usize) -> usize {
        payload_bits.div_ceil(self.payload_bits_per_codeword())
    }

    /// Serialized length of the packed payload.
    pub fn coded_len(&self, payload_bits: usize) -> usize {
        self.codewords_for(payload_bits) * CODEWORD_BITS
    }

    /// Zero-pads to a multiple of 5k bits and splits into k-symbol messages.
    pub fn split_messages(&self, bits: &[bool]) -> Result<Vec<Vec<u8>>> {
        if bits.is_empty() {
            return Err(Error::InvalidInput("payload must be non-empty".into()));
        }
        let per = self.payload_bits_per_codeword();
        let mut padded = bits.to_vec();
        padded.resize(self.codewords_for(bits.len()) * per, false);
        Ok(padded.chunks(per).map(bits_to_symbols).collect())
    }

    /// Encodes the payload and serializes every codeword.
    pub fn pack(&self, bits: &[bool]) -> Result<Vec<bool>> {
        Ok(self
            .split_messages(bits)?
            .iter()
            .flat_map(|m| symbols_to_bits(&self.encode(m)))
            .collect())
    }

    /// Concatenates message symbols and truncates to `len` bits.
    pub fn unpack(&self, messages: &[Vec<u8>], len: usize) -> Result<Vec<bool>> {
        if len == 0 {
            return Err(Error::InvalidInput("payload length must be positive".into()));
        }
        let bits: Vec<bool> = messages.iter().flat_map(|m| symbols_to_bits(m)).collect();
        if bits.len() < len {
            return Err(Error::InvalidInput(format!(
                "{} message bits cannot supply {len} payload bits",
                bits.len()
            )));
        }
        Ok(bits[..len].to_vec())
    }
}

/// Shortest LFSR generating the syndrome sequence; returns Λ lowest degree first.
fn berlekamp_massey(synd: &[u8]) -> Vec<u8> {
    let mut c = vec![1u8];
    let mut b = vec![1u8];
    let mut l = 0usize;
    let mut m = 1usize;
    let mut bd = 1u8;
    for n in 0..synd.len() {
        let mut d = synd[n];
        for i in 1..=l {
            d ^= gf_mul(c[i], synd[n - i]);
        }
        if d == 0 {
            m += 1;
            continue;
        }
        let coef = gf_div(d, bd);
        let mut next = c.clone();
        if next.len() < b.len() + m {
            next.resize(b.len() + m, 0);
        }
        for (i, &bi) in b.iter().enumerate() {
            next[i + m] ^= gf_mul(coef, bi);
        }
        if 2 * l <= n {
            b = c;
            l = n + 1 - l;
            bd = d;
            m = 1;
        } else {
            m += 1;
        }
        c = next;
    }
    c.truncate(l + 1);
    c.resize(l + 1, 0);
    c
}

pub fn symbols_to_bits(symbols: &[u8]) -> Vec<bool> {
    symbols
        .iter()
        .flat_map(|&s| (0..SYMBOL_BITS).rev().map(move |i| (s >> i) & 1 == 1))
        .collect()
}

/// Groups bits into 5-bit symbols; a short final group is zero-padded.
pub fn bits_to_symbols(bits: &[bool]) -> Vec<u8> {
    bits.chunks(SYMBOL_BITS)
        .map(|c| (0..SYMBOL_BITS).fold(0u8, |acc, i| (acc << 1) | c.get(i).copied().unwrap_or(false) as u8))
        .collect()
}
