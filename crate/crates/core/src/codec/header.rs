// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Plaintext LEN / FLAG / RLEN headers in planes 7 and 8.

use std::ops::Range;

use crate::bits::{bits_to_u64, u64_to_bits};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rs::{bits_to_symbols, RsCode};
use crate::spiral::{Layout, FLAG_FIELD, LEN_VALUE_BITS, MAX_PAYLOAD_BITS, RLEN_HALF};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    /// Payload length in bits (the capacity allowance before embedding).
    pub len: usize,
    /// Set when part of the bitstream was displaced into the gaps.
    pub flag: bool,
    /// Number of displaced bits.
    pub displaced: usize,
}

/// The LEN field: a 15-bit length protected by one RS(31,3) codeword.
pub fn len_codeword(len: usize) -> Vec<bool> {
    assert!(len <= MAX_PAYLOAD_BITS);
    RsCode::default()
        .pack(&u64_to_bits(len as u64, LEN_VALUE_BITS))
        .expect("15 bits fill one codeword")
}

/// Decodes a LEN field; `None` when the codeword is beyond repair.
pub fn decode_len(bits: &[bool]) -> Option<usize> {
    let d = RsCode::default().decode(&bits_to_symbols(bits)).ok()?;
    Some(bits_to_u64(&crate::rs::symbols_to_bits(&d.message)) as usize)
}

/// Same as [`decode_len`] but falls back to the raw systematic symbols.
pub fn decode_len_or_raw(bits: &[bool]) -> usize {
    let (msg, _) = RsCode::default().decode_or_raw(&bits_to_symbols(bits));
    bits_to_u64(&crate::rs::symbols_to_bits(&msg)) as usize
}

pub(crate) fn write_range(layout: &Layout, image: &mut GrayImage, range: Range<usize>, bits: &[bool]) {
    debug_assert_eq!(range.len(), bits.len());
    for (p, &b) in range.zip(bits) {
        let px = layout.order[p];
        image.set_bit(px, 7, b);
        image.set_bit(px, 8, b);
    }
}

pub(crate) fn read_range(layout: &Layout, image: &GrayImage, range: Range<usize>) -> Vec<bool> {
    range.map(|p| image.bit(layout.order[p], 8)).collect()
}

pub fn write_len(layout: &Layout, image: &mut GrayImage, len: usize) {
    let bits = len_codeword(len);
    for s in 0..3 {
        write_range(layout, image, layout.len_field(s), &bits);
    }
}

/// Writes every header field into both planes.
pub fn write_header(layout: &Layout, image: &mut GrayImage, header: &Header) {
    write_len(layout, image, header.len);
    let flag = vec![header.flag; FLAG_FIELD];
    for s in 0..3 {
        write_range(layout, image, layout.flag_field(s), &flag);
    }
    let rlen = u64_to_bits(header.displaced as u64, 2 * RLEN_HALF as u32);
    write_range(layout, image, layout.rlen_hi(), &rlen[..RLEN_HALF]);
    write_range(layout, image, layout.rlen_lo(), &rlen[RLEN_HALF..]);
}

/// Reads plane-8 headers from an image assumed intact; any disagreement is an integrity error.
pub fn read_header(layout: &Layout, image: &GrayImage) -> Result<Header> {
    let mut lens = [0usize; 3];
    for (s, len) in lens.iter_mut().enumerate() {
        *len = decode_len(&read_range(layout, image, layout.len_field(s)))
            .ok_or_else(|| Error::Integrity(format!("LEN copy {s} is not a valid codeword")))?;
    }
    if lens[1] != lens[0] || lens[2] != lens[0] {
        return Err(Error::Integrity(format!("LEN copies disagree: {lens:?}")));
    }
    let flags: Vec<bool> = (0..3)
        .flat_map(|s| read_range(layout, image, layout.flag_field(s)))
        .collect();
    if flags.iter().any(|&f| f != flags[0]) {
        return Err(Error::Integrity("FLAG bits are inconsistent".into()));
    }
    let mut rlen = read_range(layout, image, layout.rlen_hi());
    rlen.extend(read_range(layout, image, layout.rlen_lo()));
    let displaced = bits_to_u64(&rlen) as usize;
    if flags[0] != (displaced > 0) {
        return Err(Error::Integrity(format!(
            "FLAG={} but RLEN={displaced}",
            flags[0] as u8
        )));
    }
    Ok(Header {
        len: lens[0],
        flag: flags[0],
        displaced,
    })
}
