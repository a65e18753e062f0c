// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Spiral traversal and the partition of planes 7 and 8.
//!
//! The spiral runs clockwise from the top-left pixel, right first, ring by
//! ring towards the centre. Its index range `0..N` is cut into three
//! segments (outer, transition, centre) at `b1 = ⌊N/3⌋` and `b2 = 2⌊N/3⌋`.
//! Positions are identical in both planes:
//!
//! ```text
//! segment start + [0, 155)     LEN codeword
//! segment start + [155, 186)   FLAG, replicated
//! [186, 202)                   RLEN high half (outer segment only)
//! [b2 - 16, b2)                RLEN low half (end of transition segment)
//! ```
//!
//! The rest of each segment is its free area. One copy of the coded
//! watermark is spread evenly over every free area; whatever is left over
//! forms the gaps that hold displaced bitstream bits, plane 7 first.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rs::{RsCode, CODEWORD_BITS};

/// Serialized LEN header: one RS(31,3) codeword holding a 15-bit length.
pub const LEN_FIELD: usize = CODEWORD_BITS;
pub const LEN_VALUE_BITS: u32 = 15;
pub const MAX_PAYLOAD_BITS: usize = (1 << LEN_VALUE_BITS) - 1;
pub const FLAG_FIELD: usize = 31;
pub const RLEN_HALF: usize = 16;
/// Per-segment prefix taken by LEN and FLAG.
pub const SEGMENT_HEADER: usize = LEN_FIELD + FLAG_FIELD;
/// Header bits per plane.
pub const HEADER_BITS: usize = 3 * SEGMENT_HEADER + 2 * RLEN_HALF;

/// Clockwise outside-in traversal; entry `i` is the linear pixel index visited `i`-th.
pub fn spiral_order(height: usize, width: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(height * width);
    if height == 0 || width == 0 {
        return out;
    }
    let (mut top, mut bottom, mut left, mut right) = (0isize, height as isize - 1, 0isize, width as isize - 1);
    let w = width as isize;
    while top <= bottom && left <= right {
        for c in left..=right {
            out.push((top * w + c) as usize);
        }
        for r in top + 1..=bottom {
            out.push((r * w + right) as usize);
        }
        if top < bottom {
            for c in (left..right).rev() {
                out.push((bottom * w + c) as usize);
            }
        }
        if left < right {
            for r in (top + 1..bottom).rev() {
                out.push((r * w + left) as usize);
            }
        }
        top += 1;
        bottom -= 1;
        left += 1;
        right -= 1;
    }
    out
}

/// Spiral positions of every field in planes 7 and 8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub height: usize,
    pub width: usize,
    /// Spiral index to pixel index.
    pub order: Vec<usize>,
    /// Segment starts followed by N.
    pub bounds: [usize; 4],
    pub payload_bits: usize,
    pub copy_len: usize,
    pub displaced: usize,
    /// Spiral positions of each watermark copy, one vector per segment.
    pub copies: [Vec<usize>; 3],
    /// Non-header, non-copy spiral positions in increasing order.
    pub gaps: Vec<usize>,
}

/// Dimensions whose segments are too small for the headers.
fn check_dims(height: usize, width: usize) -> Result<[usize; 4]> {
    let n = height * width;
    let b1 = n / 3;
    let b2 = 2 * b1;
    if b1 < SEGMENT_HEADER + RLEN_HALF || b2 - RLEN_HALF < b1 + SEGMENT_HEADER {
        return Err(Error::Dimension(format!(
            "{height}x{width} image is too small for the header layout"
        )));
    }
    Ok([0, b1, b2, n])
}

fn free_areas(bounds: &[usize; 4]) -> [Range<usize>; 3] {
    let [_, b1, b2, n] = *bounds;
    [
        SEGMENT_HEADER + RLEN_HALF..b1,
        b1 + SEGMENT_HEADER..b2 - RLEN_HALF,
        b2 + SEGMENT_HEADER..n,
    ]
}

impl Layout {
    pub fn n(&self) -> usize {
        self.height * self.width
    }

    /// Bits the gap positions of both planes can hold.
    pub fn gap_capacity(&self) -> usize {
        2 * self.gaps.len()
    }

    pub fn len_field(&self, segment: usize) -> Range<usize> {
        let s = self.bounds[segment];
        s..s + LEN_FIELD
    }

    pub fn flag_field(&self, segment: usize) -> Range<usize> {
        let s = self.bounds[segment] + LEN_FIELD;
        s..s + FLAG_FIELD
    }

    pub fn rlen_hi(&self) -> Range<usize> {
        SEGMENT_HEADER..SEGMENT_HEADER + RLEN_HALF
    }

    pub fn rlen_lo(&self) -> Range<usize> {
        self.bounds[2] - RLEN_HALF..self.bounds[2]
    }

    /// Every header position, in increasing spiral order.
    pub fn header_positions(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..3)
            .flat_map(|s| self.len_field(s).chain(self.flag_field(s)))
            .chain(self.rlen_hi())
            .chain(self.rlen_lo())
            .collect();
        v.sort_unstable();
        v
    }

    /// Pixel and plane of global gap slot `i` (plane 7 slots first).
    pub fn gap_slot(&self, i: usize) -> (usize, u8) {
        let g = self.gaps.len();
        if i < g {
            (self.order[self.gaps[i]], 7)
        } else {
            (self.order[self.gaps[i - g]], 8)
        }
    }
}

/// Layout for a payload protected by the default RS(31,3) code.
pub fn build_layout(height: usize, width: usize, payload_bits: usize, displaced: usize) -> Result<Layout> {
    build_layout_with(height, width, payload_bits, &RsCode::default(), displaced)
}

/// Largest payload that fits alongside `displaced` bits, or `None` when even
/// an empty payload does not fit.
pub fn max_payload(height: usize, width: usize, code: &RsCode, displaced: usize) -> Result<Option<usize>> {
    let bounds = check_dims(height, width)?;
    let n = height * width;
    let room = 2 * (n - HEADER_BITS);
    if displaced > room {
        return Ok(None);
    }
    let min_free = free_areas(&bounds).iter().map(|r| r.len()).min().unwrap();
    let by_segment = min_free / CODEWORD_BITS;
    let by_gaps = (room - displaced) / (6 * CODEWORD_BITS);
    let codewords = by_segment.min(by_gaps);
    Ok(Some(
        (codewords * code.payload_bits_per_codeword()).min(MAX_PAYLOAD_BITS),
    ))
}

pub fn build_layout_with(
    height: usize,
    width: usize,
    payload_bits: usize,
    code: &RsCode,
    displaced: usize,
) -> Result<Layout> {
    let bounds = check_dims(height, width)?;
    let n = height * width;
    let copy_len = if payload_bits == 0 {
        0
    } else {
        code.coded_len(payload_bits)
    };
    let areas = free_areas(&bounds);
    let fits = payload_bits <= MAX_PAYLOAD_BITS
        && areas.iter().all(|a| copy_len <= a.len())
        && displaced + 2 * (HEADER_BITS + 3 * copy_len) <= 2 * n;
    if !fits {
        let max = max_payload(height, width, code, displaced)?;
        return Err(match max {
            Some(max_payload) => Error::Capacity {
                requested: payload_bits,
                max_payload,
            },
            None => Error::Incompressible {
                displaced,
                gap_capacity: 2 * (n - HEADER_BITS),
            },
        });
    }
    let copies: [Vec<usize>; 3] = std::array::from_fn(|s| {
        let a = &areas[s];
        (0..copy_len).map(|j| a.start + j * a.len() / copy_len).collect()
    });
    let mut taken = vec![false; n];
    let order = spiral_order(height, width);
    let mut layout = Layout {
        height,
        width,
        order,
        bounds,
        payload_bits,
        copy_len,
        displaced,
        copies,
        gaps: Vec::new(),
    };
    for p in layout.header_positions() {
        taken[p] = true;
    }
    for p in layout.copies.iter().flatten() {
        taken[*p] = true;
    }
    layout.gaps = (0..n).filter(|&p| !taken[p]).collect();
    Ok(layout)
}

/// Writes `bits` into the gap slots, plane 7 first; other pixels are untouched.
pub fn displace_bits(layout: &Layout, image: &mut GrayImage, bits: &[bool]) -> Result<()> {
    if bits.len() > layout.gap_capacity() {
        return Err(Error::Incompressible {
            displaced: bits.len(),
            gap_capacity: layout.gap_capacity(),
        });
    }
    for (i, &b) in bits.iter().enumerate() {
        let (px, plane) = layout.gap_slot(i);
        image.set_bit(px, plane, b);
    }
    Ok(())
}

/// Reads back the first `r` gap slots.
pub fn restore_bits(layout: &Layout, image: &GrayImage, r: usize) -> Result<Vec<bool>> {
    if r > layout.gap_capacity() {
        return Err(Error::RestoreFailure(format!(
            "{r} displaced bits exceed gap capacity {}",
            layout.gap_capacity()
        )));
    }
    Ok((0..r)
        .map(|i| {
            let (px, plane) = layout.gap_slot(i);
            image.bit(px, plane)
        })
        .collect())
}
