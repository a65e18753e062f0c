// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Lossless prediction-error bit-plane compression.
//!
//! Each pixel is predicted with the median edge detector (MED) from its
//! causal neighbours, and the signed error is folded to a non-negative code.
//! Codes above 255 mark overflow pixels: their raw value is stored in the
//! error image and their position recorded in the auxiliary header. The
//! error image is then written plane by plane (LSB first). Planes above the
//! threshold `T` may be block-compressed, where an all-zero `s`×`s` block
//! costs a single flag bit.
//!
//! Stream layout, MSB first within every field:
//!
//! ```text
//! [block_size_code:4][threshold:3][overflow_count:20][row:9 col:9]*count
//! plane k = 1..=8:
//!     k <= threshold : [raw: H*W bits]
//!     k >  threshold : [mode:1] then raw (mode 0) or blocks (mode 1)
//! ```
//!
//! In block mode, blocks are visited in raster order; a full block emits `0`
//! when empty or `1` followed by its `s*s` bits, and a partial edge block
//! emits its bits raw with no flag.

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Block sizes addressable by the 4-bit block size code (the code is the index).
pub const BLOCK_SIZES: [usize; 4] = [2, 4, 8, 16];

const BLOCK_CODE_BITS: u32 = 4;
const THRESHOLD_BITS: u32 = 3;
const OVERFLOW_COUNT_BITS: u32 = 20;
const COORD_BITS: u32 = 9;
/// Overflow coordinates are 9-bit, so images with overflow pixels are capped at 512.
pub const MAX_OVERFLOW_DIM: usize = 1 << COORD_BITS;

/// Side information needed to invert the compression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxInfo {
    pub block_size: usize,
    pub threshold: u8,
    /// (row, column) of every overflow pixel in raster order.
    pub overflow: Vec<(u16, u16)>,
}

impl AuxInfo {
    pub fn bit_len(&self) -> usize {
        Self::fixed_bits() + self.overflow.len() * 2 * COORD_BITS as usize
    }

    fn fixed_bits() -> usize {
        (BLOCK_CODE_BITS + THRESHOLD_BITS + OVERFLOW_COUNT_BITS) as usize
    }

    fn block_code(&self) -> u64 {
        BLOCK_SIZES
            .iter()
            .position(|&s| s == self.block_size)
            .expect("block size from BLOCK_SIZES") as u64
    }

    fn write(&self, w: &mut BitWriter) {
        w.write(self.block_code(), BLOCK_CODE_BITS);
        w.write(self.threshold as u64, THRESHOLD_BITS);
        w.write(self.overflow.len() as u64, OVERFLOW_COUNT_BITS);
        for &(r, c) in &self.overflow {
            w.write(r as u64, COORD_BITS);
            w.write(c as u64, COORD_BITS);
        }
    }

    fn read(r: &mut BitReader<'_>, height: usize, width: usize) -> Result<Self> {
        let code = r.read(BLOCK_CODE_BITS)? as usize;
        let block_size = *BLOCK_SIZES
            .get(code)
            .ok_or_else(|| Error::Corrupt(format!("block size code {code}")))?;
        let threshold = r.read(THRESHOLD_BITS)? as u8;
        let count = r.read(OVERFLOW_COUNT_BITS)? as usize;
        if count > height * width {
            return Err(Error::Corrupt(format!("{count} overflow pixels")));
        }
        let mut overflow = Vec::with_capacity(count);
        for _ in 0..count {
            let row = r.read(COORD_BITS)? as u16;
            let col = r.read(COORD_BITS)? as u16;
            if row as usize >= height || col as usize >= width {
                return Err(Error::Corrupt(format!("overflow pixel ({row},{col}) out of bounds")));
            }
            overflow.push((row, col));
        }
        Ok(Self {
            block_size,
            threshold,
            overflow,
        })
    }
}

/// Aux header plus compressed planes, self-delimiting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedPackage {
    pub aux: AuxInfo,
    /// Aux serialization followed by the eight plane payloads.
    pub stream: Vec<bool>,
    pub height: usize,
    pub width: usize,
}

impl CompressedPackage {
    pub fn total_bits(&self) -> usize {
        self.stream.len()
    }
}

/// MED prediction for every pixel, using original (equivalently, decoded) neighbours.
pub fn med_predict(image: &GrayImage) -> Vec<u8> {
    let (h, w) = (image.height(), image.width());
    let px = image.pixels();
    let mut pred = vec![0u8; h * w];
    for r in 0..h {
        for c in 0..w {
            pred[r * w + c] = predict_at(px, w, r, c);
        }
    }
    pred
}

#[inline]
fn predict_at(px: &[u8], w: usize, r: usize, c: usize) -> u8 {
    match (r, c) {
        (0, 0) => 0,
        (0, _) => px[c - 1],
        (_, 0) => px[(r - 1) * w],
        _ => {
            let a = px[r * w + c - 1];
            let b = px[(r - 1) * w + c];
            let d = px[(r - 1) * w + c - 1];
            if d >= a.max(b) {
                a.min(b)
            } else if d <= a.min(b) {
                a.max(b)
            } else {
                // a + b - d lies strictly between min(a,b) and max(a,b) here
                (a as i16 + b as i16 - d as i16) as u8
            }
        }
    }
}

/// Folds the prediction error `x - pred` to a non-negative code in `0..=510`.
pub fn fold_error(x: u8, pred: u8) -> u16 {
    let e = x as i32 - pred as i32;
    if e >= 0 {
        (2 * e) as u16
    } else {
        (-2 * e - 1) as u16
    }
}

/// Inverse of [`fold_error`]; `None` if the code does not map back into `0..=255`.
pub fn unfold_error(code: u16, pred: u8) -> Option<u8> {
    let code = code as i32;
    let e = if code % 2 == 0 { code / 2 } else { -(code + 1) / 2 };
    u8::try_from(pred as i32 + e).ok()
}

struct ErrorImage {
    codes: Vec<u8>,
    overflow: Vec<(u16, u16)>,
}

fn error_image(image: &GrayImage) -> Result<ErrorImage> {
    let (h, w) = (image.height(), image.width());
    let pred = med_predict(image);
    let mut codes = Vec::with_capacity(h * w);
    let mut overflow = Vec::new();
    for (i, (&x, &p)) in image.pixels().iter().zip(&pred).enumerate() {
        let code = fold_error(x, p);
        if code > 255 {
            overflow.push(((i / w) as u16, (i % w) as u16));
            codes.push(x);
        } else {
            codes.push(code as u8);
        }
    }
    if !overflow.is_empty() && (h > MAX_OVERFLOW_DIM || w > MAX_OVERFLOW_DIM) {
        return Err(Error::Unsupported(format!(
            "{h}x{w} image has {} overflow pixels; coordinates are limited to {MAX_OVERFLOW_DIM}",
            overflow.len()
        )));
    }
    Ok(ErrorImage { codes, overflow })
}

/// Bits needed to block-code every plane with block size `s`, indexed by plane-1.
fn block_costs(codes: &[u8], h: usize, w: usize, s: usize) -> [usize; 8] {
    let (full_rows, full_cols) = (h / s, w / s);
    let full_blocks = full_rows * full_cols;
    let partial_pixels = h * w - full_blocks * s * s;
    let mut nonzero = [0usize; 8];
    for br in 0..full_rows {
        for bc in 0..full_cols {
            let mut or = 0u8;
            for r in br * s..(br + 1) * s {
                for &v in &codes[r * w + bc * s..r * w + (bc + 1) * s] {
                    or |= v;
                }
            }
            for (k, nz) in nonzero.iter_mut().enumerate() {
                *nz += ((or >> k) & 1) as usize;
            }
        }
    }
    nonzero.map(|z| full_blocks + z * s * s + partial_pixels)
}

fn total_for(aux_bits: usize, n: usize, costs: &[usize; 8], threshold: u8) -> usize {
    aux_bits
        + (0..8)
            .map(|k| if k < threshold as usize { n } else { 1 + n.min(costs[k]) })
            .sum::<usize>()
}

/// Compresses with the `(block size, threshold)` pair that minimizes the
/// stream length; ties go to the smaller block size, then the smaller threshold.
pub fn compress_image(image: &GrayImage) -> Result<CompressedPackage> {
    let err = error_image(image)?;
    let (h, w) = (image.height(), image.width());
    let n = h * w;
    let aux_bits = AuxInfo::fixed_bits() + err.overflow.len() * 2 * COORD_BITS as usize;
    let mut best: Option<(usize, usize, u8)> = None;
    for &s in &BLOCK_SIZES {
        let costs = block_costs(&err.codes, h, w, s);
        for t in 0..8u8 {
            let total = total_for(aux_bits, n, &costs, t);
            if best.is_none_or(|(b, _, _)| total < b) {
                best = Some((total, s, t));
            }
        }
    }
    let (_, s, t) = best.expect("search space is non-empty");
    Ok(emit(err, h, w, s, t))
}

/// Compresses with fixed parameters (per-plane raw fallback still applies).
pub fn compress_with(image: &GrayImage, block_size: usize, threshold: u8) -> Result<CompressedPackage> {
    if !BLOCK_SIZES.contains(&block_size) || threshold > 7 {
        return Err(Error::InvalidInput(format!(
            "block size {block_size} / threshold {threshold}"
        )));
    }
    let err = error_image(image)?;
    Ok(emit(err, image.height(), image.width(), block_size, threshold))
}

fn emit(err: ErrorImage, h: usize, w: usize, s: usize, t: u8) -> CompressedPackage {
    let n = h * w;
    let aux = AuxInfo {
        block_size: s,
        threshold: t,
        overflow: err.overflow,
    };
    let costs = block_costs(&err.codes, h, w, s);
    let mut out = BitWriter::with_capacity(total_for(aux.bit_len(), n, &costs, t));
    aux.write(&mut out);
    for (k, &cost) in costs.iter().enumerate() {
        let plane = |i: usize| (err.codes[i] >> k) & 1 == 1;
        let raw = |out: &mut BitWriter| (0..n).for_each(|i| out.push(plane(i)));
        if k < t as usize {
            raw(&mut out);
        } else if cost < n {
            out.push(true);
            for_each_block(h, w, s, |cells, full| {
                if full {
                    let any = cells.clone().any(plane);
                    out.push(any);
                    if any {
                        cells.for_each(|i| out.push(plane(i)));
                    }
                } else {
                    cells.for_each(|i| out.push(plane(i)));
                }
            });
        } else {
            out.push(false);
            raw(&mut out);
        }
    }
    CompressedPackage {
        aux,
        stream: out.into_bits(),
        height: h,
        width: w,
    }
}

/// Visits blocks in raster order, passing the row-major pixel indices of each
/// block and whether it is a full `s`×`s` block.
fn for_each_block<F>(h: usize, w: usize, s: usize, mut f: F)
where
    F: FnMut(BlockCells, bool),
{
    for r0 in (0..h).step_by(s) {
        for c0 in (0..w).step_by(s) {
            let rows = s.min(h - r0);
            let cols = s.min(w - c0);
            let cells = BlockCells {
                w,
                r0,
                c0,
                rows,
                cols,
                i: 0,
            };
            f(cells, rows == s && cols == s);
        }
    }
}

#[derive(Clone)]
struct BlockCells {
    w: usize,
    r0: usize,
    c0: usize,
    rows: usize,
    cols: usize,
    i: usize,
}

impl Iterator for BlockCells {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.i >= self.rows * self.cols {
            return None;
        }
        let (dr, dc) = (self.i / self.cols, self.i % self.cols);
        self.i += 1;
        Some((self.r0 + dr) * self.w + self.c0 + dc)
    }
}

pub fn decompress_image(package: &CompressedPackage) -> Result<GrayImage> {
    let (img, used) = decompress_bits(&package.stream, package.height, package.width)?;
    if used != package.total_bits() {
        return Err(Error::Corrupt(format!(
            "decoder consumed {used} of {} bits",
            package.total_bits()
        )));
    }
    Ok(img)
}

/// Decodes a stream prefix; returns the image and the number of bits consumed.
/// Trailing bits after the self-delimited stream are ignored.
pub fn decompress_bits(bits: &[bool], height: usize, width: usize) -> Result<(GrayImage, usize)> {
    let n = height * width;
    let mut r = BitReader::new(bits);
    let aux = AuxInfo::read(&mut r, height, width)?;
    let s = aux.block_size;
    let mut codes = vec![0u8; n];
    for k in 0..8usize {
        let raw = k < aux.threshold as usize || !r.read_bit()?;
        if raw {
            for (i, bit) in r.read_slice(n)?.iter().enumerate() {
                codes[i] |= (*bit as u8) << k;
            }
        } else {
            let mut failure = None;
            for_each_block(height, width, s, |cells, full| {
                if failure.is_some() {
                    return;
                }
                let res = (|| -> Result<()> {
                    if full && !r.read_bit()? {
                        return Ok(());
                    }
                    for i in cells {
                        codes[i] |= (r.read_bit()? as u8) << k;
                    }
                    Ok(())
                })();
                if let Err(e) = res {
                    failure = Some(e);
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
        }
    }
    let used = r.position();

    let mut is_overflow = vec![false; n];
    for &(row, col) in &aux.overflow {
        is_overflow[row as usize * width + col as usize] = true;
    }
    let mut px = vec![0u8; n];
    for row in 0..height {
        for col in 0..width {
            let i = row * width + col;
            px[i] = if is_overflow[i] {
                codes[i]
            } else {
                let pred = predict_at(&px, width, row, col);
                unfold_error(codes[i] as u16, pred)
                    .ok_or_else(|| Error::Corrupt(format!("code {} at ({row},{col}) leaves pixel range", codes[i])))?
            };
        }
    }
    Ok((GrayImage::new(height, width, px)?, used))
}

/// Free bits relative to the uncompressed size: `8N - total_bits`, floored at zero.
pub fn net_capacity(package: &CompressedPackage, pixels: usize) -> usize {
    (8 * pixels).saturating_sub(package.total_bits())
}
