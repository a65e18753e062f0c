// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! 8-bit grayscale images, bit-plane decomposition and binary PGM (P5) I/O.

use crate::error::{Error, Result};

/// An H×W matrix of 8-bit intensities stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.data
    }

    pub fn same_dims(&self, other: &GrayImage) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Bit `k` (1 = LSB, 8 = MSB) of the pixel at linear index `idx`.
    pub fn bit(&self, idx: usize, k: u8) -> bool {
        (self.data[idx] >> (k - 1)) & 1 == 1
    }

    pub fn set_bit(&mut self, idx: usize, k: u8, bit: bool) {
        let mask = 1u8 << (k - 1);
        if bit {
            self.data[idx] |= mask;
        } else {
            self.data[idx] &= !mask;
        }
    }
}

/// One binary plane of an image; `index` 1 is the least significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    pub index: u8,
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

pub fn bitplane_split(image: &GrayImage) -> Vec<BitPlane> {
    (1..=8u8)
        .map(|k| BitPlane {
            index: k,
            height: image.height,
            width: image.width,
            bits: image.data.iter().map(|&p| (p >> (k - 1)) & 1 == 1).collect(),
        })
        .collect()
}

/// Reassembles an image from exactly eight planes with indices 1..=8 in any order.
pub fn bitplane_merge(planes: &[BitPlane]) -> Result<GrayImage> {
    if planes.len() != 8 {
        return Err(Error::Dimension(format!("expected 8 bit planes, got {}", planes.len())));
    }
    let (h, w) = (planes[0].height, planes[0].width);
    let mut seen = [false; 8];
    for p in planes {
        if p.height != h || p.width != w || p.bits.len() != h * w {
            return Err(Error::Dimension(format!(
                "plane {} is {}x{} ({} bits), expected {h}x{w}",
                p.index,
                p.height,
                p.width,
                p.bits.len()
            )));
        }
        if !(1..=8).contains(&p.index) || seen[p.index as usize - 1] {
            return Err(Error::InvalidInput(format!("bad or repeated plane index {}", p.index)));
        }
        seen[p.index as usize - 1] = true;
    }
    let mut data = vec![0u8; h * w];
    for p in planes {
        let shift = p.index - 1;
        for (px, &b) in data.iter_mut().zip(&p.bits) {
            *px |= (b as u8) << shift;
        }
    }
    GrayImage::new(h, w, data)
}

/// Parses a binary PGM. Header comments are skipped; maxval must be ≤ 255.
pub fn pgm_load(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Parse("missing P5 magic".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments before each header token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::Parse("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse(format!("expected a number at byte {start}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::Parse(format!("header value {text:?} out of range")))?;
    }
    let [width, height, maxval] = fields;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Parse("missing whitespace after maxval".into())),
    }
    if maxval == 0 {
        return Err(Error::Parse("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::Unsupported(format!(
            "maxval {maxval}: only 8-bit PGM is supported"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse("image dimensions overflow".into()))?;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Parse(format!("raster needs {n} bytes")))?;
    GrayImage::new(height, width, raster.to_vec())
}

/// Emits canonical P5: `"P5\n<w> <h>\n255\n"` followed by the raw raster.
pub fn pgm_save(image: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", image.width, image.height);
    let mut out = Vec::with_capacity(header.len() + image.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&image.data);
    out
}
