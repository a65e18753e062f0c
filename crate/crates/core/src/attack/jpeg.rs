// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Baseline JPEG quantization loss without entropy coding.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Standard luminance quantization table, row-major.
pub const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Quality scaling: 5000/QF below 50, 200 - 2·QF otherwise.
pub fn quality_scale(quality: u8) -> u32 {
    let q = quality as u32;
    if q < 50 {
        5000 / q
    } else {
        200 - 2 * q
    }
}

pub fn quant_table(quality: u8) -> Result<[u16; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidInput(format!("JPEG quality {quality} outside 1..=100")));
    }
    let scale = quality_scale(quality);
    Ok(LUMA_TABLE.map(|q| ((q as u32 * scale + 50) / 100).clamp(1, 255) as u16))
}

/// cos((2x+1)uπ/16) scaled by the orthonormal factor, indexed [u][x].
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let c = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        b
    })
}

/// Separable orthonormal 2-D DCT-II of an 8×8 block.
pub fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

pub fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Compresses and decompresses at quality `quality`; edges are replicated to
/// fill partial blocks and cropped away afterwards.
pub fn jpeg_attack(image: &GrayImage, quality: u8) -> Result<GrayImage> {
    let table = quant_table(quality)?;
    let (h, w) = (image.height(), image.width());
    let mut out = image.clone();
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let mut block = [0.0; 64];
            for y in 0..8 {
                for x in 0..8 {
                    let (r, c) = ((by + y).min(h - 1), (bx + x).min(w - 1));
                    block[y * 8 + x] = image.get(r, c) as f64 - 128.0;
                }
            }
            let mut coef = fdct(&block);
            for (c, &q) in coef.iter_mut().zip(&table) {
                *c = (*c / q as f64).round() * q as f64;
            }
            let rec = idct(&coef);
            for y in 0..8.min(h - by) {
                for x in 0..8.min(w - bx) {
                    let v = (rec[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
                    out.set(by + y, bx + x, v);
                }
            }
        }
    }
    Ok(out)
}
