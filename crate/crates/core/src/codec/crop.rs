// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Blind crop detection and per-bit fusion of the three watermark copies.

use crate::image::GrayImage;

/// Side of the square structuring element used for the opening.
pub const OPENING_SIZE: usize = 5;
/// Zero regions at least this large (after opening) are treated as cropped.
pub const MIN_CROP_AREA: usize = 64;

/// Per-pixel trust, `true` where the pixel is believed intact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CropMap {
    pub height: usize,
    pub width: usize,
    pub trusted: Vec<bool>,
}

impl CropMap {
    pub fn all_trusted(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            trusted: vec![true; height * width],
        }
    }

    pub fn is_trusted(&self, idx: usize) -> bool {
        self.trusted[idx]
    }

    pub fn trusted_fraction(&self) -> f64 {
        if self.trusted.is_empty() {
            return 1.0;
        }
        self.trusted.iter().filter(|&&t| t).count() as f64 / self.trusted.len() as f64
    }
}

/// 1-D window filter along rows (`stride` 1) or columns (`stride` = width).
/// With `all`, a cell survives only if its whole window is set (erosion, with
/// out-of-image cells counted as unset); otherwise any set cell suffices (dilation).
fn filter_1d(mask: &[bool], h: usize, w: usize, along_rows: bool, all: bool) -> Vec<bool> {
    let r = OPENING_SIZE / 2;
    let mut out = vec![false; h * w];
    let (lines, len) = if along_rows { (h, w) } else { (w, h) };
    let at = |line: usize, i: usize| if along_rows { line * w + i } else { i * w + line };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + mask[at(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            let set = prefix[hi] - prefix[lo];
            out[at(line, i)] = if all { set == OPENING_SIZE } else { set > 0 };
        }
    }
    out
}

fn open(mask: &[bool], h: usize, w: usize) -> Vec<bool> {
    let eroded = filter_1d(&filter_1d(mask, h, w, true, true), h, w, false, true);
    filter_1d(&filter_1d(&eroded, h, w, true, false), h, w, false, false)
}

/// Zero mask, 5×5 opening, then 8-connected components of area ≥ 64 become untrusted.
pub fn detect_crop_map(image: &GrayImage) -> CropMap {
    let (h, w) = (image.height(), image.width());
    let zeros: Vec<bool> = image.pixels().iter().map(|&p| p == 0).collect();
    let opened = open(&zeros, h, w);
    let mut trusted = vec![true; h * w];
    let mut seen = vec![false; h * w];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..h * w {
        if !opened[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (r, c) = (i / w, i % w);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if opened[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() >= MIN_CROP_AREA {
            for &i in &component {
                trusted[i] = false;
            }
        }
    }
    CropMap {
        height: h,
        width: w,
        trusted,
    }
}

/// Combines three copies of one bit given their trust flags.
///
/// All trusted: majority. Some trusted: the first trusted copy. None: 0.
pub fn fuse(bits: [bool; 3], trusted: [bool; 3]) -> bool {
    match trusted {
        [true, true, true] => bits.iter().filter(|&&b| b).count() >= 2,
        _ => trusted.iter().position(|&t| t).map(|k| bits[k]).unwrap_or(false),
    }
}
