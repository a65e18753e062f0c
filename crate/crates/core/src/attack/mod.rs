// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Seeded attacks: additive Gaussian noise, JPEG, and zero-fill cropping.

pub mod jpeg;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub use jpeg::jpeg_attack;

/// `y = clamp(round(x + 255·n))` with `n ~ N(0, variance)` on the [0, 1] scale.
pub fn gaussian_noise(image: &GrayImage, variance: f64, seed: u64) -> Result<GrayImage> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::InvalidInput(format!("noise variance {variance}")));
    }
    if variance == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for p in out.pixels_mut() {
        let n: f64 = normal.sample(&mut rng);
        *p = (*p as f64 + 255.0 * n).round().clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

/// Axis-aligned rectangle; `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.y..self.y + self.h).contains(&row) && (self.x..self.x + self.w).contains(&col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropPosition {
    TopLeft,
    Middle,
    TopRight,
}

impl CropPosition {
    pub const ALL: [CropPosition; 3] = [CropPosition::TopLeft, CropPosition::Middle, CropPosition::TopRight];

    pub fn name(&self) -> &'static str {
        match self {
            CropPosition::TopLeft => "top_left",
            CropPosition::Middle => "middle",
            CropPosition::TopRight => "top_right",
        }
    }

    /// Square of side `size` at this preset position.
    pub fn rect(&self, size: usize, height: usize, width: usize) -> Result<Rect> {
        if size > height || size > width {
            return Err(Error::InvalidInput(format!(
                "{size}x{size} crop does not fit a {height}x{width} image"
            )));
        }
        let (x, y) = match self {
            CropPosition::TopLeft => (0, 0),
            CropPosition::Middle => ((width - size) / 2, (height - size) / 2),
            CropPosition::TopRight => (width - size, 0),
        };
        Ok(Rect { x, y, w: size, h: size })
    }
}

/// Zeroes the pixels inside `rect`.
pub fn crop_fixed(image: &GrayImage, rect: Rect) -> Result<GrayImage> {
    if rect.x + rect.w > image.width() || rect.y + rect.h > image.height() {
        return Err(Error::InvalidInput(format!(
            "{rect:?} exceeds the {}x{} image",
            image.height(),
            image.width()
        )));
    }
    let mut out = image.clone();
    for r in rect.y..rect.y + rect.h {
        for c in rect.x..rect.x + rect.w {
            out.set(r, c, 0);
        }
    }
    Ok(out)
}

/// Draws a rectangle of area ≈ `ratio·N`, aspect ratio log-uniform in [1/4, 4]
/// (clamped by the image borders), at a uniform position.
pub fn random_rect(height: usize, width: usize, ratio: f64, seed: u64) -> Result<Rect> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("crop ratio {ratio} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = (ratio * (height * width) as f64).round().max(1.0);
    let aspect = rng.random_range(0.25f64.ln()..=4f64.ln()).exp();
    let w = ((area * aspect).sqrt().round() as usize).clamp(1, width);
    let h = ((area / w as f64).round() as usize).clamp(1, height);
    let x = rng.random_range(0..=width - w);
    let y = rng.random_range(0..=height - h);
    Ok(Rect { x, y, w, h })
}

pub fn crop_random(image: &GrayImage, ratio: f64, seed: u64) -> Result<(GrayImage, Rect)> {
    let rect = random_rect(image.height(), image.width(), ratio, seed)?;
    Ok((crop_fixed(image, rect)?, rect))
}

/// One attack with its parameters; the seed is supplied at application time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    None,
    Gaussian { variance: f64 },
    Jpeg { quality: u8 },
    CropFixed { rect: Rect },
    CropPreset { size: usize, position: CropPosition },
    CropRandom { ratio: f64 },
}

impl AttackSpec {
    pub fn apply(&self, image: &GrayImage, seed: u64) -> Result<GrayImage> {
        match *self {
            AttackSpec::None => Ok(image.clone()),
            AttackSpec::Gaussian { variance } => gaussian_noise(image, variance, seed),
            AttackSpec::Jpeg { quality } => jpeg_attack(image, quality),
            AttackSpec::CropFixed { rect } => crop_fixed(image, rect),
            AttackSpec::CropPreset { size, position } => {
                crop_fixed(image, position.rect(size, image.height(), image.width())?)
            }
            AttackSpec::CropRandom { ratio } => Ok(crop_random(image, ratio, seed)?.0),
        }
    }

    /// Short parameter label for result tables.
    pub fn label(&self) -> String {
        match self {
            AttackSpec::None => "none".into(),
            AttackSpec::Gaussian { variance } => format!("variance={variance}"),
            AttackSpec::Jpeg { quality } => format!("qf={quality}"),
            AttackSpec::CropFixed { rect } => format!("rect={}x{}@{},{}", rect.w, rect.h, rect.x, rect.y),
            AttackSpec::CropPreset { size, position } => format!("size={size} position={}", position.name()),
            AttackSpec::CropRandom { ratio } => format!("ratio={ratio}"),
        }
    }
}
