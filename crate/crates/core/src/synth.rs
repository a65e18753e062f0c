// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Seeded procedural grayscale images with natural-image statistics:
//! smooth illumination, multi-octave value noise, hard-edged shapes and
//! sensor-like grain. Used as a test corpus when no photographs are supplied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Amplitude of the fractal texture, in gray levels.
    pub texture: f64,
    /// Standard deviation of per-pixel grain.
    pub grain: f64,
    /// Number of hard-edged shapes.
    pub shapes: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            texture: 40.0,
            grain: 2.0,
            shapes: 6,
        }
    }
}

/// Bilinearly interpolated lattice noise with the given cell size, in [-1, 1].
fn value_noise(h: usize, w: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gh = h / cell + 2;
    let gw = w / cell + 2;
    let grid: Vec<f64> = (0..gh * gw).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let fy = r as f64 / cell as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        let sy = ty * ty * (3.0 - 2.0 * ty);
        for c in 0..w {
            let fx = c as f64 / cell as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let sx = tx * tx * (3.0 - 2.0 * tx);
            let g = |y: usize, x: usize| grid[y * gw + x];
            let top = g(y0, x0) * (1.0 - sx) + g(y0, x0 + 1) * sx;
            let bot = g(y0 + 1, x0) * (1.0 - sx) + g(y0 + 1, x0 + 1) * sx;
            out[r * w + c] = top * (1.0 - sy) + bot * sy;
        }
    }
    out
}

pub fn synth_image(height: usize, width: usize, seed: u64, params: SynthParams) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = height * width;
    let mut field = vec![0.0f64; n];

    // slowly varying illumination
    let base = rng.random_range(70.0..180.0);
    let (gy, gx) = (rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
    for r in 0..height {
        for c in 0..width {
            field[r * width + c] = base + gy * r as f64 / height as f64 + gx * c as f64 / width as f64;
        }
    }

    // fractal texture, amplitude halving per octave
    let mut cell = (height.max(width) / 4).max(2);
    let mut amp = params.texture;
    while cell >= 2 {
        for (f, v) in field.iter_mut().zip(value_noise(height, width, cell, &mut rng)) {
            *f += amp * v;
        }
        cell /= 2;
        amp *= 0.5;
    }

    // flat shapes with hard edges
    for _ in 0..params.shapes {
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let ry = rng.random_range(0.05..0.25) * height as f64;
        let rx = rng.random_range(0.05..0.25) * width as f64;
        let shift = rng.random_range(-70.0..70.0);
        let ellipse = rng.random_bool(0.5);
        for r in 0..height {
            for c in 0..width {
                let dy = (r as f64 - cy) / ry;
                let dx = (c as f64 - cx) / rx;
                let inside = if ellipse {
                    dy * dy + dx * dx <= 1.0
                } else {
                    dy.abs() <= 1.0 && dx.abs() <= 1.0
                };
                if inside {
                    field[r * width + c] += shift;
                }
            }
        }
    }

    let grain = Normal::new(0.0, params.grain.max(1e-9)).expect("finite sigma");
    let data = field
        .into_iter()
        .map(|v| (v + grain.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(height, width, data).expect("dimensions match")
}

/// `count` images with seeds `seed`, `seed + 1`, ... and varied texture.
pub fn corpus(count: usize, height: usize, width: usize, seed: u64) -> Vec<GrayImage> {
    (0..count as u64)
        .map(|i| {
            let params = SynthParams {
                texture: 20.0 + 10.0 * (i % 5) as f64,
                grain: 1.0 + (i % 3) as f64,
                shapes: 3 + (i % 6) as usize,
            };
            synth_image(height, width, seed + i, params)
        })
        .collect()
}
