// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Bit-error rate, image statistics, and the bit-flip model for additive noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Fraction of positions where the two sequences differ.
pub fn ber(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "bit sequences of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64)
}

pub fn histogram(image: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in image.pixels() {
        h[p as usize] += 1;
    }
    h
}

/// Shannon entropy of the 256-bin histogram, in bits per pixel.
pub fn entropy(image: &GrayImage) -> f64 {
    let n = image.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    histogram(image)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Horizontal,
    Vertical,
    Diagonal,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Horizontal, Direction::Vertical, Direction::Diagonal];

    fn offset(&self) -> (usize, usize) {
        match self {
            Direction::Horizontal => (0, 1),
            Direction::Vertical => (1, 0),
            Direction::Diagonal => (1, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    /// Set when either sample has zero variance; `value` is then 0.
    pub degenerate: bool,
}

fn pearson(pairs: impl Iterator<Item = (f64, f64)>) -> Correlation {
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for (x, y) in pairs {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if n < 2.0 || vx <= 0.0 || vy <= 0.0 {
        return Correlation {
            value: 0.0,
            degenerate: true,
        };
    }
    Correlation {
        value: (n * sxy - sx * sy) / (vx.sqrt() * vy.sqrt()),
        degenerate: false,
    }
}

/// Pearson correlation over `samples` seeded random adjacent pairs.
pub fn adjacent_correlation(image: &GrayImage, direction: Direction, samples: usize, seed: u64) -> Result<Correlation> {
    let (dr, dc) = direction.offset();
    let (h, w) = (image.height(), image.width());
    if samples < 2 || h <= dr || w <= dc {
        return Err(Error::InvalidInput(format!("{samples} samples on a {h}x{w} image")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(f64, f64)> = (0..samples)
        .map(|_| {
            let r = rng.random_range(0..h - dr);
            let c = rng.random_range(0..w - dc);
            (image.get(r, c) as f64, image.get(r + dr, c + dc) as f64)
        })
        .collect();
    Ok(pearson(pairs.into_iter()))
}

/// Pearson correlation over every adjacent pair in the image.
pub fn adjacent_correlation_full(image: &GrayImage, direction: Direction) -> Correlation {
    let (dr, dc) = direction.offset();
    let (h, w) = (image.height(), image.width());
    let pairs = (0..h.saturating_sub(dr)).flat_map(move |r| {
        (0..w.saturating_sub(dc)).map(move |c| (image.get(r, c) as f64, image.get(r + dr, c + dc) as f64))
    });
    pearson(pairs)
}

/// Fraction of positions whose pixel values differ.
pub fn npcr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let diff = a.pixels().iter().zip(b.pixels()).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.len() as f64)
}

/// Which pixel values may carry a watermark bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipScheme {
    /// Any value 0..=255.
    MsbOnly,
    /// Values whose two top bits agree: 0..=63 and 192..=255.
    DualMsb,
}

impl FlipScheme {
    pub fn support(&self) -> Vec<u8> {
        match self {
            FlipScheme::MsbOnly => (0..=255).collect(),
            FlipScheme::DualMsb => (0..=63).chain(192..=255).collect(),
        }
    }
}

/// Standard normal CDF, via the complementary error function for accuracy in the tails.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability that noise of pixel-domain deviation `sigma` flips the MSB,
/// averaged over the scheme's support (the threshold sits at 127.5).
pub fn flip_prob_analytic(scheme: FlipScheme, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let support = scheme.support();
    let total: f64 = support
        .iter()
        .map(|&x| {
            let z = (127.5 - x as f64) / sigma;
            if x < 128 {
                1.0 - phi(z)
            } else {
                phi(z)
            }
        })
        .sum();
    total / support.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub p: f64,
    pub trials: u64,
}

impl Estimate {
    /// Binomial standard error of the estimate.
    pub fn std_error(&self) -> f64 {
        (self.p * (1.0 - self.p) / self.trials as f64).sqrt()
    }
}

/// Trials per parallel chunk. Each chunk has its own generator seeded from
/// `(seed, chunk index)`, so results do not depend on the thread count.
pub const MC_CHUNK: u64 = 1 << 16;

/// Simulates `y = clip(round(x + n))` and counts MSB changes.
pub fn flip_prob_montecarlo(scheme: FlipScheme, sigma: f64, trials: u64, seed: u64) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    if sigma <= 0.0 {
        return Ok(Estimate { p: 0.0, trials });
    }
    let support = scheme.support();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let chunks = trials.div_ceil(MC_CHUNK);
    let flips: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            let mut flips = 0u64;
            for _ in 0..count {
                let x = support[rng.random_range(0..support.len())];
                let y = (x as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
                flips += ((x ^ y) >> 7) as u64;
            }
            flips
        })
        .sum();
    Ok(Estimate {
        p: flips as f64 / trials as f64,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn ber_examples() {
        let a = vec![true; 128];
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        assert_eq!(ber(&a, &[false; 128]).unwrap(), 1.0);
        let mut b = a.clone();
        b[17] = false;
        assert_eq!(ber(&a, &b).unwrap(), 1.0 / 128.0);
        assert!(ber(&a, &b[..5]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&GrayImage::filled(10, 10, 4)), 0.0);
        let uniform = GrayImage::from_fn(16, 16, |r, c| (r * 16 + c) as u8);
        assert!((entropy(&uniform) - 8.0).abs() < 1e-12);
        let half = GrayImage::from_fn(2, 2, |r, _| r as u8);
        assert!((entropy(&half) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_examples() {
        let c = adjacent_correlation(&GrayImage::filled(8, 8, 3), Direction::Horizontal, 100, 1).unwrap();
        assert!(c.degenerate && c.value == 0.0);
        let rows = GrayImage::from_fn(64, 64, |r, _| r as u8);
        // identical neighbours along each row
        assert!(adjacent_correlation_full(&rows, Direction::Vertical).value > 0.99);
        let smooth = GrayImage::from_fn(64, 64, |r, c| (r + c) as u8);
        for d in Direction::ALL {
            assert!(adjacent_correlation(&smooth, d, 5000, 2).unwrap().value > 0.99);
        }
        assert!(adjacent_correlation(&smooth, Direction::Diagonal, 1, 2).is_err());
    }

    #[test]
    fn npcr_examples() {
        let a = GrayImage::filled(4, 4, 1);
        assert_eq!(npcr(&a, &a).unwrap(), 0.0);
        assert_eq!(npcr(&a, &GrayImage::filled(4, 4, 2)).unwrap(), 1.0);
        assert!(npcr(&a, &GrayImage::filled(4, 5, 2)).is_err());
    }

    #[test]
    fn phi_accuracy() {
        // reference values of the standard normal CDF
        for (z, v) in [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-2.0, 0.022_750_131_948_179_2),
            (3.0, 0.998_650_101_968_369_9),
        ] {
            assert!((phi(z) - v).abs() < 1e-12, "phi({z}) = {} vs {v}", phi(z));
        }
    }

    #[test]
    fn analytic_limits_and_order() {
        for s in [FlipScheme::MsbOnly, FlipScheme::DualMsb] {
            assert_eq!(flip_prob_analytic(s, 0.0), 0.0);
            assert!(flip_prob_analytic(s, 1e-3) < 1e-12);
            assert!((flip_prob_analytic(s, 1e9) - 0.5).abs() < 1e-6);
            let mut prev = 0.0;
            for i in 1..=400 {
                let p = flip_prob_analytic(s, i as f64 * 0.5);
                assert!(p >= prev - 1e-15);
                prev = p;
            }
        }
        for sigma in 1..=120 {
            let s = sigma as f64;
            assert!(flip_prob_analytic(FlipScheme::DualMsb, s) < flip_prob_analytic(FlipScheme::MsbOnly, s));
        }
    }

    #[test]
    fn montecarlo_agrees() {
        for sigma in [10.0, 25.0, 50.0] {
            for s in [FlipScheme::MsbOnly, FlipScheme::DualMsb] {
                let est = flip_prob_montecarlo(s, sigma, 1_000_000, 7).unwrap();
                let exact = flip_prob_analytic(s, sigma);
                assert!(
                    (est.p - exact).abs() <= 3.0 * est.std_error() + 0.005,
                    "{s:?} sigma={sigma}: {} vs {exact}",
                    est.p
                );
            }
        }
        assert_eq!(flip_prob_montecarlo(FlipScheme::MsbOnly, 0.0, 10, 1).unwrap().p, 0.0);
        assert!(flip_prob_montecarlo(FlipScheme::MsbOnly, 1.0, 0, 1).is_err());
    }

    #[test]
    fn montecarlo_deterministic() {
        let a = flip_prob_montecarlo(FlipScheme::DualMsb, 40.0, 200_000, 3).unwrap();
        let b = flip_prob_montecarlo(FlipScheme::DualMsb, 40.0, 200_000, 3).unwrap();
        assert_eq!(a, b);
        let msb = flip_prob_montecarlo(FlipScheme::MsbOnly, 40.0, 1_000_000, 3).unwrap();
        let dual = flip_prob_montecarlo(FlipScheme::DualMsb, 40.0, 1_000_000, 3).unwrap();
        assert!(dual.p < msb.p);
    }

    proptest! {
        #[test]
        fn ber_is_a_metric(bits in proptest::collection::vec(any::<(bool, bool, bool)>(), 1..200)) {
            let a: Vec<bool> = bits.iter().map(|t| t.0).collect();
            let b: Vec<bool> = bits.iter().map(|t| t.1).collect();
            let c: Vec<bool> = bits.iter().map(|t| t.2).collect();
            prop_assert_eq!(ber(&a, &b).unwrap(), ber(&b, &a).unwrap());
            prop_assert!(ber(&a, &c).unwrap() <= ber(&a, &b).unwrap() + ber(&b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn entropy_permutation_invariant(data in proptest::collection::vec(any::<u8>(), 64), seed: u64) {
            let img = GrayImage::new(8, 8, data.clone()).unwrap();
            let mut shuffled = data;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let other = GrayImage::new(8, 8, shuffled).unwrap();
            prop_assert!((entropy(&img) - entropy(&other)).abs() < 1e-12);
        }
    }
}
