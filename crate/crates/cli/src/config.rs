// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration: a flat TOML file of top-level keys.
//!
//! Every key is optional except `experiment`. Unknown keys are rejected so a
//! typo never silently falls back to a default. See the README for the full
//! schema.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use dmsb_core::attack::CropPosition;
use dmsb_core::{Key128, KeyBundle};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NoiseSweep,
    RsHeatmap,
    CropTable,
    CropRandomCurve,
    JpegCurve,
    StatTable,
    Reversibility,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::NoiseSweep => "noise_sweep",
            ExperimentKind::RsHeatmap => "rs_heatmap",
            ExperimentKind::CropTable => "crop_table",
            ExperimentKind::CropRandomCurve => "crop_random_curve",
            ExperimentKind::JpegCurve => "jpeg_curve",
            ExperimentKind::StatTable => "stat_table",
            ExperimentKind::Reversibility => "reversibility",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    /// Directory of `.pgm` files. Without it a synthetic corpus is generated.
    pub corpus_dir: Option<PathBuf>,
    /// Images drawn from the corpus; 0 takes all of them.
    pub max_images: usize,
    /// Seeds both the subset drawn from `corpus_dir` and the synthetic corpus.
    pub corpus_seed: u64,
    /// Side of synthetic images.
    pub synthetic_size: usize,
    pub payload_bits: usize,
    /// Seeds the per-image random payloads.
    pub payload_seed: u64,
    pub key_image: String,
    pub key_shuffle: String,
    pub key_watermark: String,
    /// Payload code rate for every experiment except `rs_heatmap`.
    pub rate: usize,
    pub trial_seeds: Vec<u64>,
    pub variances: Vec<f64>,
    pub rates: Vec<usize>,
    pub qualities: Vec<u8>,
    pub crop_sizes: Vec<usize>,
    pub crop_positions: Vec<CropPosition>,
    pub crop_ratios: Vec<f64>,
    /// Pixel pairs per correlation estimate; 0 uses every adjacent pair.
    pub correlation_samples: usize,
    pub correlation_seed: u64,
    pub output: PathBuf,
    /// Fill `elapsed_ms`; off by default so reruns give identical files.
    pub record_timing: bool,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            corpus_dir: None,
            max_images: 10,
            corpus_seed: 1,
            synthetic_size: 512,
            payload_bits: 128,
            payload_seed: 1,
            key_image: "00000000000000000000000000000001".into(),
            key_shuffle: "00000000000000000000000000000002".into(),
            key_watermark: "00000000000000000000000000000003".into(),
            rate: 3,
            trial_seeds: vec![1, 2, 3],
            variances: vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1],
            rates: (1..=29).step_by(2).collect(),
            qualities: vec![20, 30, 40, 50, 60, 70, 80, 90, 100],
            crop_sizes: vec![64, 128, 256],
            crop_positions: CropPosition::ALL.to_vec(),
            crop_ratios: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
            correlation_samples: 10_000,
            correlation_seed: 1,
            output: "results.csv".into(),
            record_timing: false,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; a relative `corpus_dir` or `output` is taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(dir) = &config.corpus_dir {
            config.corpus_dir = Some(base.join(dir));
        }
        config.output = base.join(&config.output);
        Ok(config)
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.expect("validated")
    }

    pub fn keys(&self) -> anyhow::Result<KeyBundle> {
        let parse = |name: &str, hex: &str| Key128::from_hex(hex).with_context(|| name.to_string());
        Ok(KeyBundle {
            image: parse("key_image", &self.key_image)?,
            shuffle: parse("key_shuffle", &self.key_shuffle)?,
            watermark: parse("key_watermark", &self.key_watermark)?,
        })
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let Some(kind) = self.experiment else {
            bail!("config must name an experiment");
        };
        self.keys()?;
        ensure!(self.payload_bits > 0, "payload_bits must be positive");
        ensure!(
            self.corpus_dir.is_some() || self.max_images > 0,
            "a synthetic corpus needs max_images > 0"
        );
        ensure!((1..=30).contains(&self.rate), "rate must lie in 1..=30");
        let seeded = matches!(
            kind,
            ExperimentKind::NoiseSweep | ExperimentKind::RsHeatmap | ExperimentKind::CropRandomCurve
        );
        if seeded {
            ensure!(!self.trial_seeds.is_empty(), "trial_seeds must be nonempty");
        }
        match kind {
            ExperimentKind::NoiseSweep => self.check_variances()?,
            ExperimentKind::RsHeatmap => {
                self.check_variances()?;
                ensure!(!self.rates.is_empty(), "rates must be nonempty");
                ensure!(
                    self.rates.iter().all(|k| (1..=30).contains(k)),
                    "rates must lie in 1..=30"
                );
            }
            ExperimentKind::CropTable => {
                ensure!(!self.crop_sizes.is_empty(), "crop_sizes must be nonempty");
                ensure!(!self.crop_positions.is_empty(), "crop_positions must be nonempty");
            }
            ExperimentKind::CropRandomCurve => {
                ensure!(!self.crop_ratios.is_empty(), "crop_ratios must be nonempty");
                ensure!(
                    self.crop_ratios.iter().all(|r| *r > 0.0 && *r < 1.0),
                    "crop_ratios must lie in (0, 1)"
                );
            }
            ExperimentKind::JpegCurve => {
                ensure!(!self.qualities.is_empty(), "qualities must be nonempty");
                ensure!(
                    self.qualities.iter().all(|q| (1..=100).contains(q)),
                    "qualities must lie in 1..=100"
                );
            }
            ExperimentKind::StatTable | ExperimentKind::Reversibility => {}
        }
        Ok(())
    }

    fn check_variances(&self) -> anyhow::Result<()> {
        ensure!(!self.variances.is_empty(), "variances must be nonempty");
        ensure!(
            self.variances.iter().all(|v| v.is_finite() && *v >= 0.0),
            "variances must be finite and non-negative"
        );
        Ok(())
    }
}
