// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment runner: marks every corpus image once, then runs each
//! (image, attack point, trial seed) job on a worker pool.
//!
//! Rows come out in canonical order (image, then parameters in grid order,
//! then seed) whatever order the jobs finish in, followed by one aggregate
//! row per attack point under the image name [`AGGREGATE_IMAGE`].

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use dmsb_core::attack::AttackSpec;
use dmsb_core::metrics::{adjacent_correlation, adjacent_correlation_full, ber, entropy, npcr, Direction};
use dmsb_core::synth::corpus;
use dmsb_core::{pgm_load, Codec, Error, GrayImage, KeyBundle};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};

/// Image column value of aggregate rows.
pub const AGGREGATE_IMAGE: &str = "ALL";

/// BER charged to a trial whose extraction failed outright.
pub const FAILED_BER: f64 = 0.5;

/// One CSV record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub image: String,
    pub experiment: String,
    pub params: String,
    /// Empty where no watermark is involved (statistics of unmarked stages).
    #[serde(rename = "BER")]
    pub ber: Option<f64>,
    pub extract_status: String,
    pub elapsed_ms: u64,
}

impl Row {
    pub fn is_aggregate(&self) -> bool {
        self.image == AGGREGATE_IMAGE
    }
}

/// An image left out of the results, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Skip {
    pub image: String,
    pub reason: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub skipped: Vec<Skip>,
}

struct Source {
    name: String,
    index: u64,
    image: GrayImage,
}

fn load_corpus(config: &ExperimentConfig) -> anyhow::Result<(Vec<Source>, Vec<Skip>)> {
    let Some(dir) = &config.corpus_dir else {
        let n = config.synthetic_size;
        info!(
            "synthetic corpus: {} images of {n}x{n}, seed {}",
            config.max_images, config.corpus_seed
        );
        let sources = corpus(config.max_images, n, n, config.corpus_seed)
            .into_iter()
            .enumerate()
            .map(|(i, image)| Source {
                name: format!("synth-{i:03}"),
                index: i as u64,
                image,
            })
            .collect();
        return Ok((sources, Vec::new()));
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")));
    paths.sort();
    let total = paths.len();
    if config.max_images > 0 && config.max_images < total {
        let mut rng = ChaCha8Rng::seed_from_u64(config.corpus_seed);
        paths.shuffle(&mut rng);
        paths.truncate(config.max_images);
        paths.sort();
        info!(
            "corpus: {} of {total} images, subset seed {}",
            paths.len(),
            config.corpus_seed
        );
    } else {
        info!("corpus: all {total} images");
    }
    let mut sources = Vec::new();
    let mut skipped = Vec::new();
    for (i, path) in paths.into_iter().enumerate() {
        let name = path
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let loaded = std::fs::read(&path)
            .map_err(|e| e.to_string())
            .and_then(|bytes| pgm_load(&bytes).map_err(|e| e.to_string()));
        match loaded {
            Ok(image) => sources.push(Source {
                name,
                index: i as u64,
                image,
            }),
            Err(detail) => skipped.push(Skip {
                image: name,
                reason: "unreadable",
                detail,
            }),
        }
    }
    Ok((sources, skipped))
}

fn payload_for(config: &ExperimentConfig, index: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.payload_seed);
    rng.set_stream(index);
    (0..config.payload_bits).map(|_| rng.random()).collect()
}

/// Attack seed of one trial, distinct per image so noise is never reused.
pub fn attack_seed(trial_seed: u64, image_index: u64) -> u64 {
    trial_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ image_index
}

struct Marked {
    encrypted: GrayImage,
    marked: GrayImage,
}

fn skip_reason(e: &Error) -> &'static str {
    match e {
        Error::Capacity { .. } => "capacity",
        Error::Incompressible { .. } => "incompressible",
        Error::Unsupported(_) | Error::Dimension(_) => "unsupported",
        _ => "embed",
    }
}

fn mark(
    codec: &Codec,
    keys: &KeyBundle,
    image: &GrayImage,
    payload: &[bool],
) -> Result<Marked, (&'static str, String)> {
    let fail = |e: Error| (skip_reason(&e), e.to_string());
    let prepared = codec.prepare(image, keys, payload.len()).map_err(fail)?;
    if prepared.header.len < payload.len() {
        return Err((
            "capacity",
            format!("capacity {} bits < payload {} bits", prepared.header.len, payload.len()),
        ));
    }
    let marked = codec.embed(&prepared.image, payload, &keys.watermark).map_err(fail)?;
    Ok(Marked {
        encrypted: prepared.image,
        marked,
    })
}

/// Extraction outcome: BER against the embedded payload and a status token.
fn score(codec: &Codec, image: &GrayImage, keys: &KeyBundle, payload: &[bool]) -> (f64, String) {
    match codec.extract(image, &keys.watermark) {
        Ok(ex) if ex.payload.len() == payload.len() => {
            let status = if ex.failed_codewords == 0 { "ok" } else { "fallback" };
            (ber(&ex.payload, payload).expect("equal lengths"), status.into())
        }
        Ok(_) => (FAILED_BER, "len_mismatch".into()),
        Err(_) => (FAILED_BER, "failed".into()),
    }
}

struct Point {
    params: String,
    attack: AttackSpec,
    /// Whether the attack draws randomness; deterministic attacks run once.
    seeded: bool,
}

fn points(config: &ExperimentConfig) -> Vec<Point> {
    let gaussian = |variance: f64| Point {
        params: format!("variance={variance}"),
        attack: AttackSpec::Gaussian { variance },
        seeded: true,
    };
    match config.kind() {
        ExperimentKind::NoiseSweep | ExperimentKind::RsHeatmap => {
            config.variances.iter().map(|&v| gaussian(v)).collect()
        }
        ExperimentKind::CropTable => config
            .crop_sizes
            .iter()
            .flat_map(|&size| {
                config.crop_positions.iter().map(move |&position| Point {
                    params: format!("size={size};position={}", position.name()),
                    attack: AttackSpec::CropPreset { size, position },
                    seeded: false,
                })
            })
            .collect(),
        ExperimentKind::CropRandomCurve => config
            .crop_ratios
            .iter()
            .map(|&ratio| Point {
                params: format!("ratio={ratio}"),
                attack: AttackSpec::CropRandom { ratio },
                seeded: true,
            })
            .collect(),
        ExperimentKind::JpegCurve => config
            .qualities
            .iter()
            .map(|&quality| Point {
                params: format!("qf={quality}"),
                attack: AttackSpec::Jpeg { quality },
                seeded: false,
            })
            .collect(),
        ExperimentKind::StatTable | ExperimentKind::Reversibility => Vec::new(),
    }
}

fn millis(start: Option<Instant>) -> u64 {
    start.map_or(0, |s| s.elapsed().as_millis() as u64)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Runs the configured experiment on a pool of `config.threads` workers.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if config.threads > 0 {
        pool = pool.num_threads(config.threads);
    }
    pool.build()?.install(|| run(config))
}

fn run(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let keys = config.keys()?;
    let (sources, skipped) = load_corpus(config)?;
    let mut outcome = Outcome {
        rows: Vec::new(),
        skipped,
    };
    match config.kind() {
        ExperimentKind::Reversibility => reversibility(config, &keys, &sources, &mut outcome)?,
        ExperimentKind::StatTable => stat_table(config, &keys, &sources, &mut outcome)?,
        _ => attack_sweep(config, &keys, &sources, &mut outcome)?,
    }
    for s in &outcome.skipped {
        warn!("skipped {}: {} ({})", s.image, s.reason, s.detail);
    }
    Ok(outcome)
}

fn attack_sweep(
    config: &ExperimentConfig,
    keys: &KeyBundle,
    sources: &[Source],
    out: &mut Outcome,
) -> anyhow::Result<()> {
    let experiment = config.kind().name();
    let rates = match config.kind() {
        ExperimentKind::RsHeatmap => config.rates.clone(),
        _ => vec![config.rate],
    };
    let codecs: Vec<Codec> = rates.iter().map(|&k| Codec::new(k)).collect::<Result<_, _>>()?;
    let points = points(config);

    // an image unusable at any rate is dropped from every cell so that all
    // aggregates average over the same images
    let marked: Vec<Result<Vec<Marked>, Skip>> = sources
        .par_iter()
        .map(|src| {
            let payload = payload_for(config, src.index);
            let per_rate = codecs
                .iter()
                .map(|codec| {
                    mark(codec, keys, &src.image, &payload).map_err(|(reason, detail)| Skip {
                        image: src.name.clone(),
                        reason,
                        detail: format!("k={}: {detail}", codec.code().k()),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            // crops that do not fit this image size disqualify it too
            for p in &points {
                let AttackSpec::CropPreset { size, position } = p.attack else {
                    continue;
                };
                if let Err(e) = position.rect(size, src.image.height(), src.image.width()) {
                    return Err(Skip {
                        image: src.name.clone(),
                        reason: "attack",
                        detail: format!("{}: {e}", p.params),
                    });
                }
            }
            Ok(per_rate)
        })
        .collect();

    struct Job<'a> {
        src: &'a Source,
        payload: Vec<bool>,
        codec: &'a Codec,
        marked: &'a GrayImage,
        cell: usize,
        params: String,
        attack: AttackSpec,
        seed: Option<u64>,
    }
    let mut jobs = Vec::new();
    for (src, m) in sources.iter().zip(&marked) {
        let m = match m {
            Ok(m) => m,
            Err(skip) => {
                out.skipped.push(skip.clone());
                continue;
            }
        };
        let payload = payload_for(config, src.index);
        for (r, codec) in codecs.iter().enumerate() {
            for (p, point) in points.iter().enumerate() {
                let prefix = match config.kind() {
                    ExperimentKind::RsHeatmap => format!("k={};", codec.code().k()),
                    _ => String::new(),
                };
                let seeds: Vec<Option<u64>> = if point.seeded {
                    config.trial_seeds.iter().map(|&s| Some(s)).collect()
                } else {
                    vec![None]
                };
                for seed in seeds {
                    let params = match seed {
                        Some(s) => format!("{prefix}{};seed={s}", point.params),
                        None => format!("{prefix}{}", point.params),
                    };
                    jobs.push(Job {
                        src,
                        payload: payload.clone(),
                        codec,
                        marked: &m[r].marked,
                        cell: r * points.len() + p,
                        params,
                        attack: point.attack,
                        seed,
                    });
                }
            }
        }
    }
    info!("{experiment}: {} trials", jobs.len());

    let results: Vec<(usize, Row)> = jobs
        .par_iter()
        .map(|job| -> anyhow::Result<(usize, Row)> {
            let start = config.record_timing.then(Instant::now);
            let seed = attack_seed(job.seed.unwrap_or(0), job.src.index);
            let attacked = job.attack.apply(job.marked, seed)?;
            let (ber, status) = score(job.codec, &attacked, keys, &job.payload);
            let row = Row {
                image: job.src.name.clone(),
                experiment: experiment.into(),
                params: job.params.clone(),
                ber: Some(ber),
                extract_status: status,
                elapsed_ms: millis(start),
            };
            Ok((job.cell, row))
        })
        .collect::<anyhow::Result<_>>()?;

    let cells = codecs.len() * points.len();
    let mut aggregates = Vec::with_capacity(cells);
    for cell in 0..cells {
        let (codec, point) = (&codecs[cell / points.len()], &points[cell % points.len()]);
        let rows: Vec<&Row> = results.iter().filter(|(c, _)| *c == cell).map(|(_, r)| r).collect();
        let params = match config.kind() {
            ExperimentKind::RsHeatmap => format!("k={};{}", codec.code().k(), point.params),
            _ => point.params.clone(),
        };
        let failed = rows
            .iter()
            .filter(|r| r.extract_status == "failed" || r.extract_status == "len_mismatch")
            .count();
        aggregates.push(Row {
            image: AGGREGATE_IMAGE.into(),
            experiment: experiment.into(),
            params,
            ber: Some(mean(rows.iter().filter_map(|r| r.ber))),
            extract_status: format!("trials={};failed={failed}", rows.len()),
            elapsed_ms: rows.iter().map(|r| r.elapsed_ms).sum(),
        });
    }
    out.rows.extend(results.into_iter().map(|(_, r)| r));
    out.rows.extend(aggregates);
    Ok(())
}

fn reversibility(
    config: &ExperimentConfig,
    keys: &KeyBundle,
    sources: &[Source],
    out: &mut Outcome,
) -> anyhow::Result<()> {
    let codec = Codec::new(config.rate)?;
    let params = format!("payload_bits={}", config.payload_bits);
    let results: Vec<Result<Row, Skip>> = sources
        .par_iter()
        .map(|src| {
            let start = config.record_timing.then(Instant::now);
            let payload = payload_for(config, src.index);
            let m = mark(&codec, keys, &src.image, &payload).map_err(|(reason, detail)| Skip {
                image: src.name.clone(),
                reason,
                detail,
            })?;
            let status = match codec.restore(&m.marked, &keys.image, &keys.shuffle) {
                Ok(restored) if restored == src.image => "identical",
                Ok(_) => "differs",
                Err(_) => "restore_failed",
            };
            let (ber, _) = score(&codec, &m.marked, keys, &payload);
            Ok(Row {
                image: src.name.clone(),
                experiment: "reversibility".into(),
                params: params.clone(),
                ber: Some(ber),
                extract_status: status.into(),
                elapsed_ms: millis(start),
            })
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(skip) => out.skipped.push(skip),
        }
    }
    let identical = rows.iter().filter(|r| r.extract_status == "identical").count();
    let aggregate = Row {
        image: AGGREGATE_IMAGE.into(),
        experiment: "reversibility".into(),
        params,
        ber: Some(mean(rows.iter().filter_map(|r| r.ber))),
        extract_status: format!("identical={identical}/{}", rows.len()),
        elapsed_ms: rows.iter().map(|r| r.elapsed_ms).sum(),
    };
    out.rows.extend(rows);
    out.rows.push(aggregate);
    Ok(())
}

/// One image's statistics rows with their raw metric values.
type StatRows = Vec<(Row, [f64; 5])>;

/// Stage names of the statistics table, in row order.
pub const STAGES: [&str; 3] = ["original", "encrypted", "marked"];

/// Metric keys carried in the params column of statistics rows.
pub const STAT_METRICS: [&str; 5] = ["entropy", "corr_v", "corr_h", "corr_d", "npcr"];

fn stat_table(
    config: &ExperimentConfig,
    keys: &KeyBundle,
    sources: &[Source],
    out: &mut Outcome,
) -> anyhow::Result<()> {
    let codec = Codec::new(config.rate)?;
    let correlation = |img: &GrayImage, d: Direction| -> f64 {
        if config.correlation_samples == 0 {
            adjacent_correlation_full(img, d).value
        } else {
            adjacent_correlation(img, d, config.correlation_samples, config.correlation_seed).map_or(0.0, |c| c.value)
        }
    };
    let metrics = |img: &GrayImage, original: &GrayImage| -> [f64; 5] {
        [
            entropy(img),
            correlation(img, Direction::Vertical),
            correlation(img, Direction::Horizontal),
            correlation(img, Direction::Diagonal),
            npcr(original, img).expect("same dimensions"),
        ]
    };
    let results: Vec<Result<StatRows, Skip>> = sources
        .par_iter()
        .map(|src| {
            let start = config.record_timing.then(Instant::now);
            let payload = payload_for(config, src.index);
            let m = mark(&codec, keys, &src.image, &payload).map_err(|(reason, detail)| Skip {
                image: src.name.clone(),
                reason,
                detail,
            })?;
            let (ber, status) = score(&codec, &m.marked, keys, &payload);
            let stages = [&src.image, &m.encrypted, &m.marked];
            Ok(stages
                .iter()
                .zip(STAGES)
                .map(|(img, stage)| {
                    let values = metrics(img, &src.image);
                    let watermarked = stage == "marked";
                    let row = Row {
                        image: src.name.clone(),
                        experiment: "stat_table".into(),
                        params: stat_params(stage, &values),
                        ber: watermarked.then_some(ber),
                        extract_status: if watermarked { status.clone() } else { "n/a".into() },
                        elapsed_ms: millis(start),
                    };
                    (row, values)
                })
                .collect())
        })
        .collect();
    let mut per_image = Vec::new();
    for r in results {
        match r {
            Ok(rows) => per_image.push(rows),
            Err(skip) => out.skipped.push(skip),
        }
    }
    let mut aggregates = Vec::new();
    for (s, stage) in STAGES.iter().enumerate() {
        let stage_rows: Vec<&(Row, [f64; 5])> = per_image.iter().map(|rows| &rows[s]).collect();
        let mut means = [0.0; 5];
        for (m, slot) in means.iter_mut().enumerate() {
            *slot = mean(stage_rows.iter().map(|(_, v)| v[m]));
        }
        let bers: Vec<f64> = stage_rows.iter().filter_map(|(r, _)| r.ber).collect();
        aggregates.push(Row {
            image: AGGREGATE_IMAGE.into(),
            experiment: "stat_table".into(),
            params: stat_params(stage, &means),
            ber: (!bers.is_empty()).then(|| mean(bers.into_iter())),
            extract_status: format!("images={}", stage_rows.len()),
            elapsed_ms: stage_rows.iter().map(|(r, _)| r.elapsed_ms).sum(),
        });
    }
    out.rows.extend(per_image.into_iter().flatten().map(|(r, _)| r));
    out.rows.extend(aggregates);
    Ok(())
}

fn stat_params(stage: &str, values: &[f64; 5]) -> String {
    let mut s = format!("stage={stage}");
    for (name, v) in STAT_METRICS.iter().zip(values) {
        s.push_str(&format!(";{name}={v:.6}"));
    }
    s
}

/// Splits a `key=value;key=value` params field.
pub fn parse_params(params: &str) -> Vec<(&str, &str)> {
    params
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|kv| kv.split_once('=').unwrap_or((kv, "")))
        .collect()
}

pub fn write_rows<W: Write>(writer: W, rows: &[Row]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(["image", "experiment", "params", "BER", "extract_status", "elapsed_ms"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(reader: R) -> anyhow::Result<Vec<Row>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    anyhow::ensure!(
        headers
            .iter()
            .eq(["image", "experiment", "params", "BER", "extract_status", "elapsed_ms"]),
        "unexpected CSV header {:?}",
        headers.iter().collect::<Vec<_>>()
    );
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.with_context(|| format!("CSV record {}", i + 1)))
        .collect()
}

/// Path of the skip log written beside `output`.
pub fn skip_log_path(output: &Path) -> PathBuf {
    output.with_extension("skipped.tsv")
}

pub fn write_skip_log<W: Write>(mut w: W, skipped: &[Skip]) -> std::io::Result<()> {
    writeln!(w, "image\treason\tdetail")?;
    for s in skipped {
        writeln!(w, "{}\t{}\t{}", s.image, s.reason, s.detail.replace(['\t', '\n'], " "))?;
    }
    Ok(())
}

/// Writes the CSV and its skip log; returns both paths.
pub fn write_outcome(output: &Path, outcome: &Outcome) -> anyhow::Result<(PathBuf, PathBuf)> {
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(output).with_context(|| format!("creating {}", output.display()))?;
    write_rows(std::io::BufWriter::new(file), &outcome.rows)?;
    let log = skip_log_path(output);
    let file = std::fs::File::create(&log).with_context(|| format!("creating {}", log.display()))?;
    let mut w = std::io::BufWriter::new(file);
    write_skip_log(&mut w, &outcome.skipped)?;
    w.flush()?;
    Ok((output.to_path_buf(), log))
}
