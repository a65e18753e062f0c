// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dmsb_cli::config::ExperimentConfig;
use dmsb_cli::experiment::{read_rows, run_experiment, write_outcome};
use dmsb_cli::summary::summarize;
use dmsb_cli::{exit, exit_code};
use dmsb_core::attack::{AttackSpec, CropPosition, Rect};
use dmsb_core::bits::{bits_to_hex, hex_to_bits};
use dmsb_core::metrics::ber;
use dmsb_core::{pgm_load, pgm_save, Codec, Error, GrayImage, Key128, KeyBundle};

/// Robust reversible watermarking in encrypted grayscale images.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress, encrypt and lay out an image for watermarking (content owner).
    Prepare(Prepare),
    /// Embed a payload into a prepared image (data hider).
    Embed(Embed),
    /// Extract the payload from a possibly attacked image (receiver).
    Extract(Extract),
    /// Recover the original image from an unattacked marked image (content owner).
    Restore(Restore),
    /// Apply one attack to an image.
    Attack(Attack),
    /// Run an experiment described by a config file and write a CSV.
    Experiment(Experiment),
    /// Print tables and write plot data from an experiment CSV.
    Summary(Summary),
}

/// A key: 32 hex characters, or `@FILE` to read them from a file.
fn parse_key(arg: &str) -> Result<Key128, String> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?,
        None => arg.to_string(),
    };
    Key128::from_hex(&text).map_err(|e| e.to_string())
}

#[derive(Args)]
struct Rate {
    /// Reed-Solomon message symbols per 31-symbol codeword; all parties must agree.
    #[arg(long, default_value_t = 3)]
    rate: usize,
}

impl Rate {
    fn codec(&self) -> anyhow::Result<Codec> {
        Ok(Codec::new(self.rate)?)
    }
}

#[derive(Args)]
struct Prepare {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_key)]
    key_image: Key128,
    #[arg(long, value_parser = parse_key)]
    key_shuffle: Key128,
    /// Watermark capacity to reserve, in bits; clamped to what the image allows.
    #[arg(long, default_value_t = 128)]
    payload_bits: usize,
    #[command(flatten)]
    rate: Rate,
}

#[derive(Args)]
struct Embed {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Payload bits written as hex digits, four bits per digit.
    #[arg(long)]
    payload_file: PathBuf,
    #[arg(long, value_parser = parse_key)]
    key_watermark: Key128,
    #[command(flatten)]
    rate: Rate,
}

#[derive(Args)]
struct Extract {
    input: PathBuf,
    #[arg(long, value_parser = parse_key)]
    key_watermark: Key128,
    /// Write the extracted payload here as hex.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reference payload; when given the bit-error rate is printed.
    #[arg(long)]
    payload_file: Option<PathBuf>,
    #[command(flatten)]
    rate: Rate,
}

#[derive(Args)]
struct Restore {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_key)]
    key_image: Key128,
    #[arg(long, value_parser = parse_key)]
    key_shuffle: Key128,
    #[command(flatten)]
    rate: Rate,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct AttackKind {
    /// Additive Gaussian noise of this variance on the [0, 1] intensity scale.
    #[arg(long)]
    gaussian: Option<f64>,
    /// JPEG round trip at this quality factor.
    #[arg(long)]
    jpeg: Option<u8>,
    /// Zero the rectangle X,Y,W,H (X is the column).
    #[arg(long, value_parser = parse_rect)]
    crop: Option<Rect>,
    /// Zero a SIZE square at POSITION (top_left, middle or top_right), as SIZE:POSITION.
    #[arg(long, value_parser = parse_preset)]
    crop_preset: Option<(usize, CropPosition)>,
    /// Zero a random rectangle covering this fraction of the image.
    #[arg(long)]
    crop_random: Option<f64>,
}

#[derive(Args)]
struct Attack {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    kind: AttackKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_rect(arg: &str) -> Result<Rect, String> {
    let v: Vec<usize> = arg
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad number {s:?}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] => Ok(Rect { x, y, w, h }),
        _ => Err("expected X,Y,W,H".into()),
    }
}

fn parse_preset(arg: &str) -> Result<(usize, CropPosition), String> {
    let (size, pos) = arg.split_once(':').ok_or("expected SIZE:POSITION")?;
    let size = size.parse().map_err(|_| format!("bad size {size:?}"))?;
    let pos = CropPosition::ALL
        .into_iter()
        .find(|p| p.name() == pos)
        .ok_or_else(|| format!("unknown position {pos:?}"))?;
    Ok((size, pos))
}

#[derive(Args)]
struct Experiment {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `max_images`.
    #[arg(long)]
    max_images: Option<usize>,
}

#[derive(Args)]
struct Summary {
    input: PathBuf,
    /// Directory for two-column plot data files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_image(path: &Path) -> anyhow::Result<GrayImage> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    pgm_load(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn write_image(path: &Path, image: &GrayImage) -> anyhow::Result<()> {
    std::fs::write(path, pgm_save(image)).with_context(|| format!("writing {}", path.display()))
}

fn read_payload(path: &Path) -> anyhow::Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bits = hex_to_bits(&text).with_context(|| format!("parsing {}", path.display()))?;
    if bits.is_empty() {
        bail!("{} holds no payload bits", path.display());
    }
    Ok(bits)
}

fn prepare(a: Prepare) -> anyhow::Result<()> {
    let image = read_image(&a.input)?;
    let keys = KeyBundle {
        image: a.key_image,
        shuffle: a.key_shuffle,
        // preparation never touches the watermark key
        watermark: Key128([0; 16]),
    };
    let prepared = a.rate.codec()?.prepare(&image, &keys, a.payload_bits)?;
    write_image(&a.out, &prepared.image)?;
    let h = &prepared.header;
    println!("capacity {} bits", h.len);
    println!("compressed {} bits", prepared.compressed_bits);
    println!("displaced {} bits (flag {})", h.displaced, h.flag as u8);
    Ok(())
}

fn embed(a: Embed) -> anyhow::Result<()> {
    let carrier = read_image(&a.input)?;
    let payload = read_payload(&a.payload_file)?;
    let marked = a.rate.codec()?.embed(&carrier, &payload, &a.key_watermark)?;
    write_image(&a.out, &marked)
}

fn extract(a: Extract) -> anyhow::Result<()> {
    let image = read_image(&a.input)?;
    let ex = a.rate.codec()?.extract(&image, &a.key_watermark)?;
    let hex = bits_to_hex(&ex.payload);
    println!("payload {hex}");
    println!("length {} bits", ex.len);
    println!("failed codewords {}", ex.failed_codewords);
    println!("trusted fraction {:.4}", ex.trusted_fraction);
    if let Some(path) = &a.out {
        std::fs::write(path, format!("{hex}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.payload_file {
        let reference = read_payload(path)?;
        if reference.len() < ex.payload.len() || reference[ex.payload.len()..].iter().any(|&b| b) {
            bail!(
                "reference payload has {} bits, extracted {}",
                reference.len(),
                ex.payload.len()
            );
        }
        // hex pads the reference to whole digits with zero bits
        println!("BER {}", ber(&ex.payload, &reference[..ex.payload.len()])?);
    }
    Ok(())
}

fn restore(a: Restore) -> anyhow::Result<()> {
    let marked = read_image(&a.input)?;
    let original = a.rate.codec()?.restore(&marked, &a.key_image, &a.key_shuffle)?;
    write_image(&a.out, &original)
}

fn attack(a: Attack) -> anyhow::Result<()> {
    let image = read_image(&a.input)?;
    let k = a.kind;
    let spec = if let Some(variance) = k.gaussian {
        AttackSpec::Gaussian { variance }
    } else if let Some(quality) = k.jpeg {
        AttackSpec::Jpeg { quality }
    } else if let Some(rect) = k.crop {
        AttackSpec::CropFixed { rect }
    } else if let Some((size, position)) = k.crop_preset {
        AttackSpec::CropPreset { size, position }
    } else if let Some(ratio) = k.crop_random {
        let (out, rect) = dmsb_core::attack::crop_random(&image, ratio, a.seed)?;
        println!("cropped {},{},{},{}", rect.x, rect.y, rect.w, rect.h);
        return write_image(&a.out, &out);
    } else {
        unreachable!("clap requires one attack")
    };
    write_image(&a.out, &spec.apply(&image, a.seed)?)
}

fn experiment(a: Experiment) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(out) = a.out {
        config.output = out;
    }
    if let Some(n) = a.max_images {
        config.max_images = n;
    }
    let outcome = run_experiment(&config)?;
    let (csv, log) = write_outcome(&config.output, &outcome)?;
    println!("{} rows -> {}", outcome.rows.len(), csv.display());
    println!("{} skipped -> {}", outcome.skipped.len(), log.display());
    Ok(())
}

fn summary(a: Summary) -> anyhow::Result<()> {
    let file = std::fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let rows = read_rows(std::io::BufReader::new(file)).with_context(|| format!("reading {}", a.input.display()))?;
    let s = summarize(&rows)?;
    std::io::stdout().write_all(s.text.as_bytes())?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        for (name, data) in &s.plots {
            std::fs::write(dir.join(name), data)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Embed(a) => embed(a),
        Command::Extract(a) => extract(a),
        Command::Restore(a) => restore(a),
        Command::Attack(a) => attack(a),
        Command::Experiment(a) => experiment(a),
        Command::Summary(a) => summary(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::Capacity { max_payload, .. }) = e.chain().find_map(|c| c.downcast_ref::<Error>()) {
                eprintln!("L_max = {max_payload}");
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
