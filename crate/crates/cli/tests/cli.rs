// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dmsb_cli::config::ExperimentConfig;
use dmsb_cli::exit;
use dmsb_cli::experiment::{read_rows, run_experiment, skip_log_path, Row};
use dmsb_core::synth::{synth_image, SynthParams};
use dmsb_core::{pgm_save, GrayImage};
use tempfile::TempDir;

const KI: &str = "000102030405060708090a0b0c0d0e0f";
const KS: &str = "101112131415161718191a1b1c1d1e1f";
const KW: &str = "202122232425262728292a2b2c2d2e2f";
const PAYLOAD: &str = "0123456789abcdef0123456789abcdef\n";

fn dmsb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmsb"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_pgm(dir: &Path, name: &str, image: &GrayImage) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, pgm_save(image)).unwrap();
    path
}

fn sample(side: usize, seed: u64) -> GrayImage {
    synth_image(side, side, seed, SynthParams::default())
}

/// Prepares and embeds `PAYLOAD` into a 128x128 image; returns (dir, original, marked, payload file).
fn marked_fixture() -> (TempDir, PathBuf, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let original = write_pgm(dir.path(), "orig.pgm", &sample(128, 3));
    let enc = dir.path().join("enc.pgm");
    let marked = dir.path().join("marked.pgm");
    let payload = dir.path().join("payload.hex");
    std::fs::write(&payload, PAYLOAD).unwrap();
    let o = dmsb(&[
        "prepare",
        s(&original),
        "--out",
        s(&enc),
        "--key-image",
        KI,
        "--key-shuffle",
        KS,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("capacity 128 bits"), "{}", stdout(&o));
    let o = dmsb(&[
        "embed",
        s(&enc),
        "--out",
        s(&marked),
        "--payload-file",
        s(&payload),
        "--key-watermark",
        KW,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, original, marked, payload)
}

#[test]
fn prepare_embed_restore_is_byte_identical() {
    let (dir, original, marked, _) = marked_fixture();
    let restored = dir.path().join("restored.pgm");
    let o = dmsb(&[
        "restore",
        s(&marked),
        "--out",
        s(&restored),
        "--key-image",
        KI,
        "--key-shuffle",
        KS,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&restored).unwrap(), std::fs::read(&original).unwrap());
}

#[test]
fn extract_reports_zero_ber() {
    let (dir, _, marked, payload) = marked_fixture();
    let out = dir.path().join("got.hex");
    let o = dmsb(&[
        "extract",
        s(&marked),
        "--key-watermark",
        KW,
        "--payload-file",
        s(&payload),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "BER 0"), "{}", stdout(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), PAYLOAD);
}

#[test]
fn keys_from_files() {
    let (dir, _, marked, payload) = marked_fixture();
    let key = dir.path().join("wm.key");
    std::fs::write(&key, format!("{KW}\n")).unwrap();
    let arg = format!("@{}", key.display());
    let o = dmsb(&[
        "extract",
        s(&marked),
        "--key-watermark",
        &arg,
        "--payload-file",
        s(&payload),
    ]);
    assert!(stdout(&o).contains("BER 0"), "{}", stderr(&o));
    let o = dmsb(&["extract", s(&marked), "--key-watermark", "abcd"]);
    assert_eq!(o.status.code(), Some(exit::USAGE));
}

#[test]
fn over_capacity_embed_prints_limit() {
    let (dir, _, marked, _) = marked_fixture();
    let big = dir.path().join("big.hex");
    std::fs::write(&big, "f".repeat(64)).unwrap();
    let o = dmsb(&[
        "embed",
        s(&marked),
        "--out",
        s(&dir.path().join("x.pgm")),
        "--payload-file",
        s(&big),
        "--key-watermark",
        KW,
    ]);
    assert_eq!(o.status.code(), Some(exit::CAPACITY));
    // 128 bits round up to whole codewords of 15 payload bits
    assert!(stderr(&o).contains("L_max = 135"), "{}", stderr(&o));
}

#[test]
fn failure_exit_codes_are_distinct() {
    let (dir, original, marked, payload) = marked_fixture();
    let x = dir.path().join("x.pgm");
    // an image that was never prepared has no valid header
    let o = dmsb(&[
        "embed",
        s(&original),
        "--out",
        s(&x),
        "--payload-file",
        s(&payload),
        "--key-watermark",
        KW,
    ]);
    assert_eq!(o.status.code(), Some(exit::INTEGRITY), "{}", stderr(&o));
    let o = dmsb(&[
        "restore",
        s(&original),
        "--out",
        s(&x),
        "--key-image",
        KI,
        "--key-shuffle",
        KS,
    ]);
    assert_eq!(o.status.code(), Some(exit::RESTORE_FAILURE), "{}", stderr(&o));
    let blank = dir.path().join("blank.pgm");
    let o = dmsb(&["attack", s(&marked), "--out", s(&blank), "--crop", "0,0,128,128"]);
    assert!(o.status.success());
    let o = dmsb(&["extract", s(&blank), "--key-watermark", KW]);
    assert_eq!(o.status.code(), Some(exit::EXTRACT_FAILURE), "{}", stderr(&o));
    let o = dmsb(&[
        "restore",
        s(&dir.path().join("missing.pgm")),
        "--out",
        s(&x),
        "--key-image",
        KI,
        "--key-shuffle",
        KS,
    ]);
    assert_eq!(o.status.code(), Some(exit::OTHER));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn attacks_are_seeded() {
    let (dir, _, marked, _) = marked_fixture();
    let run = |name: &str, args: &[&str]| {
        let out = dir.path().join(name);
        let mut a = vec!["attack", s(&marked), "--out", s(&out)];
        a.extend_from_slice(args);
        let o = dmsb(&a);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(&out).unwrap(), stdout(&o))
    };
    assert_eq!(
        run("a.pgm", &["--gaussian", "0.01", "--seed", "5"]),
        run("b.pgm", &["--gaussian", "0.01", "--seed", "5"])
    );
    assert_ne!(
        run("a.pgm", &["--gaussian", "0.01", "--seed", "5"]).0,
        run("b.pgm", &["--gaussian", "0.01", "--seed", "6"]).0
    );
    let (_, out) = run("c.pgm", &["--crop-random", "0.1", "--seed", "2"]);
    assert!(out.starts_with("cropped "));
    run("d.pgm", &["--crop-preset", "64:middle"]);
    run("e.pgm", &["--jpeg", "20"]);
    let o = dmsb(&[
        "attack",
        s(&marked),
        "--out",
        "x.pgm",
        "--jpeg",
        "20",
        "--gaussian",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(exit::USAGE));
}

fn synthetic_config(text: &str, dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::parse(text).unwrap();
    c.output = dir.join("out.csv");
    c
}

fn aggregates(rows: &[Row]) -> Vec<&Row> {
    rows.iter().filter(|r| r.is_aggregate()).collect()
}

#[test]
fn noise_sweep_row_arithmetic() {
    let dir = TempDir::new().unwrap();
    let c = synthetic_config(
        "experiment = \"noise_sweep\"\nmax_images = 10\nsynthetic_size = 128\nvariances = [0.01, 0.02]\ntrial_seeds = [1]",
        dir.path(),
    );
    let out = run_experiment(&c).unwrap();
    assert!(out.skipped.is_empty(), "{:?}", out.skipped);
    assert_eq!(out.rows.len(), 22);
    let agg = aggregates(&out.rows);
    assert_eq!(agg.len(), 2);
    assert_eq!(agg[0].params, "variance=0.01");
    assert_eq!(agg[0].extract_status, "trials=10;failed=0");
    // canonical order: image, then grid point, then seed
    assert_eq!(out.rows[0].image, "synth-000");
    assert_eq!(out.rows[1].params, "variance=0.02;seed=1");
    assert_eq!(out.rows[2].image, "synth-001");
    assert!(out.rows.iter().all(|r| r.elapsed_ms == 0));
}

#[test]
fn crop_table_aggregates_and_summary_shape() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("crop.toml");
    std::fs::write(
        &config,
        "experiment = \"crop_table\"\nmax_images = 2\nsynthetic_size = 256\noutput = \"crop.csv\"\n",
    )
    .unwrap();
    let o = dmsb(&["experiment", "--config", s(&config)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = dir.path().join("crop.csv");
    let rows = read_rows(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(aggregates(&rows).len(), 9);
    assert_eq!(rows.len(), 2 * 9 + 9);
    let plots = dir.path().join("plots");
    let o = dmsb(&["summary", s(&csv), "--out", s(&plots)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[1].split_whitespace().collect::<Vec<_>>(),
        ["size", "top_left", "middle", "top_right", "average"]
    );
    for line in &lines[2..] {
        // size label plus three positions and the average
        assert_eq!(line.split_whitespace().count(), 5, "{line}");
    }
    assert_eq!(lines.len(), 5);
    for pos in ["top_left", "middle", "top_right"] {
        let data = std::fs::read_to_string(plots.join(format!("crop_table_{pos}.dat"))).unwrap();
        assert!(data.lines().skip(1).all(|l| l.split_whitespace().count() == 2));
    }
}

#[test]
fn rs_heatmap_covers_the_grid() {
    let dir = TempDir::new().unwrap();
    let c = synthetic_config(
        "experiment = \"rs_heatmap\"\nmax_images = 1\nsynthetic_size = 128\ntrial_seeds = [1]",
        dir.path(),
    );
    let out = run_experiment(&c).unwrap();
    let agg = aggregates(&out.rows);
    assert_eq!(agg.len(), 150);
    assert_eq!(agg[0].params, "k=1;variance=0.01");
    assert_eq!(agg[149].params, "k=29;variance=0.1");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(
        &config,
        "experiment = \"crop_random_curve\"\nmax_images = 3\nsynthetic_size = 128\ncrop_ratios = [0.1, 0.3]\nthreads = 3\n",
    )
    .unwrap();
    let run = |name: &str, threads: &str| {
        let text = std::fs::read_to_string(&config)
            .unwrap()
            .replace("threads = 3", threads);
        std::fs::write(&config, text).unwrap();
        let out = dir.path().join(name);
        let o = dmsb(&["experiment", "--config", s(&config), "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "threads = 3");
    let b = run("b.csv", "threads = 1");
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn every_corpus_image_is_reported_or_skipped() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    write_pgm(&corpus, "a.pgm", &sample(96, 1));
    write_pgm(&corpus, "b.pgm", &sample(96, 2));
    write_pgm(&corpus, "tiny.pgm", &sample(8, 3));
    std::fs::write(corpus.join("broken.pgm"), b"P5\n4 4\n255\n").unwrap();
    std::fs::write(corpus.join("notes.txt"), b"not an image").unwrap();
    let config = dir.path().join("r.toml");
    std::fs::write(
        &config,
        "experiment = \"reversibility\"\ncorpus_dir = \"corpus\"\nmax_images = 0\noutput = \"r.csv\"\n",
    )
    .unwrap();
    let o = dmsb(&["experiment", "--config", s(&config)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = dir.path().join("r.csv");
    let rows = read_rows(std::fs::File::open(&csv).unwrap()).unwrap();
    let log = std::fs::read_to_string(skip_log_path(&csv)).unwrap();
    let skipped: Vec<(&str, &str)> = log
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split('\t');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    let mut seen: Vec<&str> = rows
        .iter()
        .filter(|r| !r.is_aggregate())
        .map(|r| r.image.as_str())
        .collect();
    seen.extend(skipped.iter().map(|(name, _)| *name));
    seen.sort_unstable();
    assert_eq!(seen, ["a.pgm", "b.pgm", "broken.pgm", "tiny.pgm"]);
    assert!(skipped.contains(&("broken.pgm", "unreadable")));

    let o = dmsb(&["summary", s(&csv)]);
    assert!(stdout(&o).contains("identical: 2/2"), "{}", stdout(&o));
}

#[test]
fn capacity_shortfall_is_logged() {
    let dir = TempDir::new().unwrap();
    let mut c = synthetic_config(
        "experiment = \"reversibility\"\nmax_images = 2\nsynthetic_size = 64\npayload_bits = 4000",
        dir.path(),
    );
    c.threads = 1;
    let out = run_experiment(&c).unwrap();
    assert_eq!(out.skipped.len(), 2);
    assert!(out.skipped.iter().all(|s| s.reason == "capacity"), "{:?}", out.skipped);
    assert_eq!(aggregates(&out.rows)[0].extract_status, "identical=0/0");
}

#[test]
fn stat_table_magnitudes() {
    let dir = TempDir::new().unwrap();
    let c = synthetic_config(
        "experiment = \"stat_table\"\nmax_images = 2\nsynthetic_size = 256\ncorrelation_samples = 0",
        dir.path(),
    );
    let out = run_experiment(&c).unwrap();
    let agg = aggregates(&out.rows);
    assert_eq!(agg.len(), 3);
    let metric = |row: &Row, key: &str| -> f64 {
        dmsb_cli::experiment::parse_params(&row.params)
            .into_iter()
            .find(|(k, _)| *k == key)
            .unwrap()
            .1
            .parse()
            .unwrap()
    };
    for row in &agg[1..] {
        assert!(metric(row, "entropy") > 7.99, "{}", row.params);
        assert!(metric(row, "corr_h").abs() < 0.02, "{}", row.params);
        assert!((0.99..0.999).contains(&metric(row, "npcr")), "{}", row.params);
    }
    assert_eq!(agg[0].ber, None);
    assert_eq!(agg[2].ber, Some(0.0));
}

#[test]
fn summary_edge_cases() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "image,experiment,params,BER,extract_status,elapsed_ms\n").unwrap();
    let o = dmsb(&["summary", s(&empty)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "image,experiment,params,BER,extract_status,elapsed_ms\na,noise_sweep,x,oops,ok,0\n",
    )
    .unwrap();
    let o = dmsb(&["summary", s(&bad)]);
    assert_eq!(o.status.code(), Some(exit::OTHER));
}
