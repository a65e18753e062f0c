// Copyright (c) The dmsb Authors
// SPDX-License-Identifier: Apache-2.0

//! Text tables and plot data from the aggregate rows of a results CSV.

use std::fmt::Write as _;

use anyhow::{bail, Context};

use crate::experiment::{parse_params, Row, STAGES, STAT_METRICS};

/// Rendered summary: a text report plus two-column plot data files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub text: String,
    /// `(file name, contents)` pairs ready for gnuplot.
    pub plots: Vec<(String, String)>,
}

/// Left-aligned first column, right-aligned rest.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{cell:<w$}");
            } else {
                let _ = write!(s, "  {cell:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in rows {
        out += &line(r);
    }
    out
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn param<'a>(row: &'a Row, key: &str) -> anyhow::Result<&'a str> {
    parse_params(&row.params)
        .into_iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
        .with_context(|| format!("aggregate row {:?} lacks {key}", row.params))
}

fn ber(row: &Row) -> anyhow::Result<f64> {
    row.ber
        .with_context(|| format!("aggregate row {:?} has no BER", row.params))
}

fn fmt_ber(v: f64) -> String {
    format!("{v:.4}")
}

/// Keeps first-appearance order.
fn distinct<'a>(values: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn curve(out: &mut Summary, name: &str, key: &str, label: &str, rows: &[&Row]) -> anyhow::Result<()> {
    let mut cells = Vec::new();
    let mut data = format!("# {label} mean_ber\n");
    for r in rows {
        let x = param(r, key)?;
        let b = ber(r)?;
        cells.push(vec![x.to_string(), fmt_ber(b)]);
        let _ = writeln!(data, "{x} {b}");
    }
    out.text += &table(&strings(&[label, "mean BER"]), &cells);
    out.plots.push((format!("{name}.dat"), data));
    Ok(())
}

fn crop_table(out: &mut Summary, rows: &[&Row]) -> anyhow::Result<()> {
    let positions = distinct(
        rows.iter()
            .map(|r| param(r, "position"))
            .collect::<anyhow::Result<Vec<_>>>()?
            .into_iter(),
    );
    let sizes = distinct(
        rows.iter()
            .map(|r| param(r, "size"))
            .collect::<anyhow::Result<Vec<_>>>()?
            .into_iter(),
    );
    let mut header = vec!["size".to_string()];
    header.extend(positions.iter().map(|p| p.to_string()));
    header.push("average".into());
    let mut cells = Vec::new();
    for size in &sizes {
        let mut line = vec![format!("{size}x{size}")];
        let mut values = Vec::new();
        for pos in &positions {
            let found = rows
                .iter()
                .find(|r| param(r, "size").ok() == Some(size) && param(r, "position").ok() == Some(pos));
            match found {
                Some(r) => {
                    let b = ber(r)?;
                    values.push(b);
                    line.push(fmt_ber(b));
                }
                None => line.push("-".into()),
            }
        }
        line.push(fmt_ber(values.iter().sum::<f64>() / values.len() as f64));
        cells.push(line);
    }
    out.text += &table(&header, &cells);
    for pos in &positions {
        let mut data = "# size mean_ber\n".to_string();
        for r in rows.iter().filter(|r| param(r, "position").ok() == Some(pos)) {
            let _ = writeln!(data, "{} {}", param(r, "size")?, ber(r)?);
        }
        out.plots.push((format!("crop_table_{pos}.dat"), data));
    }
    Ok(())
}

fn heatmap(out: &mut Summary, rows: &[&Row]) -> anyhow::Result<()> {
    let ks = distinct(
        rows.iter()
            .map(|r| param(r, "k"))
            .collect::<anyhow::Result<Vec<_>>>()?
            .into_iter(),
    );
    let vars = distinct(
        rows.iter()
            .map(|r| param(r, "variance"))
            .collect::<anyhow::Result<Vec<_>>>()?
            .into_iter(),
    );
    let mut header = vec!["k \\ variance".to_string()];
    header.extend(vars.iter().map(|v| v.to_string()));
    let mut cells = Vec::new();
    for k in &ks {
        let mut line = vec![k.to_string()];
        let mut data = "# variance mean_ber\n".to_string();
        for v in &vars {
            let found = rows
                .iter()
                .find(|r| param(r, "k").ok() == Some(k) && param(r, "variance").ok() == Some(v));
            match found {
                Some(r) => {
                    let b = ber(r)?;
                    line.push(fmt_ber(b));
                    let _ = writeln!(data, "{v} {b}");
                }
                None => line.push("-".into()),
            }
        }
        cells.push(line);
        out.plots.push((format!("rs_heatmap_k{k}.dat"), data));
    }
    out.text += &table(&header, &cells);
    Ok(())
}

fn stat_table(out: &mut Summary, rows: &[&Row]) -> anyhow::Result<()> {
    let header = strings(&["stage", "entropy", "V", "H", "D", "NPCR"]);
    let mut cells = Vec::new();
    for stage in STAGES {
        let Some(r) = rows.iter().find(|r| param(r, "stage").ok() == Some(stage)) else {
            continue;
        };
        let mut line = vec![stage.to_string()];
        // column order V, H, D follows the metric order
        for m in STAT_METRICS {
            let v: f64 = param(r, m)?.parse().with_context(|| format!("{m} in {:?}", r.params))?;
            line.push(format!("{v:.4}"));
        }
        cells.push(line);
    }
    out.text += &table(&header, &cells);
    Ok(())
}

fn reversibility(out: &mut Summary, rows: &[&Row]) -> anyhow::Result<()> {
    for r in rows {
        let Some(counts) = r.extract_status.strip_prefix("identical=") else {
            bail!("reversibility aggregate status {:?}", r.extract_status);
        };
        let _ = writeln!(out.text, "identical: {counts}");
        if let Some(b) = r.ber {
            let _ = writeln!(out.text, "mean BER without attack: {}", fmt_ber(b));
        }
    }
    Ok(())
}

/// Builds the summary from the aggregate rows, one section per experiment in
/// order of first appearance.
pub fn summarize(rows: &[Row]) -> anyhow::Result<Summary> {
    let aggregates: Vec<&Row> = rows.iter().filter(|r| r.is_aggregate()).collect();
    let mut out = Summary::default();
    if aggregates.is_empty() {
        out.text = table(&strings(&["experiment", "params", "mean BER"]), &[]);
        return Ok(out);
    }
    let experiments = distinct(aggregates.iter().map(|r| r.experiment.as_str()));
    for (i, experiment) in experiments.iter().enumerate() {
        if i > 0 {
            out.text.push('\n');
        }
        let _ = writeln!(out.text, "[{experiment}]");
        let rows: Vec<&Row> = aggregates
            .iter()
            .copied()
            .filter(|r| r.experiment == *experiment)
            .collect();
        match *experiment {
            "noise_sweep" => curve(&mut out, experiment, "variance", "variance", &rows)?,
            "jpeg_curve" => curve(&mut out, experiment, "qf", "QF", &rows)?,
            "crop_random_curve" => curve(&mut out, experiment, "ratio", "ratio", &rows)?,
            "crop_table" => crop_table(&mut out, &rows)?,
            "rs_heatmap" => heatmap(&mut out, &rows)?,
            "stat_table" => stat_table(&mut out, &rows)?,
            "reversibility" => reversibility(&mut out, &rows)?,
            other => bail!("unknown experiment {other:?}"),
        }
    }
    Ok(out)
}
