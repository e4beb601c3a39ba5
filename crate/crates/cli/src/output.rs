//! CSV and plotting-script emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tensorid::experiments::NmseSeries;

/// CSV text with header `n,<name>_nmse_db,...` and one row per sample.
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so the file round-trips exactly.
pub fn csv_text(names: &[&str], series: &[NmseSeries]) -> Result<String> {
    if names.len() != series.len() || series.is_empty() {
        bail!("need one name per NMSE series and at least one series");
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        bail!("all NMSE series must have the same length");
    }
    let mut out = String::from("n");
    for name in names {
        write!(out, ",{name}_nmse_db")?;
    }
    out.push('\n');
    for i in 0..n {
        write!(out, "{}", i + 1)?;
        for s in series {
            write!(out, ",{}", s.db[i])?;
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(path: &Path, names: &[&str], series: &[NmseSeries]) -> Result<()> {
    let text = csv_text(names, series)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Parses a CSV produced by [`csv_text`] into its column names and values.
#[cfg(test)]
fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next().context("empty CSV")?;
    let mut cols = header.split(',');
    if cols.next() != Some("n") {
        bail!("first column must be n");
    }
    let names: Vec<String> = cols
        .map(|c| c.strip_suffix("_nmse_db").map(str::to_owned).context("column names end in _nmse_db"))
        .collect::<Result<_>>()?;
    let mut values = vec![Vec::new(); names.len()];
    for (row, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let n: usize = fields.next().context("missing sample index")?.parse()?;
        if n != row + 1 {
            bail!("row {} has sample index {n}", row + 1);
        }
        for col in values.iter_mut() {
            col.push(fields.next().context("short row")?.parse()?);
        }
        if fields.next().is_some() {
            bail!("long row at sample {n}");
        }
    }
    Ok((names, values))
}

/// Path of the plotting script that accompanies `csv`.
pub fn plot_script_path(csv: &Path) -> PathBuf {
    csv.with_extension("py")
}

/// Self-contained matplotlib script drawing NMSE against the sample index.
///
/// The moving average of `smoothing` samples is applied in the script
/// (display only); `smoothing <= 1` plots the raw curves.
pub fn plot_script(csv: &Path, title: &str, smoothing: usize) -> String {
    let file = csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let png = csv.with_extension("png").file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        r#"#!/usr/bin/env python3
"""Plot NMSE curves from {file}."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
WINDOW = {smoothing}


def smooth(values, window):
    if window <= 1:
        return values
    half = window // 2
    prefix = [0.0]
    for v in values:
        prefix.append(prefix[-1] + v)
    out = []
    for i in range(len(values)):
        lo, hi = max(0, i - half), min(len(values), i + half + 1)
        out.append((prefix[hi] - prefix[lo]) / (hi - lo))
    return out


with open(os.path.join(HERE, "{file}"), newline="") as fh:
    rows = list(csv.reader(fh))
header, body = rows[0], rows[1:]
n = [int(r[0]) for r in body]
for j, name in enumerate(header[1:], start=1):
    plt.plot(n, smooth([float(r[j]) for r in body], WINDOW), label=name.replace("_nmse_db", ""))
plt.xlabel("n")
plt.ylabel("NMSE / dB")
plt.title("{title}")
plt.grid(True)
plt.legend()
plt.savefig(os.path.join(HERE, "{png}"), dpi=150)
"#
    )
}
