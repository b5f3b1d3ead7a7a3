//! Generates matplotlib scripts that chart sweep CSVs: information against
//! budget, one panel per outer parameter and one line per inner parameter.

use std::collections::BTreeSet;
use std::path::Path;

use crate::config::SweepKind;
use crate::error::{CliError, Result};

struct Layout {
    /// Columns that must be present.
    required: &'static [&'static str],
    panel: &'static [&'static str],
    series: &'static [&'static str],
    x: &'static str,
    x_label: &'static str,
}

fn layout(kind: SweepKind) -> Layout {
    match kind {
        SweepKind::Scalar => Layout {
            required: &["a2", "sigma2", "D", "mi_nats"],
            panel: &["a2"],
            series: &["sigma2"],
            x: "D",
            x_label: "distortion D",
        },
        SweepKind::Projection => Layout {
            required: &["m", "alpha", "d_fraction", "mi_nats"],
            panel: &["m"],
            series: &["alpha"],
            x: "d_fraction",
            x_label: "D / sum sigma_i^2",
        },
        SweepKind::Bsc => Layout {
            required: &["a", "b", "c", "d", "eps", "mi_nats"],
            panel: &["a", "b", "c", "d"],
            series: &[],
            x: "eps",
            x_label: "expected flip cost eps",
        },
    }
}

fn py_list(items: &[&str]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("{s:?}")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Builds the script for a CSV produced by a `kind` sweep.
pub fn emit_plot_script(csv_path: &Path, kind: SweepKind) -> Result<String> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(csv_path, io),
        other => CliError::Config(format!("{}: {other:?}", csv_path.display())),
    })?;
    let header = reader.headers().map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?.clone();
    if header.is_empty() {
        return Err(CliError::Config(format!("{}: empty CSV", csv_path.display())));
    }
    let lay = layout(kind);
    let missing: Vec<&str> = lay.required.iter().copied().filter(|c| !header.iter().any(|h| h == *c)).collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!("{}: missing column(s) {}", csv_path.display(), missing.join(", "))));
    }
    let idx: Vec<usize> =
        lay.panel.iter().map(|c| header.iter().position(|h| h == *c).expect("checked above")).collect();
    let mut panels = BTreeSet::new();
    let mut order = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
        let key: Vec<String> = idx.iter().map(|&i| rec[i].to_string()).collect();
        if panels.insert(key.clone()) {
            order.push(key.join("-"));
        }
    }
    if order.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", csv_path.display())));
    }
    let cols = (order.len() as f64).sqrt().ceil() as usize;
    let rows = order.len().div_ceil(cols);
    let panel_keys: Vec<&str> = order.iter().map(String::as_str).collect();
    let title = format!("{} = ", lay.panel.join("-"));
    Ok(format!(
        r#"#!/usr/bin/env python3
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

CSV = {csv:?}
PANEL_COLUMNS = {panel_cols}
SERIES_COLUMNS = {series_cols}
PANELS = {panels}
X = {x:?}

def main(out=None):
    data = defaultdict(lambda: defaultdict(list))
    with open(CSV, newline="") as fh:
        for row in csv.DictReader(fh):
            panel = "-".join(row[c] for c in PANEL_COLUMNS)
            series = ", ".join(f"{{c}}={{row[c]}}" for c in SERIES_COLUMNS) or "MI"
            data[panel][series].append((float(row[X]), float(row["mi_nats"])))
    fig, axes = plt.subplots({rows}, {cols}, figsize=({w}, {h}), squeeze=False)
    for ax in axes.flat[len(PANELS):]:
        ax.set_visible(False)
    for ax, panel in zip(axes.flat, PANELS):
        for series, points in data[panel].items():
            groups = defaultdict(list)
            for x, y in points:
                groups[x].append(y)
            xs = sorted(groups)
            ys = [sorted(groups[x])[len(groups[x]) // 2] for x in xs]
            ax.plot(xs, ys, marker="o", markersize=3, label=series)
        ax.set_title("{title}" + panel)
        ax.set_xlabel({x_label:?})
        ax.set_ylabel("mutual information (nats)")
        ax.legend(fontsize="x-small")
    fig.tight_layout()
    if out:
        fig.savefig(out)
    else:
        plt.show()

if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
"#,
        csv = csv_path.display().to_string(),
        panel_cols = py_list(lay.panel),
        series_cols = py_list(lay.series),
        panels = py_list(&panel_keys),
        x = lay.x,
        rows = rows,
        cols = cols,
        w = 4 * cols,
        h = 3 * rows,
        title = title,
        x_label = lay.x_label,
    ))
}
