use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ExperimentPlan, ResultTable, SweepVar};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,sweep_var,sweep_value,drop,sum_rate,avg_rate,wall_ms";

/// `printf("%.6e")`: six fraction digits, signed exponent of at least two digits.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{x:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// The result CSV. `wall_ms` is written as zero unless `record_wall_time`.
pub fn write_csv(table: &ResultTable, record_wall_time: bool) -> String {
    let mut out = String::with_capacity(64 * (table.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let wall = if record_wall_time { r.wall_ms } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            table.sweep_var,
            r.sweep_value,
            r.drop,
            format_sci(r.sum_rate),
            format_sci(r.avg_rate),
            format_sci(wall)
        );
    }
    out
}

fn write_timing(table: &ResultTable) -> String {
    let mut out = String::from("method,sweep_value,drop,wall_ms\n");
    for r in &table.rows {
        let _ = writeln!(out, "{},{},{},{}", r.method, r.sweep_value, r.drop, format_sci(r.wall_ms));
    }
    out
}

fn plot_script(plan: &ExperimentPlan, csv_name: &str, png_name: &str) -> String {
    let (xlabel, column, ylabel) = match plan.sweep_var {
        SweepVar::M => ("Number of BS antennas M", "sum_rate", "Sum-rate (bit/s/Hz)"),
        SweepVar::N => ("Number of RIS elements N", "sum_rate", "Sum-rate (bit/s/Hz)"),
        SweepVar::K => ("Number of users K", "avg_rate", "Average rate per user (bit/s/Hz)"),
    };
    format!(
        r#"#!/usr/bin/env python3
import csv
import math
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
data = defaultdict(lambda: defaultdict(list))
order = []
with open(os.path.join(here, "{csv_name}"), newline="") as f:
    for row in csv.DictReader(f):
        if row["method"] not in order:
            order.append(row["method"])
        data[row["method"]][int(row["sweep_value"])].append(float(row["{column}"]))

fig, ax = plt.subplots(figsize=(6, 4.5))
for method in order:
    xs = sorted(data[method])
    mean = [sum(data[method][x]) / len(data[method][x]) for x in xs]
    err = []
    for x, m in zip(xs, mean):
        v = data[method][x]
        var = sum((y - m) ** 2 for y in v) / (len(v) - 1) if len(v) > 1 else 0.0
        err.append(math.sqrt(var / len(v)))
    ax.errorbar(xs, mean, yerr=err, marker="o", capsize=3, label=method)
ax.set_xlabel("{xlabel}")
ax.set_ylabel("{ylabel}")
ax.set_title("{name}")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(os.path.join(here, "{png_name}"), dpi=150)
"#,
        name = plan.name
    )
}

#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub timing: PathBuf,
    pub plot_script: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.into(), source })
}

/// Writes `<name>.csv`, `<name>_timing.csv` and `<name>_plot.py` into `dir`.
pub fn emit_outputs(table: &ResultTable, plan: &ExperimentPlan, dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
    let csv_name = format!("{}.csv", plan.name);
    let files = OutputFiles {
        csv: dir.join(&csv_name),
        timing: dir.join(format!("{}_timing.csv", plan.name)),
        plot_script: dir.join(format!("{}_plot.py", plan.name)),
    };
    write_file(&files.csv, &write_csv(table, plan.record_wall_time))?;
    write_file(&files.timing, &write_timing(table))?;
    write_file(&files.plot_script, &plot_script(plan, &csv_name, &format!("{}.png", plan.name)))?;
    Ok(files)
}
