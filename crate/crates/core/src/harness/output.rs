//! CSV writers and the optional plot script.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::Method;

use super::config::Sweep;
use super::run::{mean_se, ExperimentResult, RateRow};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

pub fn write_rates<W: std::io::Write>(rows: &[RateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed", "drop", "point", "point_value", "block", "method", "r_ibt", "r_tot", "R_dl", "R_ul", "R_eff", "sinr_dl",
        "sinr_ul",
    ])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.drop.to_string(),
            r.point.to_string(),
            r.point_value.to_string(),
            r.block.to_string(),
            r.method.to_string(),
            r.r_ibt.to_string(),
            r.r_tot.to_string(),
            r.r_dl.to_string(),
            r.r_ul.to_string(),
            r.r_eff.to_string(),
            join(&r.gamma_dl),
            join(&r.gamma_ul),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// One summary line per (point, block, method).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub point: usize,
    pub point_value: f64,
    pub block: usize,
    pub method: Method,
    pub r_tot: f64,
    pub drops: usize,
    pub mean_r_eff: f64,
    pub se_r_eff: f64,
    pub mean_r_dl: f64,
    pub mean_r_ul: f64,
}

pub fn summarize(rows: &[RateRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, usize, Method)> = rows.iter().map(|r| (r.point, r.block, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(point, block, method)| {
            let sel: Vec<&RateRow> = rows
                .iter()
                .filter(|r| r.point == point && r.block == block && r.method == method)
                .collect();
            let eff = mean_se(&sel.iter().map(|r| r.r_eff).collect::<Vec<_>>());
            let dl = mean_se(&sel.iter().map(|r| r.r_dl).collect::<Vec<_>>());
            let ul = mean_se(&sel.iter().map(|r| r.r_ul).collect::<Vec<_>>());
            SummaryRow {
                point,
                point_value: sel[0].point_value,
                block,
                method,
                r_tot: sel[0].r_tot,
                drops: sel.len(),
                mean_r_eff: eff.mean,
                se_r_eff: eff.se,
                mean_r_dl: dl.mean,
                mean_r_ul: ul.mean,
            }
        })
        .collect()
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "point", "point_value", "block", "method", "r_tot", "drops", "mean_R_eff", "se_R_eff", "mean_R_dl", "mean_R_ul",
    ])?;
    for r in rows {
        w.write_record([
            r.point.to_string(),
            r.point_value.to_string(),
            r.block.to_string(),
            r.method.to_string(),
            r.r_tot.to_string(),
            r.drops.to_string(),
            r.mean_r_eff.to_string(),
            r.se_r_eff.to_string(),
            r.mean_r_dl.to_string(),
            r.mean_r_ul.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_trace<W: std::io::Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "drop", "point", "block", "method", "beta", "lambda", "step", "res_dl", "res_ul1", "res_ul2", "degenerate",
        "sinr_dl", "sinr_ul",
    ])?;
    for r in &result.records {
        let t = &r.trace;
        w.write_record([
            r.drop.to_string(),
            r.point.to_string(),
            r.block.to_string(),
            r.method.to_string(),
            join(&t.beta),
            join(&t.lambda),
            t.step.to_string(),
            t.resources[0].to_string(),
            t.resources[1].to_string(),
            t.resources[2].to_string(),
            t.degenerate.to_string(),
            join(&r.links.gamma_dl),
            join(&r.links.gamma_ul),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

fn plot_script(result: &ExperimentResult) -> String {
    let (x, label, final_block) = match result.config.sweep {
        Sweep::None => ("block", "resource block t", false),
        Sweep::RTot { .. } => ("point_value", "r_tot", true),
        Sweep::Overlap { .. } => ("point_value", "|DL-UL| UEs", true),
    };
    let filter = if final_block {
        format!("s = s[s.block == {}]\n", result.config.blocks)
    } else {
        String::new()
    };
    format!(
        r#"import pandas as pd
import matplotlib.pyplot as plt

s = pd.read_csv("summary.csv")
{filter}fig, ax = plt.subplots(figsize=(6, 4))
for method, g in s.groupby("method"):
    g = g.sort_values("{x}")
    ax.errorbar(g["{x}"], g["mean_R_eff"], yerr=g["se_R_eff"], marker="o", capsize=2, label=method)
ax.set_xlabel("{label}")
ax.set_ylabel("effective DL-UL sum rate [bps/Hz]")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig("{name}.pdf")
"#,
        name = result.config.name
    )
}

/// Writes `rates.csv`, `summary.csv`, the resolved `config.toml`, and the
/// optional trace and plot script. Returns the written paths.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut open = |name: &str| -> Result<(fs::File, PathBuf)> {
        let p = dir.join(name);
        let f = fs::File::create(&p).map_err(io_err(&p))?;
        written.push(p.clone());
        Ok((f, p))
    };
    let (f, _) = open("rates.csv")?;
    write_rates(&result.rows, f)?;
    let (f, _) = open("summary.csv")?;
    write_summary(&summarize(&result.rows), f)?;
    let (mut f, p) = open("config.toml")?;
    std::io::Write::write_all(&mut f, result.config.to_toml().as_bytes()).map_err(io_err(&p))?;
    if result.config.output.trace {
        let (f, _) = open("ibt_trace.csv")?;
        write_trace(result, f)?;
    }
    if result.config.output.plot_script {
        let (mut f, p) = open("plot.py")?;
        std::io::Write::write_all(&mut f, plot_script(result).as_bytes()).map_err(io_err(&p))?;
    }
    Ok(written)
}
