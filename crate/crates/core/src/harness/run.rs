//! Monte Carlo orchestration.

use rayon::prelude::*;

use crate::baselines::{run_centralized, separate_design};
use crate::channel::channel_sequence;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_links, ibt_resources, LinkRates, Method, RateReport};
use crate::ota_ibt::{run_method, IbtMethod};
use crate::rng::{stream, Purpose};
use crate::scenario::build_scenario;

use super::config::{ExperimentConfig, SweepPoint};

/// Training-side diagnostics of one block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceInfo {
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub step: f64,
    /// DL, UL-1, UL-2 resources.
    pub resources: [usize; 3],
    pub degenerate: usize,
}

/// Outcome of one method in one block of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub drop: usize,
    pub point: usize,
    pub point_value: f64,
    /// Block index `t`, starting at 1.
    pub block: usize,
    pub method: Method,
    pub r_ibt: f64,
    pub links: LinkRates,
    pub trace: TraceInfo,
}

/// One output row: a block record scored with one block size.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub seed: u64,
    pub drop: usize,
    pub point: usize,
    pub point_value: f64,
    pub block: usize,
    pub method: Method,
    pub r_ibt: f64,
    pub r_tot: f64,
    pub r_dl: f64,
    pub r_ul: f64,
    pub r_eff: f64,
    pub gamma_dl: Vec<f64>,
    pub gamma_ul: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<BlockRecord>,
    pub rows: Vec<RateRow>,
}

fn ibt_kind(method: Method) -> Option<IbtMethod> {
    match method {
        Method::CombOta => Some(IbtMethod::CombOta),
        Method::CombLocal => Some(IbtMethod::CombLocal),
        Method::CombPairedOta => Some(IbtMethod::PairedOta),
        Method::CombPairedLocal => Some(IbtMethod::PairedLocal),
        _ => None,
    }
}

/// Every method over every block of one drop at one sweep point.
pub fn simulate_drop(cfg: &ExperimentConfig, point: &SweepPoint, drop: usize) -> Result<Vec<BlockRecord>> {
    let seed = cfg.seed;
    let scenario = build_scenario(&point.scenario, &mut stream(seed, drop, point.index, Purpose::Geometry))
        .map_err(|e| e.with_context(drop, 0, "scenario"))?;
    let channels = channel_sequence(
        &scenario,
        cfg.kappa,
        cfg.blocks,
        &mut stream(seed, drop, point.index, Purpose::Channel),
    )
    .map_err(|e| e.with_context(drop, 0, "channel"))?;
    let evaluated = &channels[1..];

    let mut records = Vec::with_capacity(cfg.methods.len() * cfg.blocks);
    for &method in &cfg.methods {
        let mut rng = stream(seed, drop, point.index, Purpose::Method(method.code()));
        let ctx = |e: Error| e.with_context(drop, 0, method.name());
        let per_block: Vec<(crate::mmse_design::DataBeams, f64, TraceInfo)> = match method {
            Method::Centralized => {
                let r_ibt = ibt_resources(method, &scenario) as f64;
                run_centralized(&scenario, &channels, cfg.centralized_iters, cfg.ibt.scaling, &mut rng)
                    .map_err(ctx)?
                    .into_iter()
                    .map(|d| (d, r_ibt, TraceInfo::default()))
                    .collect()
            }
            Method::SepOta | Method::SepLocal => {
                let mut aux = stream(seed, drop, point.index, Purpose::MethodAux(method.code()));
                separate_design(&scenario, evaluated, method == Method::SepOta, &cfg.ibt, &mut rng, &mut aux)
                    .map_err(ctx)?
                    .into_iter()
                    .map(|b| {
                        let trace = TraceInfo {
                            beta: b.beta_dl.into_iter().chain(b.beta_ul).collect(),
                            ..TraceInfo::default()
                        };
                        (b.data, b.resources as f64, trace)
                    })
                    .collect()
            }
            _ => {
                let kind = ibt_kind(method).expect("IBT method");
                let run = run_method(&scenario, evaluated, kind, &cfg.ibt, &mut rng).map_err(ctx)?;
                run.blocks
                    .into_iter()
                    .map(|b| {
                        let trace = TraceInfo {
                            beta: vec![b.beta],
                            lambda: b.lambda,
                            step: b.step,
                            resources: [b.resources.dl, b.resources.ul1, b.resources.ul2],
                            degenerate: b.degenerate,
                        };
                        (b.data, b.resources.total() as f64, trace)
                    })
                    .collect()
            }
        };
        for (t, (data, r_ibt, trace)) in per_block.into_iter().enumerate() {
            let links = evaluate_links(&evaluated[t], &scenario, &data);
            records.push(BlockRecord {
                drop,
                point: point.index,
                point_value: point.value,
                block: t + 1,
                method,
                r_ibt,
                links,
                trace,
            });
        }
    }
    Ok(records)
}

/// Runs every drop of every sweep point (drops in parallel) and scores the
/// records with every block size. Output order is independent of
/// scheduling: points, then drops, then methods, then blocks.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut records = Vec::new();
    for point in cfg.points() {
        let per_drop: Vec<Result<Vec<BlockRecord>>> =
            (0..cfg.drops).into_par_iter().map(|d| simulate_drop(cfg, &point, d)).collect();
        for r in per_drop {
            records.extend(r?);
        }
    }
    let rows = score(cfg, &records)?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        rows,
    })
}

/// Rate rows for every record and block size. A block size smaller than
/// the training overhead leaves no room for data and scores zero.
pub fn score(cfg: &ExperimentConfig, records: &[BlockRecord]) -> Result<Vec<RateRow>> {
    let sweep_rtot = matches!(cfg.sweep, super::config::Sweep::RTot { .. });
    let mut rows = Vec::with_capacity(records.len() * cfg.r_tot_values().len());
    for (i, r_tot) in cfg.r_tot_values().into_iter().enumerate() {
        for rec in records {
            let report = RateReport::saturating(rec.block, rec.links.clone(), rec.r_ibt, r_tot)?;
            let (point, point_value) = if sweep_rtot { (i, r_tot) } else { (rec.point, rec.point_value) };
            rows.push(RateRow {
                seed: cfg.seed,
                drop: rec.drop,
                point,
                point_value,
                block: rec.block,
                method: rec.method,
                r_ibt: rec.r_ibt,
                r_tot,
                r_dl: rec.links.r_dl,
                r_ul: rec.links.r_ul,
                r_eff: report.r_eff,
                gamma_dl: rec.links.gamma_dl.clone(),
                gamma_ul: rec.links.gamma_ul.clone(),
            });
        }
    }
    rows.sort_by(|a, b| {
        (a.point, a.drop, a.method, a.block)
            .partial_cmp(&(b.point, b.drop, b.method, b.block))
            .unwrap()
    });
    Ok(rows)
}

/// Mean and standard error over drops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> Stat {
    let n = xs.len();
    if n == 0 {
        return Stat { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Stat { mean, se, n }
}

/// Effective rates of one method at one point and block, in drop order.
pub fn r_eff_by_drop(rows: &[RateRow], method: Method, point: usize, block: usize) -> Vec<f64> {
    let mut sel: Vec<&RateRow> = rows
        .iter()
        .filter(|r| r.method == method && r.point == point && r.block == block)
        .collect();
    sel.sort_by_key(|r| r.drop);
    sel.iter().map(|r| r.r_eff).collect()
}

/// Per-drop difference `a - b` of the effective rate. Every method sees
/// the same geometry and channels in a drop, so the paired difference has
/// a much smaller spread than either method alone.
pub fn paired_difference(rows: &[RateRow], a: Method, b: Method, point: usize, block: usize) -> Stat {
    let xa = r_eff_by_drop(rows, a, point, block);
    let xb = r_eff_by_drop(rows, b, point, block);
    let d: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x - y).collect();
    mean_se(&d)
}
