//! Reference designs: a centralized global-CSI design fed with one-block-old
//! channels, and separate DL/UL IBT runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::linalg::{c, hpd_solve, norm_sq, outer, CMat, CVec};
use crate::mmse_design::{
    alternate, init_precoders, scale_for_data, AlternateOptions, ApBeams, BeamformerState, DataBeams, PrecoderInit,
    ScalingOptions, UpdateOrder,
};
use crate::ota_ibt::{run_ibt, IbtConfig, IbtMethod, StreamLayout};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Centralized,
    SepOta,
    SepLocal,
}

/// Centralized beams for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedState {
    /// DL design over the DL set.
    pub dl: BeamformerState,
    /// UL precoders per UL-set position, `||v||^2 = rho_ue`.
    pub ul_v: Vec<CVec>,
    /// Network-wide UL combiners over the stacked `B M` antennas.
    pub ul_g: Vec<CVec>,
}

/// `[H_{1,k}; ...; H_{B,k}]`.
fn stacked(ch: &ChannelState, k: usize) -> CMat {
    let m = ch.ap_antennas;
    let mut out = CMat::zeros(ch.ap_count * m, ch.ue_antennas);
    for b in 0..ch.ap_count {
        out.view_mut((b * m, 0), (m, ch.ue_antennas)).copy_from(ch.h(b, k));
    }
    out
}

fn dominant_right_vector(h: &CMat) -> CVec {
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (i, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    v_t.row(i).adjoint()
}

fn scale_to(v: &CVec, rho: f64) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v * c(rho.sqrt() / n, 0.0)
    } else {
        v.clone()
    }
}

/// Alternating network-wide MMSE combiners and matched-filter UL precoders.
fn centralized_uplink(ch: &ChannelState, scenario: &Scenario, v0: &[CVec], iters: usize) -> (Vec<CVec>, Vec<CVec>) {
    let ul = &scenario.ul_set;
    let hs: Vec<CMat> = ul.iter().map(|&k| stacked(ch, k)).collect();
    let dim = ch.ap_count * ch.ap_antennas;
    let mut v = v0.to_vec();
    let mut g = vec![CVec::zeros(dim); ul.len()];
    for _ in 0..iters.max(1) {
        let eff: Vec<CVec> = hs.iter().zip(&v).map(|(h, vk)| h * vk).collect();
        let mut cov = CMat::identity(dim, dim) * c(scenario.noise_ap, 0.0);
        for e in &eff {
            cov += outer(e, e);
        }
        g = eff.iter().map(|e| hpd_solve(&cov, e)).collect();
        v = hs
            .iter()
            .zip(&g)
            .zip(&v)
            .map(|((h, gk), prev)| {
                let u = h.adjoint() * gk;
                if norm_sq(&u) > 0.0 {
                    scale_to(&u, scenario.rho_ue)
                } else {
                    prev.clone()
                }
            })
            .collect();
    }
    (v, g)
}

/// Designs on `ch` (the delayed channel). `warm` carries the previous
/// block's beams; without it the DL starts from the conjugate channel
/// columns and the UL from the dominant right singular vectors.
pub fn centralized_design<R: Rng + ?Sized>(
    ch: &ChannelState,
    scenario: &Scenario,
    warm: Option<&CentralizedState>,
    iters: usize,
    rng: &mut R,
) -> Result<CentralizedState> {
    let dl_ues = scenario.dl_set.clone();
    let init = match warm {
        Some(w) => w.dl.clone(),
        None => BeamformerState {
            w_dl: init_precoders(ch, &dl_ues, PrecoderInit::Conjugate, scenario.rho_ap, rng),
            v_dl: vec![CVec::zeros(ch.ue_antennas); dl_ues.len()],
            lambda: vec![0.0; ch.ap_count],
            ues: dl_ues,
        },
    };
    let opts = AlternateOptions {
        iters,
        rho_ap: scenario.rho_ap,
        sigma_ue: scenario.noise_ue,
        gamma: 1.0,
        order: UpdateOrder::Sequential,
    };
    let (dl, _) = alternate(ch, &init, &opts)?;

    let v0: Vec<CVec> = match warm {
        Some(w) => w.ul_v.clone(),
        None => scenario
            .ul_set
            .iter()
            .map(|&k| scale_to(&dominant_right_vector(&stacked(ch, k)), scenario.rho_ue))
            .collect(),
    };
    let (ul_v, ul_g) = centralized_uplink(ch, scenario, &v0, iters);
    Ok(CentralizedState { dl, ul_v, ul_g })
}

/// Data beams of a centralized design. DL follows the usual per-AP scaling;
/// the stacked UL combiners are split per AP.
pub fn centralized_data(state: &CentralizedState, scenario: &Scenario, scaling: ScalingOptions) -> DataBeams {
    let mut ue = state.dl.to_ue_beams(scenario.ue_count);
    // UL UEs outside the DL set still need a combiner entry for scaling.
    for (pos, &k) in scenario.ul_set.iter().enumerate() {
        ue.v[k] = state.ul_v[pos].clone();
    }
    let mut data = scale_for_data(&ue, scenario, ScalingOptions {
        ul_combiner_post_scaling: false,
        ..scaling
    });
    let m = scenario.ap_antennas;
    let mut w_ul = ApBeams::zeros(scenario.ap_count, scenario.ue_count, m);
    for (pos, &k) in scenario.ul_set.iter().enumerate() {
        data.v_ul[k] = state.ul_v[pos].clone();
        for b in 0..scenario.ap_count {
            w_ul.set(b, k, state.ul_g[pos].rows(b * m, m).into_owned());
        }
    }
    data.w_ul = w_ul;
    data.degenerate_ul = scenario
        .ul_set
        .iter()
        .enumerate()
        .filter(|(pos, _)| norm_sq(&state.ul_v[*pos]) == 0.0)
        .map(|(_, &k)| k)
        .collect();
    data
}

/// Centralized beams for blocks `1..channels.len()`, each designed on the
/// previous block's channel and warm-started from the previous design.
pub fn run_centralized<R: Rng + ?Sized>(
    scenario: &Scenario,
    channels: &[ChannelState],
    iters: usize,
    scaling: ScalingOptions,
    rng: &mut R,
) -> Result<Vec<DataBeams>> {
    if channels.len() < 2 {
        return Err(Error::InvalidArgument("centralized design needs a previous block".into()));
    }
    let mut prev: Option<CentralizedState> = None;
    let mut out = Vec::with_capacity(channels.len() - 1);
    for ch in &channels[..channels.len() - 1] {
        let st = centralized_design(ch, scenario, prev.as_ref(), iters, rng)?;
        out.push(centralized_data(&st, scenario, scaling));
        prev = Some(st);
    }
    Ok(out)
}

/// One block of a separate-IBT baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparateBlock {
    pub data: DataBeams,
    /// Resources of both instances.
    pub resources: usize,
    pub beta_dl: Option<f64>,
    pub beta_ul: Option<f64>,
}

type InstanceBlocks = Vec<(DataBeams, usize, f64)>;

fn separate_instance<R: Rng + ?Sized>(
    scenario: &Scenario,
    channels: &[ChannelState],
    set: &[usize],
    method: IbtMethod,
    cfg: &IbtConfig,
    rng: &mut R,
) -> Result<Option<InstanceBlocks>> {
    if set.is_empty() {
        return Ok(None);
    }
    let run = run_ibt(scenario, channels, &StreamLayout::ue_specific(set), method, cfg, rng)?;
    Ok(Some(run.blocks.into_iter().map(|b| (b.data, b.resources.total(), b.beta)).collect()))
}

/// Two independent IBT instances: one over the DL set whose beams serve the
/// DL, one over the UL set whose beams serve the UL.
pub fn separate_design<R: Rng + ?Sized>(
    scenario: &Scenario,
    channels: &[ChannelState],
    ota: bool,
    cfg: &IbtConfig,
    rng_dl: &mut R,
    rng_ul: &mut R,
) -> Result<Vec<SeparateBlock>> {
    let method = if ota { IbtMethod::CombOta } else { IbtMethod::CombLocal };
    let dl = separate_instance(scenario, channels, &scenario.dl_set, method, cfg, rng_dl)?;
    let ul = separate_instance(scenario, channels, &scenario.ul_set, method, cfg, rng_ul)?;

    let empty = || DataBeams {
        w_dl: ApBeams::zeros(scenario.ap_count, scenario.ue_count, scenario.ap_antennas),
        v_dl: vec![CVec::zeros(scenario.ue_antennas); scenario.ue_count],
        v_ul: vec![CVec::zeros(scenario.ue_antennas); scenario.ue_count],
        w_ul: ApBeams::zeros(scenario.ap_count, scenario.ue_count, scenario.ap_antennas),
        silent_aps: Vec::new(),
        degenerate_ul: Vec::new(),
    };
    let mut out = Vec::with_capacity(channels.len());
    for t in 0..channels.len() {
        let (dl_data, dl_res, beta_dl) = match &dl {
            Some(v) => (v[t].0.clone(), v[t].1, Some(v[t].2)),
            None => (empty(), 0, None),
        };
        let (ul_data, ul_res, beta_ul) = match &ul {
            Some(v) => (v[t].0.clone(), v[t].1, Some(v[t].2)),
            None => (empty(), 0, None),
        };
        out.push(SeparateBlock {
            data: DataBeams::merge(dl_data, ul_data),
            resources: dl_res + ul_res,
            beta_dl,
            beta_ul,
        });
    }
    Ok(out)
}
