//! Per-block IBT schedule: DL training, combiner update, UL-1, UL-2 and the
//! AP-side precoder (or gradient) update, followed by data-phase scaling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::mmse_design::{best_response_update, init_combiners, scale_for_data, ApBeams, DataBeams, ScalingOptions, UeBeams};
use crate::paired_design::project_power;
use crate::scenario::{pair_ues, Scenario};

use super::estimators::{estimate_ap_gradients, estimate_ap_precoders, estimate_combiner_ota, estimate_lipschitz, Ul2Term};
use super::pilots::PilotBook;
use super::signals::{compute_beta, dl_training, ul_training_1, ul_training_2, StreamLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IbtMethod {
    CombOta,
    CombLocal,
    PairedOta,
    PairedLocal,
}

impl IbtMethod {
    /// Whether the UL-2 phase is run.
    pub fn ota(self) -> bool {
        matches!(self, IbtMethod::CombOta | IbtMethod::PairedOta)
    }

    pub fn paired(self) -> bool {
        matches!(self, IbtMethod::PairedOta | IbtMethod::PairedLocal)
    }

    /// Training layout over every UE of the scenario.
    pub fn layout(self, scenario: &Scenario) -> StreamLayout {
        if self.paired() {
            StreamLayout::paired(&pair_ues(scenario))
        } else {
            StreamLayout::ue_specific(&scenario.all_ues())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IbtConfig {
    /// Best-response relaxation of the UE-specific precoder update.
    pub gamma_br: f64,
    /// Paired gradient step relative to the estimated Lipschitz constant.
    pub step_factor: f64,
    /// Pilot length as a multiple of the pilot count.
    pub pilot_scale: usize,
    /// Add receiver noise to the training signals.
    pub training_noise: bool,
    /// Fixed transmit normalization instead of the per-block peak rule.
    pub beta_override: Option<f64>,
    /// UL-2 treatment of the local variants.
    pub local_ul2: Ul2Term,
    /// Step against the estimated gradient instead of along it.
    pub flip_gradient_sign: bool,
    pub scaling: ScalingOptions,
}

impl Default for IbtConfig {
    fn default() -> Self {
        IbtConfig {
            gamma_br: 0.4,
            step_factor: 1.2,
            pilot_scale: 1,
            training_noise: true,
            beta_override: None,
            local_ul2: Ul2Term::SelfEstimate,
            flip_gradient_sign: false,
            scaling: ScalingOptions::default(),
        }
    }
}

/// Orthogonal resources spent per training phase in one block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResourceCounter {
    pub dl: usize,
    pub ul1: usize,
    pub ul2: usize,
}

impl ResourceCounter {
    pub fn total(&self) -> usize {
        self.dl + self.ul1 + self.ul2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbtBlock {
    /// Trained beams mapped to global UE indices.
    pub beams: UeBeams,
    pub data: DataBeams,
    pub beta: f64,
    /// Power dual per AP (zero for the gradient update).
    pub lambda: Vec<f64>,
    /// Gradient step of the paired update (zero otherwise).
    pub step: f64,
    pub resources: ResourceCounter,
    /// Number of estimates that hit a singular or all-zero case.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbtRun {
    /// Resources of the one-off UL-1 that seeds the precoders.
    pub init_resources: usize,
    pub blocks: Vec<IbtBlock>,
}

fn ap_slice(w: &ApBeams, b: usize) -> Vec<CVec> {
    (0..w.streams()).map(|s| w.get(b, s).clone()).collect()
}

/// Runs IBT over `channels` (one entry per block) with every method of the
/// scenario taking part as described by `layout`.
pub fn run_ibt<R: Rng + ?Sized>(
    scenario: &Scenario,
    channels: &[ChannelState],
    layout: &StreamLayout,
    method: IbtMethod,
    cfg: &IbtConfig,
    rng: &mut R,
) -> Result<IbtRun> {
    if channels.is_empty() {
        return Err(Error::InvalidArgument("IBT needs at least one block".into()));
    }
    if layout.is_empty() {
        return Err(Error::InvalidArgument("IBT needs at least one UE".into()));
    }
    if cfg.pilot_scale == 0 {
        return Err(Error::InvalidArgument("pilot scale must be positive".into()));
    }
    let aps = scenario.ap_count;
    let m = scenario.ap_antennas;
    let n = scenario.ue_antennas;
    let streams = layout.streams;
    let tau = streams * cfg.pilot_scale;
    let pilots = PilotBook::new(streams, tau)?;
    let (s2_ue, s2_ap) = if cfg.training_noise {
        (scenario.noise_ue, scenario.noise_ap)
    } else {
        (0.0, 0.0)
    };
    let rho = scenario.rho_ap;
    let beta_of = |v: &[CVec], y: Option<&[crate::linalg::CMat]>| {
        let b = cfg.beta_override.unwrap_or_else(|| compute_beta(v, y, scenario.rho_ue));
        if b > 0.0 {
            b
        } else {
            1.0
        }
    };

    // Seed the precoders from one UL-1 reception of the starting combiners.
    let mut v = init_combiners(n, layout.len(), rng);
    let beta0 = beta_of(&v, None);
    let y1 = ul_training_1(&channels[0], layout, &v, &pilots, beta0, s2_ap, rng);
    let mut w = ApBeams::zeros(aps, streams, m);
    for b in 0..aps {
        let zeros = vec![CVec::zeros(m); streams];
        let new = if method.paired() {
            estimate_ap_gradients(&y1[b], None, &pilots, &zeros, 1.0 / beta0, s2_ap, Ul2Term::Zero)
        } else {
            estimate_ap_precoders(&y1[b], None, &pilots, &zeros, 1.0 / beta0, s2_ap, rho, Ul2Term::Zero, b)?.w
        };
        for (s, ws) in new.into_iter().enumerate() {
            w.set(b, s, ws);
        }
    }
    if method.paired() {
        project_power(&mut w, rho, cfg.scaling.literal);
    }

    let mut blocks = Vec::with_capacity(channels.len());
    for ch in channels {
        let mut resources = ResourceCounter::default();
        let mut degenerate = 0;

        let y_dl = dl_training(ch, layout, &w, &pilots, s2_ue, rng);
        resources.dl += tau;
        v = (0..layout.len())
            .map(|pos| {
                let (vk, deg) = estimate_combiner_ota(&y_dl[pos], pilots.pilot(layout.pilot_of[pos]));
                degenerate += deg as usize;
                vk
            })
            .collect();

        let beta = beta_of(&v, if method.ota() { Some(&y_dl) } else { None });
        let y1 = ul_training_1(ch, layout, &v, &pilots, beta, s2_ap, rng);
        resources.ul1 += tau;
        let y2 = if method.ota() {
            resources.ul2 += tau;
            Some(ul_training_2(ch, layout, &v, &y_dl, beta, s2_ap, rng))
        } else {
            None
        };
        let term = if method.ota() { Ul2Term::Observed } else { cfg.local_ul2 };
        let beta_eq = 1.0 / beta;

        let mut lambda = vec![0.0; aps];
        let mut step = 0.0;
        let mut next = w.clone();
        if method.paired() {
            let l = (0..aps)
                .map(|b| estimate_lipschitz(&y1[b], tau, beta_eq, s2_ap))
                .fold(0.0_f64, f64::max);
            step = if l > 0.0 { cfg.step_factor / l } else { 0.0 };
            let signed = if cfg.flip_gradient_sign { -step } else { step };
            for b in 0..aps {
                let prev = ap_slice(&w, b);
                let grads = estimate_ap_gradients(&y1[b], y2.as_ref().map(|y| &y[b]), &pilots, &prev, beta_eq, s2_ap, term);
                for (s, g) in grads.into_iter().enumerate() {
                    next.set(b, s, &prev[s] + g * c(signed, 0.0));
                }
            }
            project_power(&mut next, rho, cfg.scaling.literal);
        } else {
            for b in 0..aps {
                let prev = ap_slice(&w, b);
                let sol = estimate_ap_precoders(&y1[b], y2.as_ref().map(|y| &y[b]), &pilots, &prev, beta_eq, s2_ap, rho, term, b)?;
                lambda[b] = sol.lambda;
                degenerate += sol.degenerate as usize;
                for (s, ws) in sol.w.iter().enumerate() {
                    next.set(b, s, best_response_update(ws, &prev[s], cfg.gamma_br)?);
                }
            }
        }
        w = next;

        let beams = to_ue_beams(&w, &v, layout, scenario.ue_count, n);
        let data = scale_for_data(&beams, scenario, cfg.scaling);
        blocks.push(IbtBlock {
            beams,
            data,
            beta,
            lambda,
            step,
            resources,
            degenerate,
        });
    }
    Ok(IbtRun {
        init_resources: tau,
        blocks,
    })
}

fn to_ue_beams(w: &ApBeams, v: &[CVec], layout: &StreamLayout, ue_count: usize, n: usize) -> UeBeams {
    let mut wu = ApBeams::zeros(w.aps(), ue_count, w.dim());
    let mut vu = vec![CVec::zeros(n); ue_count];
    for (pos, &k) in layout.ues.iter().enumerate() {
        for b in 0..w.aps() {
            wu.set(b, k, w.get(b, layout.pilot_of[pos]).clone());
        }
        vu[k] = v[pos].clone();
    }
    UeBeams { w: wu, v: vu }
}

/// [`run_ibt`] over every UE of the scenario.
pub fn run_method<R: Rng + ?Sized>(
    scenario: &Scenario,
    channels: &[ChannelState],
    method: IbtMethod,
    cfg: &IbtConfig,
    rng: &mut R,
) -> Result<IbtRun> {
    run_ibt(scenario, channels, &method.layout(scenario), method, cfg, rng)
}
