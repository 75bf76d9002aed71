//! SINRs, sum rates, training overheads and the effective rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sq, CVec, C64};
use crate::mmse_design::{ApBeams, DataBeams};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Centralized,
    SepOta,
    SepLocal,
    CombOta,
    CombLocal,
    CombPairedOta,
    CombPairedLocal,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Centralized,
        Method::SepOta,
        Method::SepLocal,
        Method::CombOta,
        Method::CombLocal,
        Method::CombPairedOta,
        Method::CombPairedLocal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::SepOta => "sep-ota",
            Method::SepLocal => "sep-local",
            Method::CombOta => "comb-ota",
            Method::CombLocal => "comb-local",
            Method::CombPairedOta => "comb-paired-ota",
            Method::CombPairedLocal => "comb-paired-local",
        }
    }

    /// Position in [`Method::ALL`], used to key RNG streams.
    pub fn code(self) -> u16 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u16
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// DL SINR of UE `k`; interference from every other DL UE's precoder.
pub fn dl_sinr(ch: &ChannelState, w_dl: &ApBeams, v_dl: &[CVec], dl_set: &[usize], k: usize, sigma2_ue: f64) -> f64 {
    let v = &v_dl[k];
    let gain = |j: usize| -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for b in 0..ch.ap_count {
            s += inner(v, &(ch.h(b, k).adjoint() * w_dl.get(b, j)));
        }
        s
    };
    let signal = gain(k).norm_sqr();
    if signal == 0.0 {
        return 0.0;
    }
    let interference: f64 = dl_set.iter().filter(|&&j| j != k).map(|&j| gain(j).norm_sqr()).sum();
    signal / (interference + sigma2_ue * norm_sq(v))
}

/// UL SINR of UE `k` with the per-AP combiners `w_ul(b, k)` summed at the CPU.
pub fn ul_sinr(ch: &ChannelState, v_ul: &[CVec], w_ul: &ApBeams, ul_set: &[usize], k: usize, sigma2_ap: f64) -> f64 {
    let gain = |j: usize| -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for b in 0..ch.ap_count {
            s += inner(w_ul.get(b, k), &(ch.h(b, j) * &v_ul[j]));
        }
        s
    };
    let signal = gain(k).norm_sqr();
    if signal == 0.0 {
        return 0.0;
    }
    let interference: f64 = ul_set.iter().filter(|&&j| j != k).map(|&j| gain(j).norm_sqr()).sum();
    let noise: f64 = (0..ch.ap_count).map(|b| norm_sq(w_ul.get(b, k))).sum::<f64>() * sigma2_ap;
    signal / (interference + noise)
}

/// Minimum orthogonal training resources per block.
pub fn ibt_resources(method: Method, scenario: &Scenario) -> usize {
    let k = scenario.ue_count;
    let dl = scenario.dl_set.len();
    let ul = scenario.ul_set.len();
    match method {
        Method::Centralized => k * scenario.ue_antennas + dl + ul,
        Method::SepOta => 3 * (dl + ul),
        Method::SepLocal => 2 * (dl + ul),
        Method::CombOta => 3 * k,
        Method::CombLocal => 2 * k,
        Method::CombPairedOta => 3 * dl.max(ul),
        Method::CombPairedLocal => 2 * dl.max(ul),
    }
}

/// `(1 - r_ibt / r_tot) (r_dl + r_ul) / 2`.
pub fn effective_rate(r_dl: f64, r_ul: f64, r_ibt: f64, r_tot: f64) -> Result<f64> {
    if !(r_tot > 0.0) || r_ibt < 0.0 {
        return Err(Error::InvalidArgument("resource counts must be positive".into()));
    }
    if r_ibt > r_tot {
        return Err(Error::ResourceOverflow { r_ibt, r_tot });
    }
    Ok((1.0 - r_ibt / r_tot) * (r_dl + r_ul) / 2.0)
}

/// SINRs and sum rates of one block, before the overhead discount.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRates {
    /// Per served DL UE, in `dl_set` order.
    pub gamma_dl: Vec<f64>,
    /// Per served UL UE, in `ul_set` order.
    pub gamma_ul: Vec<f64>,
    pub r_dl: f64,
    pub r_ul: f64,
}

pub fn evaluate_links(ch: &ChannelState, scenario: &Scenario, data: &DataBeams) -> LinkRates {
    let gamma_dl: Vec<f64> = scenario
        .dl_set
        .iter()
        .map(|&k| dl_sinr(ch, &data.w_dl, &data.v_dl, &scenario.dl_set, k, scenario.noise_ue))
        .collect();
    let gamma_ul: Vec<f64> = scenario
        .ul_set
        .iter()
        .map(|&k| ul_sinr(ch, &data.v_ul, &data.w_ul, &scenario.ul_set, k, scenario.noise_ap))
        .collect();
    let rate = |g: &[f64]| g.iter().map(|x| (1.0 + x).log2()).sum::<f64>();
    LinkRates {
        r_dl: rate(&gamma_dl),
        r_ul: rate(&gamma_ul),
        gamma_dl,
        gamma_ul,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub block: usize,
    pub links: LinkRates,
    pub r_ibt: f64,
    pub r_tot: f64,
    pub r_eff: f64,
}

impl RateReport {
    pub fn new(block: usize, links: LinkRates, r_ibt: f64, r_tot: f64) -> Result<Self> {
        let r_eff = effective_rate(links.r_dl, links.r_ul, r_ibt, r_tot)?;
        Ok(RateReport {
            block,
            links,
            r_ibt,
            r_tot,
            r_eff,
        })
    }

    /// Like [`RateReport::new`] but a block whose training alone exceeds
    /// `r_tot` carries no data and scores zero.
    pub fn saturating(block: usize, links: LinkRates, r_ibt: f64, r_tot: f64) -> Result<Self> {
        if r_ibt > r_tot && r_tot > 0.0 {
            return Ok(RateReport {
                block,
                links,
                r_ibt,
                r_tot,
                r_eff: 0.0,
            });
        }
        Self::new(block, links, r_ibt, r_tot)
    }
}
