//! Network geometry, UE service sets and the DL/UL pairing used by the
//! virtual-multicast design.
//!
//! UE indices are zero-based throughout the crate. The phantom UE of a
//! pair is represented by `None`.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AP placement rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Square grid with APs centered in their cells (`B` must be a square).
    Grid,
    /// APs dropped uniformly in the area.
    Uniform,
}

/// How UEs are assigned to the DL and UL service sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ServiceSets {
    /// Every UE is served in both directions.
    All,
    /// Set sizes; with `shuffle` the membership is drawn uniformly at random,
    /// otherwise DL-only UEs take the lowest indices, then DL-UL, then UL-only.
    Sizes { dl: usize, ul: usize, shuffle: bool },
    /// Explicit memberships.
    Explicit { dl: Vec<usize>, ul: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ap_count: usize,
    pub ap_antennas: usize,
    pub ue_count: usize,
    pub ue_antennas: usize,
    /// Distance between adjacent APs on the grid (m).
    #[serde(default = "default_spacing")]
    pub ap_spacing: f64,
    /// Side of the square area (m). Defaults to `sqrt(B) * spacing`.
    #[serde(default)]
    pub area_side: Option<f64>,
    #[serde(default = "default_placement")]
    pub placement: Placement,
    #[serde(default = "default_sets")]
    pub sets: ServiceSets,
    #[serde(default = "default_rho_ap")]
    pub rho_ap_dbm: f64,
    #[serde(default = "default_rho_ue")]
    pub rho_ue_dbm: f64,
    #[serde(default = "default_noise")]
    pub noise_ap_dbm: f64,
    #[serde(default = "default_noise")]
    pub noise_ue_dbm: f64,
    /// Floor on AP-UE distance used by the path-loss model (m).
    #[serde(default = "default_min_distance")]
    pub min_distance: f64,
}

fn default_spacing() -> f64 {
    20.0
}
fn default_placement() -> Placement {
    Placement::Grid
}
fn default_sets() -> ServiceSets {
    ServiceSets::All
}
fn default_rho_ap() -> f64 {
    30.0
}
fn default_rho_ue() -> f64 {
    20.0
}
fn default_noise() -> f64 {
    -95.0
}
fn default_min_distance() -> f64 {
    1.0
}

impl ScenarioConfig {
    /// Power and noise budgets of the reference setup, with the given sizes.
    pub fn new(ap_count: usize, ap_antennas: usize, ue_count: usize, ue_antennas: usize) -> Self {
        ScenarioConfig {
            ap_count,
            ap_antennas,
            ue_count,
            ue_antennas,
            ap_spacing: default_spacing(),
            area_side: None,
            placement: Placement::Grid,
            sets: ServiceSets::All,
            rho_ap_dbm: default_rho_ap(),
            rho_ue_dbm: default_rho_ue(),
            noise_ap_dbm: default_noise(),
            noise_ue_dbm: default_noise(),
            min_distance: default_min_distance(),
        }
    }

    pub fn with_sets(mut self, sets: ServiceSets) -> Self {
        self.sets = sets;
        self
    }

    fn grid_side(&self) -> Option<usize> {
        let s = (self.ap_count as f64).sqrt().round() as usize;
        (s * s == self.ap_count).then_some(s)
    }

    pub fn area(&self) -> f64 {
        self.area_side.unwrap_or_else(|| {
            let side = self.grid_side().map(|s| s as f64).unwrap_or_else(|| (self.ap_count as f64).sqrt());
            side * self.ap_spacing
        })
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ap_count: usize,
    pub ue_count: usize,
    pub ap_antennas: usize,
    pub ue_antennas: usize,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// Sorted DL service set.
    pub dl_set: Vec<usize>,
    /// Sorted UL service set.
    pub ul_set: Vec<usize>,
    pub rho_ap: f64,
    pub rho_ue: f64,
    pub noise_ap: f64,
    pub noise_ue: f64,
    pub min_distance: f64,
}

impl Scenario {
    pub fn all_ues(&self) -> Vec<usize> {
        (0..self.ue_count).collect()
    }

    pub fn is_dl(&self, k: usize) -> bool {
        self.dl_set.binary_search(&k).is_ok()
    }

    pub fn is_ul(&self, k: usize) -> bool {
        self.ul_set.binary_search(&k).is_ok()
    }

    pub fn dl_ul(&self) -> Vec<usize> {
        self.dl_set.iter().copied().filter(|&k| self.is_ul(k)).collect()
    }

    pub fn dl_only(&self) -> Vec<usize> {
        self.dl_set.iter().copied().filter(|&k| !self.is_ul(k)).collect()
    }

    pub fn ul_only(&self) -> Vec<usize> {
        self.ul_set.iter().copied().filter(|&k| !self.is_dl(k)).collect()
    }

    pub fn distance(&self, b: usize, k: usize) -> f64 {
        let [ax, ay] = self.ap_positions[b];
        let [ux, uy] = self.ue_positions[k];
        ((ax - ux).powi(2) + (ay - uy).powi(2)).sqrt().max(self.min_distance)
    }

    /// Assembles a scenario from explicit parts and validates it.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        ap_positions: Vec<[f64; 2]>,
        ue_positions: Vec<[f64; 2]>,
        ap_antennas: usize,
        ue_antennas: usize,
        dl_set: Vec<usize>,
        ul_set: Vec<usize>,
        powers: [f64; 4],
    ) -> Result<Self> {
        let [rho_ap, rho_ue, noise_ap, noise_ue] = powers;
        let mut s = Scenario {
            ap_count: ap_positions.len(),
            ue_count: ue_positions.len(),
            ap_antennas,
            ue_antennas,
            ap_positions,
            ue_positions,
            dl_set,
            ul_set,
            rho_ap,
            rho_ue,
            noise_ap,
            noise_ue,
            min_distance: default_min_distance(),
        };
        s.dl_set.sort_unstable();
        s.ul_set.sort_unstable();
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.ap_count == 0 || self.ue_count == 0 || self.ap_antennas == 0 || self.ue_antennas == 0 {
            return bad("AP count, UE count and antenna counts must be positive".into());
        }
        for (name, set) in [("DL", &self.dl_set), ("UL", &self.ul_set)] {
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("{name} set must be strictly increasing without duplicates"));
            }
            if let Some(&k) = set.iter().find(|&&k| k >= self.ue_count) {
                return bad(format!("{name} set contains UE {k} outside 0..{}", self.ue_count));
            }
        }
        let union: BTreeSet<usize> = self.dl_set.iter().chain(self.ul_set.iter()).copied().collect();
        if union.len() != self.ue_count {
            return bad(format!(
                "DL and UL sets cover {} of {} UEs; their union must be every UE",
                union.len(),
                self.ue_count
            ));
        }
        for (name, v) in [
            ("rho_ap", self.rho_ap),
            ("rho_ue", self.rho_ue),
            ("noise_ap", self.noise_ap),
            ("noise_ue", self.noise_ue),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be strictly positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Builds a scenario: grid (or uniform) APs, uniformly dropped UEs, and
/// validated service sets.
pub fn build_scenario<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    let area = config.area();
    if !(area > 0.0) {
        return Err(Error::InvalidScenario("area side must be positive".into()));
    }
    let ap_positions = match config.placement {
        Placement::Grid => {
            let side = config.grid_side().ok_or_else(|| {
                Error::InvalidScenario(format!(
                    "grid placement needs a perfect-square AP count, got {}",
                    config.ap_count
                ))
            })?;
            let half = config.ap_spacing / 2.0;
            let mut pos = Vec::with_capacity(config.ap_count);
            for i in 0..side {
                for j in 0..side {
                    pos.push([half + config.ap_spacing * i as f64, half + config.ap_spacing * j as f64]);
                }
            }
            pos
        }
        Placement::Uniform => (0..config.ap_count)
            .map(|_| [rng.random::<f64>() * area, rng.random::<f64>() * area])
            .collect(),
    };
    let ue_positions: Vec<[f64; 2]> = (0..config.ue_count)
        .map(|_| [rng.random::<f64>() * area, rng.random::<f64>() * area])
        .collect();

    let k = config.ue_count;
    let (dl_set, ul_set) = match &config.sets {
        ServiceSets::All => ((0..k).collect(), (0..k).collect()),
        ServiceSets::Explicit { dl, ul } => (dl.clone(), ul.clone()),
        ServiceSets::Sizes { dl, ul, shuffle } => {
            let (dl, ul) = (*dl, *ul);
            if dl > k || ul > k || dl + ul < k {
                return Err(Error::InvalidScenario(format!(
                    "set sizes |DL|={dl}, |UL|={ul} cannot cover {k} UEs"
                )));
            }
            let mut order: Vec<usize> = (0..k).collect();
            if *shuffle {
                order.shuffle(rng);
            }
            let dl_only = k - ul;
            let both = dl + ul - k;
            let dl_set: Vec<usize> = order[..dl_only + both].to_vec();
            let ul_set: Vec<usize> = order[dl_only..].to_vec();
            (dl_set, ul_set)
        }
    };

    let mut s = Scenario {
        ap_count: config.ap_count,
        ue_count: config.ue_count,
        ap_antennas: config.ap_antennas,
        ue_antennas: config.ue_antennas,
        ap_positions,
        ue_positions,
        dl_set,
        ul_set,
        rho_ap: dbm_to_watts(config.rho_ap_dbm),
        rho_ue: dbm_to_watts(config.rho_ue_dbm),
        noise_ap: dbm_to_watts(config.noise_ap_dbm),
        noise_ue: dbm_to_watts(config.noise_ue_dbm),
        min_distance: config.min_distance,
    };
    s.dl_set.sort_unstable();
    s.ul_set.sort_unstable();
    s.validate()?;
    Ok(s)
}

/// DL/UL UE pairs sharing one multicast precoder during training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    /// `(DL member, UL member)`; `None` is the phantom UE.
    pub pairs: Vec<(Option<usize>, Option<usize>)>,
    /// Pair index of every UE.
    pub group_of: Vec<usize>,
    /// Real UEs of every pair (one entry for self-pairs and phantom pairs).
    pub members: Vec<Vec<usize>>,
    /// `true` when the pair holds both a DL and a UL UE.
    pub active: Vec<bool>,
}

impl Pairing {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every real UE taking part in the pairing, ascending.
    pub fn ues(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.members.iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }

    pub fn phantom_slots(&self) -> usize {
        self.pairs.iter().filter(|(a, b)| a.is_none() || b.is_none()).count()
    }

    /// One pair per UE, in the given order (the UE-specific layout).
    pub fn identity(ues: &[usize], ue_count: usize) -> Self {
        let mut group_of = vec![usize::MAX; ue_count];
        for (g, &k) in ues.iter().enumerate() {
            group_of[k] = g;
        }
        Pairing {
            pairs: ues.iter().map(|&k| (Some(k), Some(k))).collect(),
            group_of,
            members: ues.iter().map(|&k| vec![k]).collect(),
            active: vec![true; ues.len()],
        }
    }
}

/// Pairs UEs for the virtual multicast design.
///
/// DL UEs are visited in ascending order: a DL-UL UE forms a self-pair, a
/// DL-only UE takes the next unused UL-only UE (or the phantom). Remaining
/// UL-only UEs are then paired with the phantom.
pub fn pair_ues(scenario: &Scenario) -> Pairing {
    let mut ul_only = scenario.ul_only().into_iter();
    let mut pairs = Vec::with_capacity(scenario.dl_set.len().max(scenario.ul_set.len()));
    for &k in &scenario.dl_set {
        if scenario.is_ul(k) {
            pairs.push((Some(k), Some(k)));
        } else {
            pairs.push((Some(k), ul_only.next()));
        }
    }
    pairs.extend(ul_only.map(|k| (None, Some(k))));

    let mut group_of = vec![usize::MAX; scenario.ue_count];
    let mut members = Vec::with_capacity(pairs.len());
    let mut active = Vec::with_capacity(pairs.len());
    for (g, &(a, b)) in pairs.iter().enumerate() {
        let mut m = Vec::with_capacity(2);
        if let Some(a) = a {
            group_of[a] = g;
            m.push(a);
        }
        if let Some(b) = b {
            group_of[b] = g;
            if Some(b) != a {
                m.push(b);
            }
        }
        members.push(m);
        active.push(a.is_some() && b.is_some());
    }
    Pairing {
        pairs,
        group_of,
        members,
        active,
    }
}
