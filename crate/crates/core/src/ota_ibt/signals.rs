//! Synthesis of the DL, UL-1 and UL-2 training receptions.

use rand::Rng;

use crate::channel::ChannelState;
use crate::linalg::{c, norm_sq, CMat, CVec};
use crate::mmse_design::ApBeams;
use crate::rng::complex_normal_mat;
use crate::scenario::Pairing;

use super::pilots::PilotBook;

/// Which UEs take part in training and which pilot (= precoder stream)
/// each of them uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamLayout {
    /// Participating UEs, ascending.
    pub ues: Vec<usize>,
    /// Pilot index of the UE at each position of `ues`.
    pub pilot_of: Vec<usize>,
    /// Number of pilots / precoder streams.
    pub streams: usize,
    /// Members of every stream, as positions into `ues`.
    pub members: Vec<Vec<usize>>,
}

impl StreamLayout {
    /// One pilot per UE.
    pub fn ue_specific(ues: &[usize]) -> Self {
        StreamLayout {
            ues: ues.to_vec(),
            pilot_of: (0..ues.len()).collect(),
            streams: ues.len(),
            members: (0..ues.len()).map(|i| vec![i]).collect(),
        }
    }

    /// One pilot per pair.
    pub fn paired(pairing: &Pairing) -> Self {
        let ues = pairing.ues();
        let pilot_of: Vec<usize> = ues.iter().map(|&k| pairing.group_of[k]).collect();
        let mut members = vec![Vec::new(); pairing.len()];
        for (pos, &g) in pilot_of.iter().enumerate() {
            members[g].push(pos);
        }
        StreamLayout {
            ues,
            pilot_of,
            streams: pairing.len(),
            members,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ues.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ues.is_empty()
    }
}

/// Received training signals of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct OtaSignals {
    /// `N x tau` per UE position.
    pub y_dl: Vec<CMat>,
    /// `M x tau` per AP.
    pub y_ul1: Vec<CMat>,
    /// `M x tau` per AP; absent for local variants.
    pub y_ul2: Option<Vec<CMat>>,
    pub beta: f64,
}

fn noise<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    if var > 0.0 {
        complex_normal_mat(rng, rows, cols, var)
    } else {
        CMat::zeros(rows, cols)
    }
}

/// DL training: every AP sends `sum_s w_{b,s} p_s^H`; UE `k` observes
/// `sum_b H_{b,k}^H X_b + Z_k`.
pub fn dl_training<R: Rng + ?Sized>(
    ch: &ChannelState,
    layout: &StreamLayout,
    w: &ApBeams,
    pilots: &PilotBook,
    sigma2_ue: f64,
    rng: &mut R,
) -> Vec<CMat> {
    let tau = pilots.tau();
    let x: Vec<CMat> = (0..ch.ap_count)
        .map(|b| {
            let mut xb = CMat::zeros(ch.ap_antennas, tau);
            for s in 0..layout.streams {
                xb += w.get(b, s) * pilots.pilot(s).adjoint();
            }
            xb
        })
        .collect();
    layout
        .ues
        .iter()
        .map(|&k| {
            let mut y = noise(rng, ch.ue_antennas, tau, sigma2_ue);
            for (b, xb) in x.iter().enumerate() {
                y += ch.h(b, k).adjoint() * xb;
            }
            y
        })
        .collect()
}

/// Largest per-channel-use transmit power over every UE and both UL
/// training signals, relative to `rho_ue`. With `y_dl = None` only UL-1 is
/// considered. Pilot entries have unit modulus.
pub fn compute_beta(v: &[CVec], y_dl: Option<&[CMat]>, rho_ue: f64) -> f64 {
    let mut peak = 0.0_f64;
    for (pos, vk) in v.iter().enumerate() {
        let e = norm_sq(vk);
        peak = peak.max(e);
        if let Some(y) = y_dl {
            let row = vk.adjoint() * &y[pos];
            let col_max = row.iter().fold(0.0_f64, |m, z| m.max(z.norm_sqr()));
            peak = peak.max(e * col_max);
        }
    }
    peak / rho_ue
}

/// UL-1: UE `k` sends `v_k p_k^H / sqrt(beta)`.
pub fn ul_training_1<R: Rng + ?Sized>(
    ch: &ChannelState,
    layout: &StreamLayout,
    v: &[CVec],
    pilots: &PilotBook,
    beta: f64,
    sigma2_ap: f64,
    rng: &mut R,
) -> Vec<CMat> {
    let amp = c(1.0 / beta.sqrt(), 0.0);
    let x: Vec<CMat> = (0..layout.len())
        .map(|pos| (&v[pos] * pilots.pilot(layout.pilot_of[pos]).adjoint()) * amp)
        .collect();
    ul_receive(ch, layout, &x, pilots.tau(), sigma2_ap, rng)
}

/// UL-2: UE `k` echoes `v_k v_k^H Y_k / sqrt(beta)`.
pub fn ul_training_2<R: Rng + ?Sized>(
    ch: &ChannelState,
    layout: &StreamLayout,
    v: &[CVec],
    y_dl: &[CMat],
    beta: f64,
    sigma2_ap: f64,
    rng: &mut R,
) -> Vec<CMat> {
    let amp = c(1.0 / beta.sqrt(), 0.0);
    let tau = y_dl.first().map_or(0, |y| y.ncols());
    let x: Vec<CMat> = (0..layout.len())
        .map(|pos| (&v[pos] * (v[pos].adjoint() * &y_dl[pos])) * amp)
        .collect();
    ul_receive(ch, layout, &x, tau, sigma2_ap, rng)
}

fn ul_receive<R: Rng + ?Sized>(
    ch: &ChannelState,
    layout: &StreamLayout,
    x: &[CMat],
    tau: usize,
    sigma2_ap: f64,
    rng: &mut R,
) -> Vec<CMat> {
    (0..ch.ap_count)
        .map(|b| {
            let mut y = noise(rng, ch.ap_antennas, tau, sigma2_ap);
            for (pos, &k) in layout.ues.iter().enumerate() {
                y += ch.h(b, k) * &x[pos];
            }
            y
        })
        .collect()
}

/// Both UL receptions of one block.
#[allow(clippy::too_many_arguments)]
pub fn ul_training<R: Rng + ?Sized>(
    ch: &ChannelState,
    layout: &StreamLayout,
    v: &[CVec],
    y_dl: &[CMat],
    pilots: &PilotBook,
    beta: f64,
    sigma2_ap: f64,
    rng: &mut R,
) -> (Vec<CMat>, Vec<CMat>) {
    let y1 = ul_training_1(ch, layout, v, pilots, beta, sigma2_ap, rng);
    let y2 = ul_training_2(ch, layout, v, y_dl, beta, sigma2_ap, rng);
    (y1, y2)
}
