//! Perfect-CSI paired design: every DL UE shares a multicast precoder with
//! one UL UE (or the phantom UE), so training needs one pilot per pair.
//! The per-AP multicast precoders follow projected gradient descent on the
//! group MSE.

use crate::channel::ChannelState;
use crate::linalg::{c, hpd_solve, inner, norm_sq, outer, CMat, CVec, C64};
use crate::mmse_design::{ApBeams, UeBeams};
use crate::scenario::Pairing;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedBeamformerState {
    pub pairing: Pairing,
    /// Multicast precoders, stream = pair index.
    pub w: ApBeams,
    /// DL combiners indexed by global UE (zero for UEs outside the pairing).
    pub v: Vec<CVec>,
    /// Gradient step size.
    pub alpha: f64,
}

impl PairedBeamformerState {
    /// Every UE inherits the multicast precoder of its pair.
    pub fn to_ue_beams(&self) -> UeBeams {
        let ue_count = self.v.len();
        let mut w = ApBeams::zeros(self.w.aps(), ue_count, self.w.dim());
        for k in self.pairing.ues() {
            let g = self.pairing.group_of[k];
            for b in 0..self.w.aps() {
                w.set(b, k, self.w.get(b, g).clone());
            }
        }
        UeBeams { w, v: self.v.clone() }
    }
}

/// `m_{k,g} = sum_b H_{b,k}^H w_{b,g}`.
pub fn effective_dl_channel_paired(ch: &ChannelState, w: &ApBeams, ue: usize, g: usize) -> CVec {
    let mut m = CVec::zeros(ch.ue_antennas);
    for b in 0..ch.ap_count {
        m += ch.h(b, ue).adjoint() * w.get(b, g);
    }
    m
}

/// MMSE combiner of UE `ue` against its pair's beam, with every pair's beam
/// (its own partner's included) in the covariance.
pub fn update_combiner_paired(ch: &ChannelState, w: &ApBeams, ue: usize, pairing: &Pairing, sigma2: f64) -> CVec {
    let n = ch.ue_antennas;
    let own_g = pairing.group_of[ue];
    let mut cov = CMat::identity(n, n) * c(sigma2, 0.0);
    let mut own = CVec::zeros(n);
    for g in 0..pairing.len() {
        let m = effective_dl_channel_paired(ch, w, ue, g);
        cov += outer(&m, &m);
        if g == own_g {
            own = m;
        }
    }
    hpd_solve(&cov, &own)
}

/// Sum of group MSEs over every UE in the pairing.
pub fn gmse(ch: &ChannelState, w: &ApBeams, v: &[CVec], pairing: &Pairing, sigma2: f64) -> f64 {
    let mut total = 0.0;
    for k in pairing.ues() {
        let own_g = pairing.group_of[k];
        for g in 0..pairing.len() {
            let z = inner(&v[k], &effective_dl_channel_paired(ch, w, k, g));
            total += if g == own_g { (z - 1.0).norm_sqr() } else { z.norm_sqr() };
        }
        total += sigma2 * norm_sq(&v[k]);
    }
    total
}

/// Conjugate gradient `2 d(gmse)/d conj(w_{b,g})` for every `(b, g)`.
///
/// `delta_{b,g} = -2 (sum_{k in K_g} h_{b,k} - rho_{b,g} - sum_k h_{b,k} h_{b,k}^H w_{b,g})`
/// with `h_{b,k} = H_{b,k} v_k` and `rho_{b,g}` the other APs' contribution.
pub fn gradients_paired(ch: &ChannelState, v: &[CVec], w: &ApBeams, pairing: &Pairing) -> ApBeams {
    let ues = pairing.ues();
    let h: Vec<Vec<CVec>> = (0..ch.ap_count)
        .map(|b| ues.iter().map(|&k| ch.h(b, k) * &v[k]).collect())
        .collect();
    // s[i][g] = sum_b h_{b,k_i}^H w_{b,g}
    let s: Vec<Vec<C64>> = (0..ues.len())
        .map(|i| {
            (0..pairing.len())
                .map(|g| (0..ch.ap_count).map(|b| inner(&h[b][i], w.get(b, g))).sum())
                .collect()
        })
        .collect();
    ApBeams::from_fn(ch.ap_count, pairing.len(), ch.ap_antennas, |b, g| {
        let mut grad = CVec::zeros(ch.ap_antennas);
        for (i, &k) in ues.iter().enumerate() {
            let target = if pairing.group_of[k] == g { 1.0 } else { 0.0 };
            grad += &h[b][i] * (s[i][g] - target);
        }
        grad * c(2.0, 0.0)
    })
}

/// Single-entry convenience wrapper around [`gradients_paired`].
pub fn gradient_paired(ch: &ChannelState, v: &[CVec], w: &ApBeams, b: usize, g: usize, pairing: &Pairing) -> CVec {
    gradients_paired(ch, v, w, pairing).get(b, g).clone()
}

/// `w - alpha * grad`, then per-AP rescaling to `rho_ap`. With `literal`
/// the multiplier is `rho_ap / ||sum_g w_{b,g}||^2`.
pub fn gradient_step_project(w_prev: &ApBeams, grads: &ApBeams, alpha: f64, rho_ap: f64, literal: bool) -> ApBeams {
    let mut w = ApBeams::from_fn(w_prev.aps(), w_prev.streams(), w_prev.dim(), |b, g| {
        w_prev.get(b, g) - grads.get(b, g) * c(alpha, 0.0)
    });
    project_power(&mut w, rho_ap, literal);
    w
}

/// Rescales each AP's beams to total power `rho_ap`; all-zero APs stay zero.
pub fn project_power(w: &mut ApBeams, rho_ap: f64, literal: bool) {
    for b in 0..w.aps() {
        let factor = if literal {
            let mut sum = CVec::zeros(w.dim());
            for g in 0..w.streams() {
                sum += w.get(b, g);
            }
            let p = norm_sq(&sum);
            if p > 0.0 {
                rho_ap / p
            } else {
                0.0
            }
        } else {
            let p = w.ap_power(b);
            if p > 0.0 {
                (rho_ap / p).sqrt()
            } else {
                0.0
            }
        };
        if factor > 0.0 {
            for g in 0..w.streams() {
                *w.get_mut(b, g) *= c(factor, 0.0);
            }
        }
    }
}

/// `step_factor / max_b sum_k ||H_{b,k} v_k||^2`.
pub fn default_step(ch: &ChannelState, v: &[CVec], pairing: &Pairing, step_factor: f64) -> f64 {
    let ues = pairing.ues();
    let l = (0..ch.ap_count)
        .map(|b| ues.iter().map(|&k| norm_sq(&(ch.h(b, k) * &v[k]))).sum::<f64>())
        .fold(0.0_f64, f64::max);
    if l > 0.0 {
        step_factor / l
    } else {
        0.0
    }
}
