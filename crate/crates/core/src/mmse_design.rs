//! Perfect-CSI UE-specific design: alternating minimization of the network
//! sum MSE with the closed-form MMSE combiner and the per-AP regularized
//! precoder, followed by the DL/UL scaling rules for data transmission.
//!
//! All functions take a `ues` slice naming the UEs the design is run over
//! (every UE for the combined design, one service set for the separate
//! designs). Per-UE quantities are indexed by position in that slice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::linalg::{c, hpd_solve, inner, norm_sq, outer, CMat, CVec, HermitianEig, C64, RANK_CUTOFF};
use crate::rng::complex_normal_vec;
use crate::scenario::Scenario;

/// Vectors indexed by `(AP, stream)`; a stream is a UE or a UE pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ApBeams {
    aps: usize,
    streams: usize,
    dim: usize,
    data: Vec<CVec>,
}

impl ApBeams {
    pub fn zeros(aps: usize, streams: usize, dim: usize) -> Self {
        ApBeams {
            aps,
            streams,
            dim,
            data: vec![CVec::zeros(dim); aps * streams],
        }
    }

    pub fn from_fn(aps: usize, streams: usize, dim: usize, mut f: impl FnMut(usize, usize) -> CVec) -> Self {
        let mut data = Vec::with_capacity(aps * streams);
        for b in 0..aps {
            for s in 0..streams {
                let v = f(b, s);
                assert_eq!(v.len(), dim, "beam dimension mismatch");
                data.push(v);
            }
        }
        ApBeams { aps, streams, dim, data }
    }

    #[inline]
    pub fn aps(&self) -> usize {
        self.aps
    }
    #[inline]
    pub fn streams(&self) -> usize {
        self.streams
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, b: usize, s: usize) -> &CVec {
        &self.data[b * self.streams + s]
    }

    #[inline]
    pub fn get_mut(&mut self, b: usize, s: usize) -> &mut CVec {
        &mut self.data[b * self.streams + s]
    }

    pub fn set(&mut self, b: usize, s: usize, v: CVec) {
        assert_eq!(v.len(), self.dim);
        self.data[b * self.streams + s] = v;
    }

    /// Total transmit power of AP `b` over all streams.
    pub fn ap_power(&self, b: usize) -> f64 {
        (0..self.streams).map(|s| norm_sq(self.get(b, s))).sum()
    }

    /// Power of AP `b` restricted to the given streams.
    pub fn ap_power_over(&self, b: usize, streams: &[usize]) -> f64 {
        streams.iter().map(|&s| norm_sq(self.get(b, s))).sum()
    }
}

/// Order of the per-AP precoder updates within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateOrder {
    /// Every AP updates from the previous iterate (distributed setting).
    Jacobi,
    /// APs update one after another using the latest precoders.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecoderInit {
    /// First channel column of every link, equal power split.
    Conjugate,
    /// i.i.d. complex Gaussian, equal power split.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    /// UEs the design runs over.
    pub ues: Vec<usize>,
    /// DL precoders, stream = position in `ues`.
    pub w_dl: ApBeams,
    /// DL combiners, one per position in `ues`.
    pub v_dl: Vec<CVec>,
    /// Power dual variable per AP.
    pub lambda: Vec<f64>,
}

impl BeamformerState {
    /// Maps the design onto global UE indices.
    pub fn to_ue_beams(&self, ue_count: usize) -> UeBeams {
        let n = self.v_dl.first().map_or(0, |v| v.len());
        let mut w = ApBeams::zeros(self.w_dl.aps(), ue_count, self.w_dl.dim());
        let mut v = vec![CVec::zeros(n); ue_count];
        for (pos, &k) in self.ues.iter().enumerate() {
            for b in 0..self.w_dl.aps() {
                w.set(b, k, self.w_dl.get(b, pos).clone());
            }
            v[k] = self.v_dl[pos].clone();
        }
        UeBeams { w, v }
    }
}

/// `f_{k, s} = sum_b H_{b,k}^H w_{b,s}` for global UE `ue` and stream `s`.
pub fn effective_dl_channel(ch: &ChannelState, w: &ApBeams, ue: usize, stream: usize) -> CVec {
    let mut f = CVec::zeros(ch.ue_antennas);
    for b in 0..ch.ap_count {
        f += ch.h(b, ue).adjoint() * w.get(b, stream);
    }
    f
}

/// Closed-form MMSE combiner of the UE at position `pos`:
/// `(sum_j f_{k,j} f_{k,j}^H + sigma2 I)^{-1} f_{k,k}`, the sum running over
/// every stream of the design.
pub fn update_combiner(ch: &ChannelState, ues: &[usize], w: &ApBeams, pos: usize, sigma2: f64) -> CVec {
    let k = ues[pos];
    let n = ch.ue_antennas;
    let mut cov = CMat::identity(n, n) * c(sigma2, 0.0);
    let mut own = CVec::zeros(n);
    for j in 0..ues.len() {
        let f = effective_dl_channel(ch, w, k, j);
        cov += outer(&f, &f);
        if j == pos {
            own = f;
        }
    }
    hpd_solve(&cov, &own)
}

/// `h_{b,k} = H_{b,k} v_k` for every AP and design position, AP-major.
pub fn effective_uplink(ch: &ChannelState, ues: &[usize], v: &[CVec]) -> Vec<CVec> {
    let mut out = Vec::with_capacity(ch.ap_count * ues.len());
    for b in 0..ch.ap_count {
        for (pos, &k) in ues.iter().enumerate() {
            out.push(ch.h(b, k) * &v[pos]);
        }
    }
    out
}

/// Result of the per-AP power-constrained solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub w: Vec<CVec>,
    pub lambda: f64,
    /// The regularized matrix was singular (or indefinite) at the returned
    /// dual value and the truncated pseudoinverse was used.
    pub degenerate: bool,
}

const BISECTION_MAX_ITERS: usize = 200;
const BISECTION_REL_TOL: f64 = 1e-9;

/// Finds the smallest `lambda >= 0` such that
/// `sum_k ||(A + s(lambda) I)^† r_k||^2 <= rho`, with
/// `s(lambda) = shift0 + slope * lambda` and `A = eig`.
///
/// The power is strictly decreasing in `s` wherever `A + s I` is positive
/// definite, so bisection on `s` is used once a bracket is found by
/// geometric growth.
pub fn solve_power_dual(
    eig: &HermitianEig,
    rhs: &[CVec],
    rho: f64,
    shift0: f64,
    slope: f64,
    ap: usize,
) -> Result<DualSolution> {
    if !(rho > 0.0) || !(slope > 0.0) {
        return Err(Error::InvalidArgument("power budget and dual slope must be positive".into()));
    }
    let coords: Vec<CVec> = rhs.iter().map(|r| eig.project(r)).collect();
    let total: f64 = coords.iter().map(norm_sq).sum();
    let finish = |s: f64, degenerate: bool| DualSolution {
        w: coords.iter().map(|cd| eig.solve_projected(cd, s)).collect(),
        lambda: ((s - shift0) / slope).max(0.0),
        degenerate,
    };
    if total == 0.0 {
        return Ok(finish(shift0, false));
    }

    // Power with truncation, plus the mass on the truncated directions.
    let power = |s: f64| -> (f64, f64) {
        let max = eig.values.iter().fold(0.0_f64, |m, v| m.max((v + s).abs()));
        let tol = RANK_CUTOFF * max;
        let mut p = 0.0;
        let mut null = 0.0;
        for cd in &coords {
            for (i, z) in cd.iter().enumerate() {
                let d = eig.values[i] + s;
                if d > tol {
                    p += z.norm_sqr() / (d * d);
                } else {
                    null += z.norm_sqr();
                }
            }
        }
        (p, null)
    };
    let negligible = |null: f64| null <= 1e-20 * total;

    let mu_min = eig.min_value();
    let (p0, null0) = power(shift0);
    if negligible(null0) && p0 <= rho {
        let definite = mu_min + shift0 > RANK_CUTOFF * (eig.max_abs() + shift0.abs());
        return Ok(finish(shift0, !definite));
    }

    let lo0 = shift0.max(-mu_min);
    if lo0 > shift0 {
        let (p, null) = power(lo0);
        if negligible(null) && p <= rho {
            return Ok(finish(lo0, true));
        }
    }

    let mut lo = lo0;
    let mut step = (total / rho).sqrt() / 1024.0;
    let mut hi = lo + step;
    let mut grow = 0;
    while power(hi).0 >= rho {
        step *= 2.0;
        hi = lo + step;
        grow += 1;
        if grow > 2000 {
            return Err(Error::BisectionFailed {
                ap,
                iterations: grow,
                rel_error: f64::INFINITY,
            });
        }
    }

    let mut last_err = f64::INFINITY;
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let (p, _) = power(mid);
        last_err = (p - rho).abs() / rho;
        if last_err < BISECTION_REL_TOL {
            return Ok(finish(mid, false));
        }
        if p > rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    let (p_hi, _) = power(hi);
    let err_hi = (p_hi - rho).abs() / rho;
    if err_hi < BISECTION_REL_TOL {
        return Ok(finish(hi, false));
    }
    Err(Error::BisectionFailed {
        ap,
        iterations: BISECTION_MAX_ITERS,
        rel_error: last_err.min(err_hi),
    })
}

/// Regularized per-AP precoders of AP `b`:
/// `w_{b,k} = (Phi_bb + lambda_b I)^{-1} (h_{b,k} - xi_{b,k})` for every
/// position `k`, where `xi` carries the other APs' current precoders.
pub fn update_ap_precoders(
    ch: &ChannelState,
    ues: &[usize],
    v: &[CVec],
    w_prev: &ApBeams,
    b: usize,
    rho_ap: f64,
) -> Result<DualSolution> {
    let h = effective_uplink(ch, ues, v);
    update_ap_precoders_with(&h, ues.len(), ch.ap_count, w_prev, b, rho_ap)
}

fn update_ap_precoders_with(
    h: &[CVec],
    kt: usize,
    aps: usize,
    w_prev: &ApBeams,
    b: usize,
    rho_ap: f64,
) -> Result<DualSolution> {
    let m = w_prev.dim();
    let hb = |bb: usize, j: usize| &h[bb * kt + j];
    let mut phi = CMat::zeros(m, m);
    for j in 0..kt {
        phi += outer(hb(b, j), hb(b, j));
    }
    // cross[j][k] = sum_{b' != b} h_{b',j}^H w_{b',k}
    let mut rhs = Vec::with_capacity(kt);
    for k in 0..kt {
        let mut xi = CVec::zeros(m);
        for j in 0..kt {
            let mut s = C64::new(0.0, 0.0);
            for bb in (0..aps).filter(|&bb| bb != b) {
                s += inner(hb(bb, j), w_prev.get(bb, k));
            }
            xi += hb(b, j) * s;
        }
        rhs.push(hb(b, k) - xi);
    }
    let eig = HermitianEig::new(&phi);
    solve_power_dual(&eig, &rhs, rho_ap, 0.0, 1.0, b)
}

/// Relaxed update `(1 - gamma) w_prev + gamma w_opt`.
pub fn best_response_update(w_opt: &CVec, w_prev: &CVec, gamma: f64) -> Result<CVec> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("relaxation must lie in (0, 1], got {gamma}")));
    }
    Ok(w_prev * c(1.0 - gamma, 0.0) + w_opt * c(gamma, 0.0))
}

/// Closed-form network sum MSE over the design's UEs.
pub fn sum_mse(ch: &ChannelState, ues: &[usize], w: &ApBeams, v: &[CVec], sigma2: f64) -> f64 {
    let mut total = 0.0;
    for (pos, &k) in ues.iter().enumerate() {
        let vk = &v[pos];
        for j in 0..ues.len() {
            let g = inner(vk, &effective_dl_channel(ch, w, k, j));
            total += if j == pos { (g - 1.0).norm_sqr() } else { g.norm_sqr() };
        }
        total += sigma2 * norm_sq(vk);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternateOptions {
    pub iters: usize,
    pub rho_ap: f64,
    pub sigma_ue: f64,
    /// Best-response relaxation in (0, 1].
    pub gamma: f64,
    pub order: UpdateOrder,
}

/// One precoder sweep over every AP. Returns the new precoders and duals.
pub fn precoder_sweep(
    ch: &ChannelState,
    ues: &[usize],
    v: &[CVec],
    w: &ApBeams,
    rho_ap: f64,
    gamma: f64,
    order: UpdateOrder,
) -> Result<(ApBeams, Vec<f64>)> {
    let kt = ues.len();
    let h = effective_uplink(ch, ues, v);
    let mut next = w.clone();
    let mut lambda = vec![0.0; ch.ap_count];
    for b in 0..ch.ap_count {
        let base = match order {
            UpdateOrder::Jacobi => w,
            UpdateOrder::Sequential => &next,
        };
        let sol = update_ap_precoders_with(&h, kt, ch.ap_count, base, b, rho_ap)?;
        lambda[b] = sol.lambda;
        for (k, w_opt) in sol.w.iter().enumerate() {
            let upd = best_response_update(w_opt, w.get(b, k), gamma)?;
            next.set(b, k, upd);
        }
    }
    Ok((next, lambda))
}

/// Alternating optimization: every iteration updates all combiners, then
/// all precoders. The trace holds the sum MSE after each half-step.
pub fn alternate(
    ch: &ChannelState,
    init: &BeamformerState,
    opts: &AlternateOptions,
) -> Result<(BeamformerState, Vec<f64>)> {
    let mut state = init.clone();
    let mut trace = Vec::with_capacity(2 * opts.iters);
    let ues = state.ues.clone();
    for _ in 0..opts.iters {
        state.v_dl = (0..ues.len())
            .map(|pos| update_combiner(ch, &ues, &state.w_dl, pos, opts.sigma_ue))
            .collect();
        trace.push(sum_mse(ch, &ues, &state.w_dl, &state.v_dl, opts.sigma_ue));
        let (w, lambda) = precoder_sweep(ch, &ues, &state.v_dl, &state.w_dl, opts.rho_ap, opts.gamma, opts.order)?;
        state.w_dl = w;
        state.lambda = lambda;
        trace.push(sum_mse(ch, &ues, &state.w_dl, &state.v_dl, opts.sigma_ue));
    }
    Ok((state, trace))
}

/// Initial precoders with an equal power split `rho_ap / |ues|` per stream.
pub fn init_precoders<R: Rng + ?Sized>(
    ch: &ChannelState,
    ues: &[usize],
    mode: PrecoderInit,
    rho_ap: f64,
    rng: &mut R,
) -> ApBeams {
    let per = if ues.is_empty() { 0.0 } else { rho_ap / ues.len() as f64 };
    ApBeams::from_fn(ch.ap_count, ues.len(), ch.ap_antennas, |b, pos| {
        let raw = match mode {
            PrecoderInit::Conjugate => ch.h(b, ues[pos]).column(0).into_owned(),
            PrecoderInit::Random => complex_normal_vec(rng, ch.ap_antennas, 1.0),
        };
        let n = raw.norm();
        if n > 0.0 {
            raw * c(per.sqrt() / n, 0.0)
        } else {
            raw
        }
    })
}

/// Unit-norm starting combiners: a fixed basis direction per UE perturbed by
/// seeded noise. UEs hold no CSI before the first DL training phase.
pub fn init_combiners<R: Rng + ?Sized>(ue_antennas: usize, count: usize, rng: &mut R) -> Vec<CVec> {
    (0..count)
        .map(|i| {
            let mut v = complex_normal_vec(rng, ue_antennas, 0.1);
            v[i % ue_antennas] += c(1.0, 0.0);
            let n = v.norm();
            v / c(n, 0.0)
        })
        .collect()
}

/// Beams indexed by global UE: `w(b, k)` is the DL precoder trained for UE
/// `k` (zero if the UE was not part of the design), `v[k]` its combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct UeBeams {
    pub w: ApBeams,
    pub v: Vec<CVec>,
}

/// Switches between the power-exact scaling rules (default) and the
/// literal multiplier rules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingOptions {
    /// Multiply by `rho / sum ||w||^2` instead of its square root (DL data
    /// scaling and the paired-design projection by the norm of the sum).
    pub literal: bool,
    /// Use the DL-scaled precoders (rather than the trained ones) as UL combiners.
    pub ul_combiner_post_scaling: bool,
}

/// Beams used for the data phases of one block, indexed by global UE.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBeams {
    /// Scaled DL precoders (zero for UEs outside the DL set).
    pub w_dl: ApBeams,
    pub v_dl: Vec<CVec>,
    /// UL precoders with `||v||^2 = rho_ue` (zero outside the UL set).
    pub v_ul: Vec<CVec>,
    pub w_ul: ApBeams,
    /// APs whose DL precoders were all zero.
    pub silent_aps: Vec<usize>,
    /// UL UEs whose combiner was zero (they transmit nothing).
    pub degenerate_ul: Vec<usize>,
}

impl DataBeams {
    /// DL beams from `dl`, UL beams from `ul`.
    pub fn merge(dl: DataBeams, ul: DataBeams) -> DataBeams {
        DataBeams {
            w_dl: dl.w_dl,
            v_dl: dl.v_dl,
            v_ul: ul.v_ul,
            w_ul: ul.w_ul,
            silent_aps: dl.silent_aps,
            degenerate_ul: ul.degenerate_ul,
        }
    }
}

/// Per-AP DL data scaling factors over the DL set.
fn dl_factors(beams: &UeBeams, scenario: &Scenario, opts: ScalingOptions) -> Vec<f64> {
    (0..beams.w.aps())
        .map(|b| {
            let p = beams.w.ap_power_over(b, &scenario.dl_set);
            if p > 0.0 {
                if opts.literal {
                    scenario.rho_ap / p
                } else {
                    (scenario.rho_ap / p).sqrt()
                }
            } else {
                0.0
            }
        })
        .collect()
}

/// Scales trained beams for data: DL precoders of UL-only UEs are dropped
/// and each AP is renormalized to full power; DL combiners of UL UEs are
/// reused as UL precoders at full UE power and the trained precoders as UL
/// combiners.
pub fn scale_for_data(beams: &UeBeams, scenario: &Scenario, opts: ScalingOptions) -> DataBeams {
    let aps = beams.w.aps();
    let kk = scenario.ue_count;
    let m = beams.w.dim();
    let n = scenario.ue_antennas;
    let factors = dl_factors(beams, scenario, opts);

    let mut w_dl = ApBeams::zeros(aps, kk, m);
    let mut v_dl = vec![CVec::zeros(n); kk];
    for &k in &scenario.dl_set {
        for b in 0..aps {
            w_dl.set(b, k, beams.w.get(b, k) * c(factors[b], 0.0));
        }
        v_dl[k] = beams.v[k].clone();
    }
    let silent_aps = (0..aps).filter(|&b| factors[b] == 0.0).collect();

    let mut v_ul = vec![CVec::zeros(n); kk];
    let mut w_ul = ApBeams::zeros(aps, kk, m);
    let mut degenerate_ul = Vec::new();
    for &k in &scenario.ul_set {
        let norm = beams.v[k].norm();
        if norm > 0.0 {
            v_ul[k] = &beams.v[k] * c(scenario.rho_ue.sqrt() / norm, 0.0);
        } else {
            degenerate_ul.push(k);
        }
        for b in 0..aps {
            let scale = if opts.ul_combiner_post_scaling { factors[b] } else { 1.0 };
            w_ul.set(b, k, beams.w.get(b, k) * c(scale, 0.0));
        }
    }
    DataBeams {
        w_dl,
        v_dl,
        v_ul,
        w_ul,
        silent_aps,
        degenerate_ul,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_err;
    use crate::rng::{complex_normal_mat, seeded};

    fn random_channel(b: usize, k: usize, m: usize, n: usize, seed: u64) -> ChannelState {
        let mut rng = seeded(seed);
        let h = (0..b * k).map(|_| complex_normal_mat(&mut rng, m, n, 1.0)).collect();
        ChannelState::from_matrices(b, k, h, vec![1.0; b * k]).unwrap()
    }

    fn random_state(ch: &ChannelState, seed: u64, rho: f64) -> BeamformerState {
        let mut rng = seeded(seed);
        let ues: Vec<usize> = (0..ch.ue_count).collect();
        let w = init_precoders(ch, &ues, PrecoderInit::Random, rho, &mut rng);
        let v = (0..ues.len()).map(|_| complex_normal_vec(&mut rng, ch.ue_antennas, 1.0)).collect();
        BeamformerState {
            ues,
            w_dl: w,
            v_dl: v,
            lambda: vec![0.0; ch.ap_count],
        }
    }

    #[test]
    fn effective_channel_identity_and_zero() {
        let h = vec![CMat::identity(3, 3)];
        let ch = ChannelState::from_matrices(1, 1, h, vec![1.0]).unwrap();
        let mut w = ApBeams::zeros(1, 1, 3);
        assert_eq!(effective_dl_channel(&ch, &w, 0, 0), CVec::zeros(3));
        w.get_mut(0, 0)[0] = c(1.0, 0.0);
        let f = effective_dl_channel(&ch, &w, 0, 0);
        assert_eq!(f, CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
    }

    #[test]
    fn effective_channel_matches_loop_sum() {
        let ch = random_channel(3, 2, 4, 2, 8);
        let st = random_state(&ch, 9, 1.0);
        let f = effective_dl_channel(&ch, &st.w_dl, 1, 0);
        // explicit element-wise triple loop
        let mut g = vec![C64::new(0.0, 0.0); 2];
        for b in 0..3 {
            let hm = ch.h(b, 1);
            for i in 0..2 {
                for r in 0..4 {
                    g[i] += hm[(r, i)].conj() * st.w_dl.get(b, 0)[r];
                }
            }
        }
        assert!(rel_err(&f, &CVec::from_vec(g)) < 1e-12);
    }

    #[test]
    fn single_ue_combiner_is_scaled_effective_channel() {
        let ch = random_channel(2, 1, 3, 2, 1);
        let st = random_state(&ch, 2, 1.0);
        let f = effective_dl_channel(&ch, &st.w_dl, 0, 0);
        let sigma2 = 0.37;
        let v = update_combiner(&ch, &[0], &st.w_dl, 0, sigma2);
        let expected = &f / c(norm_sq(&f) + sigma2, 0.0);
        assert!(rel_err(&v, &expected) < 1e-12);
    }

    #[test]
    fn combiner_matches_dense_solver() {
        let ch = random_channel(2, 3, 4, 2, 3);
        let st = random_state(&ch, 4, 1.0);
        let sigma2 = 0.05;
        let v = update_combiner(&ch, &st.ues, &st.w_dl, 1, sigma2);
        let mut a = CMat::identity(2, 2) * c(sigma2, 0.0);
        for j in 0..3 {
            let f = effective_dl_channel(&ch, &st.w_dl, 1, j);
            a += &f * f.adjoint();
        }
        let rhs = effective_dl_channel(&ch, &st.w_dl, 1, 1);
        let x = a.lu().solve(&rhs).unwrap();
        assert!(rel_err(&v, &x) < 1e-10);
    }

    #[test]
    fn combiner_noise_dominated_limit_is_matched_filter() {
        let ch = random_channel(2, 3, 4, 2, 5);
        let st = random_state(&ch, 6, 1.0);
        let v = update_combiner(&ch, &st.ues, &st.w_dl, 0, 1e9);
        let f = effective_dl_channel(&ch, &st.w_dl, 0, 0);
        let cos = inner(&v, &f).norm() / (v.norm() * f.norm());
        assert!((cos - 1.0).abs() < 1e-6);
    }

    #[test]
    fn combiner_is_stationary_point() {
        let ch = random_channel(2, 3, 3, 2, 10);
        let mut st = random_state(&ch, 11, 1.0);
        let sigma2 = 0.1;
        st.v_dl = (0..3).map(|p| update_combiner(&ch, &st.ues, &st.w_dl, p, sigma2)).collect();
        let base = sum_mse(&ch, &st.ues, &st.w_dl, &st.v_dl, sigma2);
        let mut rng = seeded(12);
        for _ in 0..10 {
            let mut d = complex_normal_vec(&mut rng, 2, 1.0);
            d /= c(d.norm(), 0.0);
            let mut v = st.v_dl.clone();
            v[1] += d * c(1e-3, 0.0);
            assert!(sum_mse(&ch, &st.ues, &st.w_dl, &v, sigma2) > base);
        }
    }

    #[test]
    fn inactive_constraint_gives_zero_dual() {
        let ch = random_channel(2, 2, 2, 2, 13);
        let st = random_state(&ch, 14, 1.0);
        let sol = update_ap_precoders(&ch, &st.ues, &st.v_dl, &st.w_dl, 0, 1e12).unwrap();
        assert_eq!(sol.lambda, 0.0);
        // w = Phi^{-1} (h - xi)
        let h = effective_uplink(&ch, &st.ues, &st.v_dl);
        let mut phi = CMat::zeros(2, 2);
        for j in 0..2 {
            phi += outer(&h[j], &h[j]);
        }
        for k in 0..2 {
            let mut xi = CVec::zeros(2);
            for j in 0..2 {
                xi += &h[j] * inner(&h[2 + j], st.w_dl.get(1, k));
            }
            let expected = phi.clone().lu().solve(&(&h[k] - xi)).unwrap();
            assert!(rel_err(&sol.w[k], &expected) < 1e-8);
        }
    }

    #[test]
    fn tight_budget_bisection_matches_golden_section() {
        // B = 1 (no coupling), M = 2, K = 2, tiny budget.
        let ch = random_channel(1, 2, 2, 2, 15);
        let st = random_state(&ch, 16, 1.0);
        let rho = 1e-3;
        let sol = update_ap_precoders(&ch, &st.ues, &st.v_dl, &st.w_dl, 0, rho).unwrap();
        assert!(sol.lambda > 0.0);
        let p: f64 = sol.w.iter().map(norm_sq).sum();
        assert!((p - rho).abs() / rho < 1e-9);

        // Golden-section search on |P(lambda) - rho| with direct solves.
        let h = effective_uplink(&ch, &st.ues, &st.v_dl);
        let phi = outer(&h[0], &h[0]) + outer(&h[1], &h[1]);
        let power = |lam: f64| -> f64 {
            let a = &phi + CMat::identity(2, 2) * c(lam, 0.0);
            let lu = a.lu();
            (0..2).map(|k| norm_sq(&lu.solve(&h[k]).unwrap())).sum()
        };
        let (mut lo, mut hi) = (0.0_f64, 1e4_f64);
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let a = hi - gr * (hi - lo);
            let b = lo + gr * (hi - lo);
            if (power(a) - rho).abs() < (power(b) - rho).abs() {
                hi = b;
            } else {
                lo = a;
            }
        }
        let lam = 0.5 * (lo + hi);
        assert!((power(lam) - rho).abs() / rho < 1e-8);
        assert!((lam - sol.lambda).abs() / lam < 1e-6);
    }

    #[test]
    fn precoder_update_is_block_optimal() {
        // Projected-gradient oracle on AP 0's block with the others fixed.
        let ch = random_channel(2, 2, 2, 2, 17);
        let st = random_state(&ch, 18, 1.0);
        let rho = 0.2;
        let sigma2 = 0.1;
        let sol = update_ap_precoders(&ch, &st.ues, &st.v_dl, &st.w_dl, 0, rho).unwrap();
        let mut w_best = st.w_dl.clone();
        for k in 0..2 {
            w_best.set(0, k, sol.w[k].clone());
        }
        let f_best = sum_mse(&ch, &st.ues, &w_best, &st.v_dl, sigma2);

        let h = effective_uplink(&ch, &st.ues, &st.v_dl);
        let mut w = st.w_dl.clone();
        for k in 0..2 {
            w.set(0, k, CVec::zeros(2));
        }
        let lmax: f64 = (0..2).map(|j| norm_sq(&h[j])).sum::<f64>();
        let step = 0.5 / lmax;
        for _ in 0..20_000 {
            let mut next = w.clone();
            for k in 0..2 {
                // gradient wrt conj(w_{0,k}): sum_b' Phi_{0b'} w_{b',k} - h_{0,k}
                let mut g = -h[k].clone();
                for j in 0..2 {
                    let s = inner(&h[j], w.get(0, k)) + inner(&h[2 + j], w.get(1, k));
                    g += &h[j] * s;
                }
                next.set(0, k, w.get(0, k) - g * c(step, 0.0));
            }
            let p = next.ap_power(0);
            if p > rho {
                let s = (rho / p).sqrt();
                for k in 0..2 {
                    let x = next.get(0, k) * c(s, 0.0);
                    next.set(0, k, x);
                }
            }
            w = next;
        }
        let f_pg = sum_mse(&ch, &st.ues, &w, &st.v_dl, sigma2);
        assert!(f_best <= f_pg + 1e-6, "closed form {f_best} vs oracle {f_pg}");
        assert!((f_best - f_pg).abs() < 1e-6);
    }

    #[test]
    fn complementary_slackness() {
        let ch = random_channel(3, 3, 2, 2, 19);
        let st = random_state(&ch, 20, 1.0);
        for rho in [1e-4, 1e-2, 1.0, 1e3] {
            for b in 0..3 {
                let sol = update_ap_precoders(&ch, &st.ues, &st.v_dl, &st.w_dl, b, rho).unwrap();
                let p: f64 = sol.w.iter().map(norm_sq).sum();
                assert!(sol.lambda >= 0.0);
                assert!(p <= rho * (1.0 + 1e-9));
                if sol.lambda > 0.0 {
                    assert!((p - rho).abs() / rho < 1e-9);
                }
            }
        }
    }

    #[test]
    fn best_response_rules() {
        let a = CVec::from_vec(vec![c(1.0, 2.0), c(-3.0, 0.5)]);
        let z = CVec::zeros(2);
        assert_eq!(best_response_update(&a, &z, 1.0).unwrap(), a);
        assert!(rel_err(&best_response_update(&a, &z, 0.5).unwrap(), &(&a * c(0.5, 0.0))) < 1e-15);
        assert!(best_response_update(&a, &z, 0.0).is_err());
        assert!(best_response_update(&a, &z, 1.5).is_err());
        let b = CVec::from_vec(vec![c(0.0, -1.0), c(2.0, 2.0)]);
        let m = best_response_update(&a, &b, 0.3).unwrap();
        // on the segment: |m - b| + |a - m| == |a - b|
        let lhs = (&m - &b).norm() + (&a - &m).norm();
        assert!((lhs - (&a - &b).norm()).abs() < 1e-12);
    }

    #[test]
    fn sum_mse_plug_ins() {
        let ch = random_channel(2, 3, 2, 2, 21);
        let st = random_state(&ch, 22, 1.0);
        let zero = ApBeams::zeros(2, 3, 2);
        let sigma2 = 0.2;
        let expect: f64 = st.v_dl.iter().map(|v| 1.0 + sigma2 * norm_sq(v)).sum();
        assert!((sum_mse(&ch, &st.ues, &zero, &st.v_dl, sigma2) - expect).abs() < 1e-12);
        let vz = vec![CVec::zeros(2); 3];
        assert!((sum_mse(&ch, &st.ues, &zero, &vz, sigma2) - 3.0).abs() < 1e-15);

        // single UE, v^H f = 1
        let ch1 = random_channel(1, 1, 2, 2, 23);
        let st1 = random_state(&ch1, 24, 1.0);
        let f = effective_dl_channel(&ch1, &st1.w_dl, 0, 0);
        let v = &f / c(norm_sq(&f), 0.0);
        let mse = sum_mse(&ch1, &[0], &st1.w_dl, &[v.clone()], sigma2);
        assert!((mse - sigma2 * norm_sq(&v)).abs() < 1e-12);
    }

    #[test]
    fn sum_mse_matches_symbol_monte_carlo() {
        let ch = random_channel(2, 3, 2, 2, 25);
        let st = random_state(&ch, 26, 1.0);
        let sigma2 = 0.3;
        let closed = sum_mse(&ch, &st.ues, &st.w_dl, &st.v_dl, sigma2);
        let f: Vec<Vec<CVec>> = (0..3)
            .map(|k| (0..3).map(|j| effective_dl_channel(&ch, &st.w_dl, k, j)).collect())
            .collect();
        let mut rng = seeded(27);
        let trials = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let d: Vec<C64> = (0..3).map(|_| crate::rng::complex_normal(&mut rng, 1.0)).collect();
            for k in 0..3 {
                let mut y = complex_normal_vec(&mut rng, 2, sigma2);
                for j in 0..3 {
                    y += &f[k][j] * d[j];
                }
                acc += (inner(&st.v_dl[k], &y) - d[k]).norm_sqr();
            }
        }
        let mc = acc / trials as f64;
        assert!((mc - closed).abs() / closed < 0.01, "mc {mc} closed {closed}");
    }

    #[test]
    fn alternate_zero_iterations_is_identity() {
        let ch = random_channel(2, 2, 2, 2, 28);
        let st = random_state(&ch, 29, 1.0);
        let opts = AlternateOptions {
            iters: 0,
            rho_ap: 1.0,
            sigma_ue: 0.1,
            gamma: 0.5,
            order: UpdateOrder::Jacobi,
        };
        let (out, trace) = alternate(&ch, &st, &opts).unwrap();
        assert_eq!(out, st);
        assert!(trace.is_empty());
    }

    #[test]
    fn alternate_sequential_is_monotone() {
        let ch = random_channel(3, 4, 3, 2, 30);
        let st = random_state(&ch, 31, 1.0);
        let opts = AlternateOptions {
            iters: 30,
            rho_ap: 1.0,
            sigma_ue: 0.05,
            gamma: 1.0,
            order: UpdateOrder::Sequential,
        };
        let (_, trace) = alternate(&ch, &st, &opts).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn single_user_reaches_closed_form_optimum() {
        // K = B = 1: optimum MSE is 1 / (1 + rho s_max^2 / sigma2).
        let ch = random_channel(1, 1, 3, 2, 32);
        let st = random_state(&ch, 33, 1.0);
        let opts = AlternateOptions {
            iters: 200,
            rho_ap: 1.0,
            sigma_ue: 0.01,
            gamma: 1.0,
            order: UpdateOrder::Sequential,
        };
        let (conv, _) = alternate(&ch, &st, &opts).unwrap();
        let s_max = ch.h(0, 0).singular_values().max();
        let optimum = 1.0 / (1.0 + s_max * s_max / 0.01);
        let final_mse = sum_mse(&ch, &[0], &conv.w_dl, &conv.v_dl, 0.01);
        assert!((final_mse - optimum).abs() / optimum < 1e-6, "{final_mse} vs {optimum}");
    }

    #[test]
    fn scaling_rules() {
        let s = Scenario::from_parts(
            vec![[0.0, 0.0]],
            vec![[1.0, 0.0], [2.0, 0.0]],
            2,
            2,
            vec![0],
            vec![0, 1],
            [4.0, 0.1, 1.0, 1.0],
        )
        .unwrap();
        let mut w = ApBeams::zeros(1, 2, 2);
        w.set(0, 0, CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])); // norm^2 = rho_ap / 4
        w.set(0, 1, CVec::from_vec(vec![c(0.0, 3.0), c(0.0, 0.0)]));
        let u = CVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let beams = UeBeams {
            w: w.clone(),
            v: vec![u.clone() * c(0.0, 7.0), u.clone() * c(3.0, 0.0)],
        };
        let data = scale_for_data(&beams, &s, ScalingOptions::default());
        // UL-only UE 1 dropped from DL, AP renormalized to rho_ap
        assert_eq!(data.w_dl.get(0, 1), &CVec::zeros(2));
        assert!((data.w_dl.ap_power(0) - 4.0).abs() / 4.0 < 1e-12);
        // UL precoder: sqrt(rho_ue) times the unit direction, whatever the scale
        let target = &u * c(0.1f64.sqrt(), 0.0);
        assert!(rel_err(&data.v_ul[1], &target) < 1e-12);
        assert!((norm_sq(&data.v_ul[0]) - 0.1).abs() < 1e-12);
        // UL combiners are the trained precoders
        assert_eq!(data.w_ul.get(0, 1), w.get(0, 1));
        assert!(data.degenerate_ul.is_empty());

        let lit = scale_for_data(&beams, &s, ScalingOptions { literal: true, ul_combiner_post_scaling: true });
        // literal: a_b = rho / P = 4 multiplies amplitudes, power 16 * 1
        assert!((lit.w_dl.ap_power(0) - 16.0).abs() < 1e-12);
        assert!(rel_err(lit.w_ul.get(0, 1), &(w.get(0, 1) * c(4.0, 0.0))) < 1e-15);
    }

    #[test]
    fn zero_combiner_is_flagged() {
        let s = Scenario::from_parts(vec![[0.0, 0.0]], vec![[1.0, 0.0]], 2, 2, vec![0], vec![0], [1.0; 4]).unwrap();
        let beams = UeBeams {
            w: ApBeams::from_fn(1, 1, 2, |_, _| CVec::from_element(2, c(1.0, 0.0))),
            v: vec![CVec::zeros(2)],
        };
        let data = scale_for_data(&beams, &s, ScalingOptions::default());
        assert_eq!(data.degenerate_ul, vec![0]);
        assert_eq!(data.v_ul[0], CVec::zeros(2));
    }
}
