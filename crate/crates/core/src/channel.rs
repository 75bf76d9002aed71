//! Per-(AP, UE) MIMO channels with distance-based path loss and first-order
//! (Gauss-Markov) temporal correlation across resource blocks.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::rng::complex_normal_mat;
use crate::scenario::Scenario;

/// Large-scale fading in dB at distance `d` meters: `-30.5 - 36.7 log10(d)`.
pub fn large_scale_db(d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {d}")));
    }
    Ok(-30.5 - 36.7 * d.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// UL-convention channels: `h(b, k)` is `M x N` and maps UE `k`'s antennas
/// to AP `b`'s antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub ap_count: usize,
    pub ue_count: usize,
    pub ap_antennas: usize,
    pub ue_antennas: usize,
    h: Vec<CMat>,
    delta: Vec<f64>,
    pub block: usize,
}

impl ChannelState {
    /// Builds a state from explicit matrices, indexed `b * K + k`.
    pub fn from_matrices(ap_count: usize, ue_count: usize, h: Vec<CMat>, delta: Vec<f64>) -> Result<Self> {
        if h.len() != ap_count * ue_count || delta.len() != h.len() || h.is_empty() {
            return Err(Error::InvalidArgument("channel array size does not match B*K".into()));
        }
        let (m, n) = h[0].shape();
        if h.iter().any(|x| x.shape() != (m, n)) {
            return Err(Error::InvalidArgument("all channel matrices must share one shape".into()));
        }
        if delta.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidArgument("large-scale coefficients must be positive".into()));
        }
        Ok(ChannelState {
            ap_count,
            ue_count,
            ap_antennas: m,
            ue_antennas: n,
            h,
            delta,
            block: 0,
        })
    }

    #[inline]
    pub fn h(&self, b: usize, k: usize) -> &CMat {
        &self.h[b * self.ue_count + k]
    }

    #[inline]
    pub fn delta(&self, b: usize, k: usize) -> f64 {
        self.delta[b * self.ue_count + k]
    }

    /// Next block: `H[t+1] = kappa H[t] + sqrt(1 - kappa^2) H~`, with a fresh
    /// innovation of per-entry variance `delta(b, k)`. `self` is unchanged.
    pub fn evolve<R: Rng + ?Sized>(&self, kappa: f64, rng: &mut R) -> Result<ChannelState> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidArgument(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        let inno = (1.0 - kappa * kappa).sqrt();
        let h = self
            .h
            .iter()
            .zip(&self.delta)
            .map(|(h, &d)| {
                // Draw even when kappa = 1 so the stream position does not depend on kappa.
                let fresh = complex_normal_mat(rng, self.ap_antennas, self.ue_antennas, d);
                if inno == 0.0 {
                    h.clone()
                } else {
                    h * crate::linalg::c(kappa, 0.0) + fresh * crate::linalg::c(inno, 0.0)
                }
            })
            .collect();
        Ok(ChannelState {
            h,
            delta: self.delta.clone(),
            block: self.block + 1,
            ..*self
        })
    }

    /// Dumps the flattened complex entries as CSV
    /// (`block,ap,ue,row,col,re,im`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["block", "ap", "ue", "row", "col", "re", "im"])?;
        for b in 0..self.ap_count {
            for k in 0..self.ue_count {
                let h = self.h(b, k);
                for col in 0..h.ncols() {
                    for row in 0..h.nrows() {
                        let z = h[(row, col)];
                        w.write_record([
                            self.block.to_string(),
                            b.to_string(),
                            k.to_string(),
                            row.to_string(),
                            col.to_string(),
                            z.re.to_string(),
                            z.im.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: "<channel dump>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Large-scale coefficients (linear) of every (AP, UE) link.
pub fn large_scale_coefficients(scenario: &Scenario) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(scenario.ap_count * scenario.ue_count);
    for b in 0..scenario.ap_count {
        for k in 0..scenario.ue_count {
            out.push(db_to_linear(large_scale_db(scenario.distance(b, k))?));
        }
    }
    Ok(out)
}

/// Block-0 channel: i.i.d. CN(0, delta) entries.
pub fn init_channel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<ChannelState> {
    let delta = large_scale_coefficients(scenario)?;
    let (m, n) = (scenario.ap_antennas, scenario.ue_antennas);
    let h = delta.iter().map(|&d| complex_normal_mat(rng, m, n, d)).collect();
    ChannelState::from_matrices(scenario.ap_count, scenario.ue_count, h, delta)
}

/// Channel at blocks `0..=blocks` from one stream.
pub fn channel_sequence<R: Rng + ?Sized>(
    scenario: &Scenario,
    kappa: f64,
    blocks: usize,
    rng: &mut R,
) -> Result<Vec<ChannelState>> {
    let mut seq = Vec::with_capacity(blocks + 1);
    seq.push(init_channel(scenario, rng)?);
    for _ in 0..blocks {
        let next = seq.last().expect("non-empty").evolve(kappa, rng)?;
        seq.push(next);
    }
    Ok(seq)
}
