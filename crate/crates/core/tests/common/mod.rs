#![allow(dead_code)]

use cellfree::channel::ChannelState;
use cellfree::linalg::CVec;
use cellfree::mmse_design::ApBeams;
use cellfree::rng::{complex_normal_mat, complex_normal_vec, SimRng};
use cellfree::scenario::Scenario;
use rand::Rng;

/// Unit-variance Rayleigh channel of the given size.
pub fn random_channel(rng: &mut SimRng, b: usize, k: usize, m: usize, n: usize) -> ChannelState {
    let h = (0..b * k).map(|_| complex_normal_mat(rng, m, n, 1.0)).collect();
    ChannelState::from_matrices(b, k, h, vec![1.0; b * k]).unwrap()
}

pub fn random_beams(rng: &mut SimRng, b: usize, streams: usize, m: usize, var: f64) -> ApBeams {
    ApBeams::from_fn(b, streams, m, |_, _| complex_normal_vec(rng, m, var))
}

pub fn random_vecs(rng: &mut SimRng, count: usize, n: usize) -> Vec<CVec> {
    (0..count).map(|_| complex_normal_vec(rng, n, 1.0)).collect()
}

/// Scenario with explicit service sets and unit powers.
pub fn scenario_with_sets(aps: usize, m: usize, n: usize, k: usize, dl: Vec<usize>, ul: Vec<usize>, powers: [f64; 4]) -> Scenario {
    Scenario::from_parts(
        (0..aps).map(|b| [10.0 * b as f64, 0.0]).collect(),
        (0..k).map(|i| [3.0 * i as f64, 5.0]).collect(),
        m,
        n,
        dl,
        ul,
        powers,
    )
    .unwrap()
}

/// Random DL/UL roles with at least one DL-only and one UL-only UE when
/// `k >= 3`.
pub fn random_sets(rng: &mut SimRng, k: usize) -> (Vec<usize>, Vec<usize>) {
    loop {
        let mut dl = Vec::new();
        let mut ul = Vec::new();
        for i in 0..k {
            match rng.random_range(0..3) {
                0 => dl.push(i),
                1 => ul.push(i),
                _ => {
                    dl.push(i);
                    ul.push(i);
                }
            }
        }
        let dl_only = dl.iter().any(|i| !ul.contains(i));
        let ul_only = ul.iter().any(|i| !dl.contains(i));
        if k < 3 || (dl_only && ul_only) {
            return (dl, ul);
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
