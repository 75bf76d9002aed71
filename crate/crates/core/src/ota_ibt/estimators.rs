//! Pilot-domain estimators run locally at a UE or an AP.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{c, hermitian_pinv_solve, CMat, CVec, HermitianEig};
use crate::mmse_design::{solve_power_dual, DualSolution};

use super::pilots::PilotBook;

/// Combiner from the DL reception: `(Y Y^H)^† Y p`. A zero reception gives
/// a zero combiner flagged as degenerate.
pub fn estimate_combiner_ota(y: &CMat, pilot: &CVec) -> (CVec, bool) {
    let yp = y * pilot;
    if y.norm_squared() == 0.0 {
        return (CVec::zeros(y.nrows()), true);
    }
    (hermitian_pinv_solve(&(y * y.adjoint()), &yp), false)
}

/// How the UL-2 term enters the AP-side estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ul2Term {
    /// Use the UL-2 reception.
    Observed,
    /// Replace it by the self-interference part estimated from UL-1,
    /// `(Y1 Y1^H - tau sigma2 I) w / sqrt(beta)`; cross-AP coupling is lost.
    SelfEstimate,
    /// Drop it.
    Zero,
}

/// Stand-in for `Y2 p` under the chosen treatment.
fn ul2_projection(
    y1y1h: &CMat,
    y2: Option<&CMat>,
    pilot: &CVec,
    w: &CVec,
    beta: f64,
    tau: f64,
    sigma2: f64,
    term: Ul2Term,
) -> CVec {
    match term {
        Ul2Term::Observed => y2.expect("UL-2 reception required") * pilot,
        Ul2Term::SelfEstimate => (y1y1h * w - w * c(tau * sigma2, 0.0)) / c(beta.sqrt(), 0.0),
        Ul2Term::Zero => CVec::zeros(w.len()),
    }
}

/// Precoder estimate at a given dual value:
/// `(Y1 Y1^H + tau (beta lambda - sigma2) I)^† (Y1 (sqrt(beta) p + Y1^H w) - sqrt(beta) Y2 p - tau sigma2 w)`.
///
/// `beta` here is the scale the UL signals carry as `sqrt(beta)`, i.e. the
/// reciprocal of the transmit normalization.
#[allow(clippy::too_many_arguments)]
pub fn estimate_precoder_ota(
    y1: &CMat,
    y2: &CMat,
    pilot: &CVec,
    w_prev: &CVec,
    lambda: f64,
    beta: f64,
    tau: usize,
    sigma2: f64,
) -> CVec {
    let t = tau as f64;
    let sb = beta.sqrt();
    let m = y1.nrows();
    let a = y1 * y1.adjoint() + CMat::identity(m, m) * c(t * (beta * lambda - sigma2), 0.0);
    let rhs = y1 * (pilot * c(sb, 0.0) + y1.adjoint() * w_prev) - (y2 * pilot) * c(sb, 0.0) - w_prev * c(t * sigma2, 0.0);
    hermitian_pinv_solve(&a, &rhs)
}

/// All precoders of one AP with the dual value chosen by bisection so that
/// their total power meets `rho_ap`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ap_precoders(
    y1: &CMat,
    y2: Option<&CMat>,
    pilots: &PilotBook,
    w_prev: &[CVec],
    beta: f64,
    sigma2: f64,
    rho_ap: f64,
    term: Ul2Term,
    ap: usize,
) -> Result<DualSolution> {
    let t = pilots.tau() as f64;
    let sb = beta.sqrt();
    let gram = y1 * y1.adjoint();
    let rhs: Vec<CVec> = w_prev
        .iter()
        .enumerate()
        .map(|(s, w)| {
            let p = pilots.pilot(s);
            let u2 = ul2_projection(&gram, y2, p, w, beta, t, sigma2, term);
            y1 * p * c(sb, 0.0) + &gram * w - u2 * c(sb, 0.0) - w * c(t * sigma2, 0.0)
        })
        .collect();
    let eig = HermitianEig::new(&gram);
    solve_power_dual(&eig, &rhs, rho_ap, -t * sigma2, t * beta, ap)
}

/// Gradient estimate `(2 / (tau sqrt(beta))) (Y1 - Y2) p`. In the
/// noise-free case this is the negative conjugate gradient of the group MSE.
pub fn estimate_gradient_ota(y1: &CMat, y2: &CMat, pilot: &CVec, beta: f64, tau: usize) -> CVec {
    (y1 - y2) * pilot * c(2.0 / (tau as f64 * beta.sqrt()), 0.0)
}

/// Gradient estimates of every stream at one AP.
pub fn estimate_ap_gradients(
    y1: &CMat,
    y2: Option<&CMat>,
    pilots: &PilotBook,
    w: &[CVec],
    beta: f64,
    sigma2: f64,
    term: Ul2Term,
) -> Vec<CVec> {
    let t = pilots.tau() as f64;
    let gram = y1 * y1.adjoint();
    w.iter()
        .enumerate()
        .map(|(s, ws)| {
            let p = pilots.pilot(s);
            let u2 = ul2_projection(&gram, y2, p, ws, beta, t, sigma2, term);
            (y1 * p - u2) * c(2.0 / (t * beta.sqrt()), 0.0)
        })
        .collect()
}

/// `(||Y1||_F^2 - tau M sigma2) / (tau beta)`, an estimate of
/// `sum_k ||H_{b,k} v_k||^2` (pair members summed coherently).
pub fn estimate_lipschitz(y1: &CMat, tau: usize, beta: f64, sigma2: f64) -> f64 {
    let t = tau as f64;
    ((y1.norm_squared() - t * y1.nrows() as f64 * sigma2) / (t * beta)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelState;
    use crate::linalg::{norm_sq, rel_err};
    use crate::mmse_design::{update_ap_precoders, update_combiner, ApBeams};
    use crate::ota_ibt::signals::{dl_training, ul_training, ul_training_1, StreamLayout};
    use crate::paired_design::gradients_paired;
    use crate::rng::{complex_normal_mat, complex_normal_vec, seeded};
    use crate::scenario::{pair_ues, Scenario};

    fn setup(b: usize, k: usize, m: usize, n: usize, seed: u64) -> (ChannelState, ApBeams, Vec<CVec>) {
        let mut rng = seeded(seed);
        let h = (0..b * k).map(|_| complex_normal_mat(&mut rng, m, n, 1.0)).collect();
        let ch = ChannelState::from_matrices(b, k, h, vec![1.0; b * k]).unwrap();
        let w = ApBeams::from_fn(b, k, m, |_, _| complex_normal_vec(&mut rng, m, 0.3));
        let v = (0..k).map(|_| complex_normal_vec(&mut rng, n, 1.0)).collect();
        (ch, w, v)
    }

    #[test]
    fn noise_free_combiner_matches_closed_form() {
        for seed in 0..5 {
            let (ch, w, _) = setup(3, 4, 3, 2, seed);
            let book = PilotBook::new(4, 4).unwrap();
            let ues = [0, 1, 2, 3];
            let layout = StreamLayout::ue_specific(&ues);
            let y = dl_training(&ch, &layout, &w, &book, 0.0, &mut seeded(1));
            for k in 0..4 {
                let (v, deg) = estimate_combiner_ota(&y[k], book.pilot(k));
                assert!(!deg);
                assert!(rel_err(&v, &update_combiner(&ch, &ues, &w, k, 0.0)) < 1e-8);
            }
        }
    }

    #[test]
    fn rank_one_combiner_direction() {
        let f = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0)]);
        let book = PilotBook::new(1, 3).unwrap();
        let y = &f * book.pilot(0).adjoint();
        let (v, _) = estimate_combiner_ota(&y, book.pilot(0));
        let cos = v.dotc(&f).norm() / (v.norm() * f.norm());
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reception_is_degenerate() {
        let (v, deg) = estimate_combiner_ota(&CMat::zeros(2, 4), &PilotBook::new(1, 4).unwrap().pilot(0).clone());
        assert!(deg);
        assert_eq!(v, CVec::zeros(2));
    }

    #[test]
    fn combiner_converges_with_long_pilots() {
        let (ch, w, _) = setup(2, 3, 3, 2, 20);
        let ues = [0, 1, 2];
        let sigma2 = 0.5;
        let layout = StreamLayout::ue_specific(&ues);
        let exact = update_combiner(&ch, &ues, &w, 0, sigma2);
        let err = |tau: usize, seed: u64| {
            let book = PilotBook::new(3, tau).unwrap();
            let y = dl_training(&ch, &layout, &w, &book, sigma2, &mut seeded(seed));
            rel_err(&estimate_combiner_ota(&y[0], book.pilot(0)).0, &exact)
        };
        let long: f64 = (0..10).map(|s| err(3 * 64 * 16, 100 + s)).sum::<f64>() / 10.0;
        let short: f64 = (0..10).map(|s| err(3, 200 + s)).sum::<f64>() / 10.0;
        assert!(long < 0.05, "long-pilot error {long}");
        assert!(long < short);
    }

    #[test]
    fn noise_free_precoder_matches_closed_form_at_unit_beta() {
        for seed in 0..5 {
            let (ch, w, v) = setup(3, 3, 4, 2, 30 + seed);
            let ues = [0, 1, 2];
            let book = PilotBook::new(3, 3).unwrap();
            let layout = StreamLayout::ue_specific(&ues);
            let mut rng = seeded(31);
            let y = dl_training(&ch, &layout, &w, &book, 0.0, &mut rng);
            let (y1, y2) = ul_training(&ch, &layout, &v, &y, &book, 1.0, 0.0, &mut rng);
            for b in 0..3 {
                let exact = update_ap_precoders(&ch, &ues, &v, &w, b, 1e-2).unwrap();
                for k in 0..3 {
                    let est = estimate_precoder_ota(&y1[b], &y2[b], book.pilot(k), w.get(b, k), exact.lambda, 1.0, 3, 0.0);
                    assert!(rel_err(&est, &exact.w[k]) < 1e-8);
                }
                let prev: Vec<CVec> = (0..3).map(|k| w.get(b, k).clone()).collect();
                let est = estimate_ap_precoders(&y1[b], Some(&y2[b]), &book, &prev, 1.0, 0.0, 1e-2, Ul2Term::Observed, b).unwrap();
                assert!((est.lambda - exact.lambda).abs() <= 1e-8 * exact.lambda.max(1.0));
                for k in 0..3 {
                    assert!(rel_err(&est.w[k], &exact.w[k]) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn reciprocal_beta_is_exact_and_literal_beta_is_biased() {
        let (ch, w, v) = setup(2, 2, 3, 2, 40);
        let ues = [0, 1];
        let book = PilotBook::new(2, 2).unwrap();
        let layout = StreamLayout::ue_specific(&ues);
        let mut rng = seeded(41);
        let y = dl_training(&ch, &layout, &w, &book, 0.0, &mut rng);
        let beta = 7.0;
        let (y1, y2) = ul_training(&ch, &layout, &v, &y, &book, beta, 0.0, &mut rng);
        let exact = update_ap_precoders(&ch, &ues, &v, &w, 0, 1e6).unwrap();
        assert_eq!(exact.lambda, 0.0);
        let recip = estimate_precoder_ota(&y1[0], &y2[0], book.pilot(0), w.get(0, 0), 0.0, 1.0 / beta, 2, 0.0);
        assert!(rel_err(&recip, &exact.w[0]) < 1e-8);
        let literal = estimate_precoder_ota(&y1[0], &y2[0], book.pilot(0), w.get(0, 0), 0.0, beta, 2, 0.0);
        assert!(rel_err(&literal, &exact.w[0]) > 1e-2);
    }

    #[test]
    fn precoder_converges_with_long_pilots() {
        let (ch, w, v) = setup(2, 2, 3, 2, 50);
        let ues = [0, 1];
        let layout = StreamLayout::ue_specific(&ues);
        let exact = update_ap_precoders(&ch, &ues, &v, &w, 0, 1.0).unwrap();
        let sigma2 = 0.2;
        let err = |tau: usize, seed: u64| {
            let book = PilotBook::new(2, tau).unwrap();
            let mut rng = seeded(seed);
            // noise-free DL keeps the test about the AP-side estimator
            let y = dl_training(&ch, &layout, &w, &book, 0.0, &mut rng);
            let (y1, y2) = ul_training(&ch, &layout, &v, &y, &book, 1.0, sigma2, &mut rng);
            let prev: Vec<CVec> = (0..2).map(|k| w.get(0, k).clone()).collect();
            let est = estimate_ap_precoders(&y1[0], Some(&y2[0]), &book, &prev, 1.0, sigma2, 1.0, Ul2Term::Observed, 0).unwrap();
            rel_err(&est.w[0], &exact.w[0])
        };
        let long: f64 = (0..5).map(|s| err(2 * 64 * 16, 60 + s)).sum::<f64>() / 5.0;
        let short: f64 = (0..5).map(|s| err(2, 70 + s)).sum::<f64>() / 5.0;
        assert!(long < 0.05, "long-pilot error {long}");
        assert!(long < short);
    }

    #[test]
    fn zero_combiners_give_bounded_output() {
        let (ch, _, _) = setup(1, 2, 3, 2, 80);
        let v = vec![CVec::zeros(2); 2];
        let layout = StreamLayout::ue_specific(&[0, 1]);
        let book = PilotBook::new(2, 8).unwrap();
        let y1 = ul_training_1(&ch, &layout, &v, &book, 1.0, 0.0, &mut seeded(81));
        let prev = vec![CVec::zeros(3); 2];
        let est = estimate_ap_precoders(&y1[0], None, &book, &prev, 1.0, 0.0, 1.0, Ul2Term::Zero, 0).unwrap();
        for w in &est.w {
            assert!(w.iter().all(|z| z.is_finite()));
            assert_eq!(norm_sq(w), 0.0);
        }
    }

    #[test]
    fn local_self_estimate_drops_cross_ap_terms() {
        // Noise-free: the surrogate yields (Phi_bb + lambda I)^{-1} h_{b,k}.
        let (ch, w, v) = setup(3, 3, 4, 2, 90);
        let ues = [0, 1, 2];
        let book = PilotBook::new(3, 3).unwrap();
        let layout = StreamLayout::ue_specific(&ues);
        let y1 = ul_training_1(&ch, &layout, &v, &book, 1.0, 0.0, &mut seeded(91));
        let zero = ApBeams::zeros(3, 3, 4);
        for b in 0..3 {
            let exact = update_ap_precoders(&ch, &ues, &v, &zero, b, 0.05).unwrap();
            let prev: Vec<CVec> = (0..3).map(|k| w.get(b, k).clone()).collect();
            let est = estimate_ap_precoders(&y1[b], None, &book, &prev, 1.0, 0.0, 0.05, Ul2Term::SelfEstimate, b).unwrap();
            for k in 0..3 {
                assert!(rel_err(&est.w[k], &exact.w[k]) < 1e-8);
            }
        }
    }

    fn paired_fixture(seed: u64) -> (ChannelState, ApBeams, Vec<CVec>, StreamLayout, crate::scenario::Pairing) {
        let s = Scenario::from_parts(
            vec![[0.0, 0.0], [5.0, 0.0]],
            (0..5).map(|i| [i as f64, 1.0]).collect(),
            3,
            2,
            vec![0, 1, 2, 4],
            vec![0, 2, 3],
            [1.0; 4],
        )
        .unwrap();
        let pairing = pair_ues(&s);
        let layout = StreamLayout::paired(&pairing);
        let mut rng = seeded(seed);
        let h = (0..10).map(|_| complex_normal_mat(&mut rng, 3, 2, 1.0)).collect();
        let ch = ChannelState::from_matrices(2, 5, h, vec![1.0; 10]).unwrap();
        let w = ApBeams::from_fn(2, pairing.len(), 3, |_, _| complex_normal_vec(&mut rng, 3, 0.3));
        let v = (0..5).map(|_| complex_normal_vec(&mut rng, 2, 1.0)).collect();
        (ch, w, v, layout, pairing)
    }

    #[test]
    fn noise_free_gradient_is_negative_closed_form() {
        for seed in 0..5 {
            let (ch, w, v, layout, pairing) = paired_fixture(100 + seed);
            let book = PilotBook::new(layout.streams, layout.streams).unwrap();
            let mut rng = seeded(1);
            let y = dl_training(&ch, &layout, &w, &book, 0.0, &mut rng);
            let (y1, y2) = ul_training(&ch, &layout, &v, &y, &book, 1.0, 0.0, &mut rng);
            let exact = gradients_paired(&ch, &v, &w, &pairing);
            for b in 0..2 {
                for g in 0..layout.streams {
                    let est = estimate_gradient_ota(&y1[b], &y2[b], book.pilot(g), 1.0, layout.streams);
                    assert!(rel_err(&est, &(exact.get(b, g) * c(-1.0, 0.0))) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_combiners_zero_gradient() {
        let (ch, w, _, layout, _) = paired_fixture(110);
        let v = vec![CVec::zeros(2); 5];
        let book = PilotBook::new(layout.streams, layout.streams).unwrap();
        let mut rng = seeded(2);
        let y = dl_training(&ch, &layout, &w, &book, 0.0, &mut rng);
        let (y1, y2) = ul_training(&ch, &layout, &v, &y, &book, 1.0, 0.0, &mut rng);
        let g = estimate_gradient_ota(&y1[0], &y2[0], book.pilot(1), 1.0, layout.streams);
        assert_eq!(g, CVec::zeros(3));
    }

    #[test]
    fn noise_only_gradient_decays_with_tau() {
        let m = 3;
        let mean_norm = |tau: usize| {
            let book = PilotBook::new(1, tau).unwrap();
            let mut rng = seeded(tau as u64);
            let trials = 200;
            let mut acc = CVec::zeros(m);
            let mut single = 0.0;
            for _ in 0..trials {
                let y1 = complex_normal_mat(&mut rng, m, tau, 1.0);
                let y2 = complex_normal_mat(&mut rng, m, tau, 1.0);
                let g = estimate_gradient_ota(&y1, &y2, book.pilot(0), 1.0, tau);
                single += g.norm();
                acc += g;
            }
            ((acc / c(trials as f64, 0.0)).norm(), single / trials as f64)
        };
        let (mean4, typ4) = mean_norm(4);
        let (mean64, typ64) = mean_norm(64);
        // empirical mean is near zero relative to a single draw
        assert!(mean4 < 0.2 * typ4);
        // single-draw size shrinks like 1/sqrt(tau): ratio 4
        let ratio = typ4 / typ64;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        assert!(mean64 < mean4);
    }

    #[test]
    fn lipschitz_estimate_noise_free() {
        let (ch, _, v) = setup(2, 3, 3, 2, 120);
        let layout = StreamLayout::ue_specific(&[0, 1, 2]);
        let book = PilotBook::new(3, 3).unwrap();
        let beta = 3.0;
        let y1 = ul_training_1(&ch, &layout, &v, &book, beta, 0.0, &mut seeded(3));
        let direct: f64 = (0..3).map(|k| norm_sq(&(ch.h(1, k) * &v[k]))).sum();
        // UL signals carry 1/sqrt(beta); the estimator takes the reciprocal
        let est = estimate_lipschitz(&y1[1], 3, 1.0 / beta, 0.0);
        assert!((est - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn pilot_domain_unbiased() {
        let (ch, w, _) = setup(1, 2, 2, 2, 130);
        let layout = StreamLayout::ue_specific(&[0, 1]);
        let book = PilotBook::new(2, 2).unwrap();
        let clean = dl_training(&ch, &layout, &w, &book, 0.0, &mut seeded(0));
        let target = &clean[0] * book.pilot(0) / c(2.0, 0.0);
        let mut rng = seeded(131);
        let trials = 10_000;
        let mut acc = CVec::zeros(2);
        for _ in 0..trials {
            let y = dl_training(&ch, &layout, &w, &book, 0.01, &mut rng);
            acc += &y[0] * book.pilot(0) / c(2.0, 0.0);
        }
        let mean = acc / c(trials as f64, 0.0);
        assert!(rel_err(&mean, &target) < 0.01);
    }
}
