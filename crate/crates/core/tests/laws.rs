//! Monte Carlo checks of simulated laws against exact ones, through the
//! public API only.

use besqlab_core::analytic::{besq_transition_cdf, gamma_cdf, zeta_cdf};
use besqlab_core::brownian::{brownian_until_local_time, LocalTimeEstimator};
use besqlab_core::samplers::{sample_absorption_time, sample_besq_transition};
use besqlab_core::sde::{
    besq_absorption_time, compose_additive, integrate_besq, integrate_besq_steps, scale_path, StoppingRule,
};
use besqlab_core::skew::streaming::{run_embedding_batch, EmbeddingSpec};
use besqlab_core::skew::{build_skew_coupling_with, positive_excursion_probability};
use besqlab_core::verify::stats::{ks_test, ks_two_sample, mean_within};
use besqlab_core::RandomStream;
use statrs::function::erf::erfc;

fn assert_passes(t: besqlab_core::verify::TestResult) {
    assert!(t.passed, "{t:?}");
}

#[test]
fn skew_motion_spends_one_plus_gamma_over_two_below_zero() {
    let gamma = 0.5;
    let fractions: Vec<f64> = (0..400)
        .map(|i| {
            let mut s = RandomStream::replicate(3, 0, i);
            let c = build_skew_coupling_with(gamma, 1e-3, 1.0, LocalTimeEstimator::Sampled, &mut s).unwrap();
            let below = c.x.values[1..].iter().filter(|&&x| x < 0.0).count();
            below as f64 / c.x.steps() as f64
        })
        .collect();
    assert_passes(mean_within(&fractions, (1.0 + gamma) / 2.0, 4.0));
    assert!((positive_excursion_probability(gamma) - 0.25).abs() < 1e-15);
}

#[test]
fn skew_local_time_at_one_is_half_normal() {
    let ell: Vec<f64> = (0..1000)
        .map(|i| {
            let mut s = RandomStream::replicate(4, 0, i);
            let c = build_skew_coupling_with(0.3, 1e-3, 1.0, LocalTimeEstimator::Sampled, &mut s).unwrap();
            c.ell.terminal()
        })
        .collect();
    let t = ks_test("ell(1)", &ell, |l| if l <= 0.0 { 0.0 } else { 1.0 - erfc(l / 2f64.sqrt()) }).unwrap();
    assert_passes(t);
}

#[test]
fn frontier_and_excursion_structure_of_coupling() {
    let mut s = RandomStream::new(5, 0);
    let c = build_skew_coupling_with(0.4, 1e-4, 1.0, LocalTimeEstimator::Sampled, &mut s).unwrap();
    assert!(c.ell.values.windows(2).all(|w| w[1] >= w[0]));
    for k in 0..c.b.len() {
        let recon = c.x.values[k] + c.gamma * c.ell.values[k];
        assert!((recon - c.b.values[k]).abs() < 1e-12);
    }
}

#[test]
fn inverse_local_time_has_stable_law() {
    let v = 0.5;
    let taus: Vec<f64> = (0..600)
        .map(|i| {
            let mut s = RandomStream::replicate(6, 0, i);
            brownian_until_local_time(v, 1e-3, LocalTimeEstimator::Bridge, 1e7, &mut s).unwrap().1
        })
        .collect();
    // P(τ(v) ≤ t) = P(|N| ≥ v/√t).
    let t = ks_test("tau", &taus, |t| if t <= 0.0 { 0.0 } else { erfc(v / (2.0 * t).sqrt()) }).unwrap();
    assert_passes(t);
}

#[test]
fn scaled_path_is_besq_from_scaled_start() {
    let (delta, z) = (2.0, 3.0);
    let terminals: Vec<f64> = (0..800)
        .map(|i| {
            let mut s = RandomStream::replicate(7, 0, i);
            // Y from 1 up to time 1/z, so z·Y(w/z) is a BESQ_z(δ) at w = 1.
            let unit = integrate_besq(delta, 1.0, 1e-3 / z, 1.0 / z, &mut s).unwrap();
            scale_path(z, &unit).unwrap().terminal()
        })
        .collect();
    let t = ks_test("scaled", &terminals, |y| besq_transition_cdf(delta, 1.0, z, y).unwrap()).unwrap();
    assert_passes(t);
}

#[test]
fn negative_dimension_absorption_time_matches_inverse_gamma() {
    let (delta, v) = (1.0, 1.0);
    let times: Vec<f64> = (0..800)
        .map(|i| {
            let mut s = RandomStream::replicate(8, 0, i);
            besq_absorption_time(-delta, v, 1e-4, 10_000_000, &mut s).unwrap().unwrap()
        })
        .collect();
    assert_passes(ks_test("zeta", &times, |m| zeta_cdf(delta, v, m)).unwrap());

    let mut s = RandomStream::new(9, 0);
    let exact: Vec<f64> = (0..800).map(|_| sample_absorption_time(delta, v, &mut s).unwrap()).collect();
    assert_passes(ks_two_sample("zeta two-sample", &times, &exact).unwrap());
}

#[test]
fn composite_at_fixed_time_is_besq_of_summed_dimension() {
    // Y ~ BESQ_0(1) and Y' ~ BESQ_1(2) added up to T = 0.5, continued as
    // BESQ(3): at time 1 the result is BESQ_1(3).
    let dt = 1e-3;
    let n = 1000;
    let z: Vec<f64> = (0..800)
        .map(|i| {
            let mut s = RandomStream::replicate(10, 0, i);
            let y = integrate_besq_steps(1.0, 0.0, dt, n, &mut s).unwrap();
            let yp = integrate_besq_steps(2.0, 1.0, dt, n, &mut s).unwrap();
            let p = compose_additive(&y, &yp, &StoppingRule::FixedTime(0.5), 3.0, &mut s).unwrap();
            assert!((p.values[500] - y.values[500] - yp.values[500]).abs() < 1e-12);
            p.terminal()
        })
        .collect();
    assert_passes(ks_test("composite", &z, |x| besq_transition_cdf(3.0, 1.0, 1.0, x).unwrap()).unwrap());
}

#[test]
fn transition_sampler_at_zero_start_is_scaled_gamma() {
    let mut s = RandomStream::new(11, 0);
    let draws: Vec<f64> = (0..2000)
        .map(|_| sample_besq_transition(3.0, 0.0, 0.7, &mut s).unwrap())
        .collect();
    assert_passes(ks_test("gamma", &draws, |y| gamma_cdf(1.5, y / 1.4)).unwrap());
}

#[test]
fn embedding_profiles_add_up_and_tau_has_stable_law() {
    let v = 1.0;
    let spec = EmbeddingSpec::adaptive(1.0, v, vec![0.25, 0.5], 1e-4);
    let batch = run_embedding_batch(&spec, 400, 12, 0).unwrap();
    let mut taus = Vec::new();
    for o in &batch.outcomes {
        let yv = o.yv();
        for i in 0..2 {
            assert!((o.ymix[i] + yv[i] - o.ltau[i]).abs() < 1e-12);
            assert!(yv[i] >= 0.0 && o.yd[i] >= 0.0);
            assert!(o.ymix[i] <= o.yd[i] + 1e-12);
        }
        assert!(o.zeta >= 0.0);
        assert!(o.frontier[0] <= o.frontier[1]);
        taus.push(o.tau);
    }
    assert_passes(ks_test("tau", &taus, |t| if t <= 0.0 { 0.0 } else { erfc(v / (2.0 * t).sqrt()) }).unwrap());

    // Same seed, same block: identical outcomes.
    let again = run_embedding_batch(&spec, 400, 12, 0).unwrap();
    assert_eq!(batch.outcomes, again.outcomes);
}
