//! Skew Brownian motion `X_γ = B − γℓ_γ`, the frontier
//! `S_δ(x) = inf{t : γℓ_γ(t) > x}` with `γ = 1/(1+δ)`, and the splitting of
//! the local times of `B` along that frontier.
//!
//! For `v > 0` and `τ(v)` the inverse local time of `B` at 0:
//!
//! * `Yd(x) = L(x, S_δ(x))` is a BESQ₀(δ) in the level variable;
//! * `Yv(x) = L(x, τ(v)) − L(x, S_δ(x) ∧ τ(v))` is a BESQ_v(−δ);
//! * `ζ'(v) = inf{x : S_δ(x) > τ(v)} = γℓ_γ(τ(v))` is its absorption level;
//! * `Ymix(x) = L(x, S_δ(x) ∧ τ(v))`, so `Ymix + Yv = L(·, τ(v))`, a
//!   BESQ_v(0).
//!
//! [`build_skew_coupling`] and the functions taking a [`SkewCoupling`] work
//! on stored paths with a fixed step. [`streaming`] runs the same
//! construction without storing paths, with adaptive steps, and is what the
//! experiments use.

mod stepper;
pub mod streaming;

pub use stepper::{positive_excursion_probability, ScaleSolver, SkewStepper, Step};

use crate::brownian::{cumulative_local_time, LocalTimeEstimator};
use crate::error::{invalid, positive, Error, Result};
use crate::path::Path;
use crate::rng::RandomStream;

/// `γ = 1/(1+δ)`.
pub fn gamma_for_delta(delta: f64) -> Result<f64> {
    positive("delta", delta)?;
    if delta.is_infinite() {
        return Err(invalid("delta", "must be finite"));
    }
    Ok(1.0 / (1.0 + delta))
}

/// `μ⁺ = 2γ/(1−γ)`, so that `2/μ⁺ = δ` when `γ = 1/(1+δ)`.
pub fn mu_plus(gamma: f64) -> f64 {
    2.0 * gamma / (1.0 - gamma)
}

/// `μ⁻ = 2γ/(1+γ)`, so that `2 − 2/μ⁻ = −δ` when `γ = 1/(1+δ)`.
pub fn mu_minus(gamma: f64) -> f64 {
    2.0 * gamma / (1.0 + gamma)
}

/// Jointly built paths `B`, `X = B − γℓ` and `ℓ` on one grid.
#[derive(Debug, Clone)]
pub struct SkewCoupling {
    pub gamma: f64,
    pub b: Path,
    pub x: Path,
    pub ell: Path,
    pub estimator: LocalTimeEstimator,
}

/// Skew Brownian coupling on `[0, horizon]` with step `dt`; `ℓ` uses the
/// default window estimator `h = 5√dt`.
pub fn build_skew_coupling(gamma: f64, dt: f64, horizon: f64, s: &mut RandomStream) -> Result<SkewCoupling> {
    build_skew_coupling_with(gamma, dt, horizon, LocalTimeEstimator::default_window(0.0, dt), s)
}

pub fn build_skew_coupling_with(
    gamma: f64,
    dt: f64,
    horizon: f64,
    estimator: LocalTimeEstimator,
    s: &mut RandomStream,
) -> Result<SkewCoupling> {
    let n = crate::sde::steps_for(horizon, dt)?;
    let mut st = SkewStepper::new(gamma, estimator)?;
    let (mut b, mut x, mut ell) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
    b.push(0.0);
    x.push(0.0);
    ell.push(0.0);
    for _ in 0..n {
        st.step(dt, s);
        b.push(st.b);
        x.push(st.x());
        ell.push(st.ell);
    }
    Ok(SkewCoupling {
        gamma,
        b: Path::new(0.0, dt, b)?,
        x: Path::new(0.0, dt, x)?,
        ell: Path::new(0.0, dt, ell)?,
        estimator,
    })
}

/// `S_δ(x)` on a level grid; `f64::INFINITY` when the frontier has not
/// passed `x` within the coupling's horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub delta: f64,
    pub levels: Vec<f64>,
    pub times: Vec<f64>,
}

fn check_gamma(delta: f64, gamma: f64) -> Result<()> {
    let g = gamma_for_delta(delta)?;
    if (g - gamma).abs() > 1e-12 {
        return Err(invalid(
            "delta",
            format!("coupling skewness {gamma} does not match 1/(1+δ) = {g}"),
        ));
    }
    Ok(())
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() || levels.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("levels", "must be nonnegative, finite and strictly increasing"));
    }
    Ok(())
}

/// First grid index at which `front` exceeds `x`.
fn first_exceed(front: &[f64], x: f64) -> Option<usize> {
    front.iter().position(|&f| f > x)
}

pub fn frontier(delta: f64, c: &SkewCoupling, levels: &[f64]) -> Result<Frontier> {
    check_gamma(delta, c.gamma)?;
    check_levels(levels)?;
    let front: Vec<f64> = c.ell.values.iter().map(|l| c.gamma * l).collect();
    let times = levels
        .iter()
        .map(|&x| first_exceed(&front, x).map_or(f64::INFINITY, |k| c.b.time(k)))
        .collect();
    Ok(Frontier {
        delta,
        levels: levels.to_vec(),
        times,
    })
}

/// Local-time profiles of `B` split along the frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub levels: Vec<f64>,
    pub yd: Vec<f64>,
    pub yv: Vec<f64>,
    pub ymix: Vec<f64>,
    pub ltau: Vec<f64>,
    pub zeta: f64,
    pub tau: f64,
}

pub fn decompose(c: &SkewCoupling, delta: f64, v: f64, levels: &[f64]) -> Result<Decomposition> {
    check_gamma(delta, c.gamma)?;
    check_levels(levels)?;
    positive("v", v)?;
    let l0 = cumulative_local_time(&c.b, 0.0, c.estimator)?;
    let k_tau = first_exceed(&l0, v).ok_or(Error::HorizonExhausted {
        reached: *l0.last().unwrap(),
        target: v,
    })?;
    let front: Vec<f64> = c.ell.values.iter().map(|l| c.gamma * l).collect();
    let mut out = Decomposition {
        levels: levels.to_vec(),
        yd: Vec::new(),
        yv: Vec::new(),
        ymix: Vec::new(),
        ltau: Vec::new(),
        zeta: front[k_tau],
        tau: c.b.time(k_tau),
    };
    for &x in levels {
        let k_s = first_exceed(&front, x).ok_or(Error::HorizonExhausted {
            reached: *front.last().unwrap(),
            target: x,
        })?;
        let lx = cumulative_local_time(&c.b, x, c.estimator)?;
        let mix = lx[k_s.min(k_tau)];
        out.yd.push(lx[k_s]);
        out.ltau.push(lx[k_tau]);
        out.ymix.push(mix);
        out.yv.push(lx[k_tau] - mix);
    }
    Ok(out)
}

/// Increments between the frontiers of two dimensions on one driving `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedDecomposition {
    pub levels: Vec<f64>,
    /// `L(x, S_{δ₂}(x))` for the smaller dimension.
    pub top: Vec<f64>,
    /// `L(x, S_{δ₁}(x)) − L(x, S_{δ₂}(x))`.
    pub mid: Vec<f64>,
    /// Levels at which the discretized frontiers crossed the wrong way and
    /// `S_{δ₁}` was raised to `S_{δ₂}`.
    pub order_violations: usize,
}

/// Frontier of the larger dimension `delta1` (smaller skewness
/// `γ₁ = 1/(1+δ₁)`) computed from the coupling's `B` via [`ScaleSolver`],
/// and the local-time increments between it and the coupling's own frontier
/// at `delta2`. The larger dimension has the later frontier,
/// `S_{δ₂} ≤ S_{δ₁}`.
pub fn nested_decompose(c: &SkewCoupling, delta1: f64, delta2: f64, levels: &[f64]) -> Result<NestedDecomposition> {
    if !(delta1 > delta2) {
        return Err(invalid("delta1", format!("must exceed delta2 = {delta2}")));
    }
    check_gamma(delta2, c.gamma)?;
    check_levels(levels)?;
    let gamma1 = gamma_for_delta(delta1)?;
    let mut solver = ScaleSolver::new(gamma1)?;
    let mut front1 = Vec::with_capacity(c.b.len());
    front1.push(0.0);
    for w in c.b.values.windows(2) {
        solver.step(w[1] - w[0]);
        front1.push(w[1] - solver.x());
    }
    let front2: Vec<f64> = c.ell.values.iter().map(|l| c.gamma * l).collect();
    let mut out = NestedDecomposition {
        levels: levels.to_vec(),
        top: Vec::new(),
        mid: Vec::new(),
        order_violations: 0,
    };
    for &x in levels {
        let exhausted = |f: &[f64]| Error::HorizonExhausted {
            reached: *f.last().unwrap(),
            target: x,
        };
        let k2 = first_exceed(&front2, x).ok_or_else(|| exhausted(&front2))?;
        let mut k1 = first_exceed(&front1, x).ok_or_else(|| exhausted(&front1))?;
        if k1 < k2 {
            out.order_violations += 1;
            k1 = k2;
        }
        let lx = cumulative_local_time(&c.b, x, c.estimator)?;
        out.top.push(lx[k2]);
        out.mid.push(lx[k1] - lx[k2]);
    }
    Ok(out)
}

/// `W⁺ = B∘κ⁺` and `W⁻ = −B∘κ⁻`: `B` watched only while `X` is positive,
/// respectively negative. A step belongs to the sign of `X` at its start
/// (the next sign when it starts at 0); each path records `±B` at the ends
/// of its steps.
pub fn split_timechange(c: &SkewCoupling) -> Result<(Path, Path)> {
    let (mut plus, mut minus) = (vec![c.b.values[0]], vec![-c.b.values[0]]);
    let xs = &c.x.values;
    for k in 0..c.x.steps() {
        let sgn = if xs[k] != 0.0 { xs[k] } else { xs[k + 1] };
        if sgn >= 0.0 {
            plus.push(c.b.values[k + 1]);
        } else {
            minus.push(-c.b.values[k + 1]);
        }
    }
    Ok((Path::new(0.0, c.b.dt, plus)?, Path::new(0.0, c.b.dt, minus)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_map() {
        for &delta in &[0.5, 1.0, 2.0, 3.0] {
            let g = gamma_for_delta(delta).unwrap();
            assert!((2.0 / mu_plus(g) - delta).abs() < 1e-12);
            assert!((2.0 - 2.0 / mu_minus(g) + delta).abs() < 1e-12);
        }
        let g = gamma_for_delta(2.0).unwrap();
        assert!((g - 1.0 / 3.0).abs() < 1e-15);
        assert!((mu_plus(g) - 1.0).abs() < 1e-15);
        assert!(gamma_for_delta(0.0).is_err());
    }

    #[test]
    fn coupling_identity_and_monotone_local_time() {
        let mut s = RandomStream::new(1, 0);
        let c = build_skew_coupling(0.4, 1e-4, 1.0, &mut s).unwrap();
        let h = 5.0 * 1e-2;
        assert_eq!(c.ell.values[0], 0.0);
        for k in 0..c.b.len() {
            let lhs = c.b.values[k] - c.gamma * c.ell.values[k];
            assert!((lhs - c.x.values[k]).abs() <= 1e-12 * (1.0 + c.b.values[k].abs()));
        }
        for k in 0..c.ell.steps() {
            let d = c.ell.values[k + 1] - c.ell.values[k];
            assert!(d >= 0.0);
            if d > 0.0 {
                assert!(c.x.values[k].abs() < h);
            }
        }
        assert!(build_skew_coupling(1.0, 1e-3, 1.0, &mut s).is_err());
        assert!(build_skew_coupling(0.0, 1e-3, 1.0, &mut s).is_err());
    }

    #[test]
    fn frontier_properties() {
        let delta = 1.0;
        let mut s = RandomStream::new(2, 0);
        let c = build_skew_coupling(0.5, 1e-5, 3.0, &mut s).unwrap();
        let levels: Vec<f64> = (0..20).map(|i| i as f64 * 0.02).collect();
        let f = frontier(delta, &c, &levels).unwrap();
        assert!(f.times.windows(2).all(|w| w[0] <= w[1]));
        let h = 5.0 * (1e-5f64).sqrt();
        for (x, t) in levels.iter().zip(&f.times) {
            if t.is_finite() {
                let b = c.b.value_at(*t);
                assert!((b - x).abs() < 3.0 * h, "B(S({x})) = {b}");
            }
        }
        // S(0) is the first time ℓ moves.
        let k0 = c.ell.values.iter().position(|l| *l > 0.0).unwrap();
        assert_eq!(f.times[0], c.b.time(k0));
        assert!(frontier(2.0, &c, &levels).is_err());
    }

    #[test]
    fn decomposition_identities() {
        let mut s = RandomStream::new(3, 0);
        let c = build_skew_coupling(0.5, 1e-4, 60.0, &mut s).unwrap();
        let levels = [0.05, 0.1, 0.2];
        let d = match decompose(&c, 1.0, 0.1, &levels) {
            Ok(d) => d,
            Err(Error::HorizonExhausted { .. }) => return,
            Err(e) => panic!("{e}"),
        };
        for i in 0..levels.len() {
            assert!((d.ymix[i] + d.yv[i] - d.ltau[i]).abs() < 1e-12);
            assert!(d.yv[i] >= 0.0);
            if levels[i] < d.zeta {
                assert_eq!(d.ymix[i], d.yd[i]);
            }
        }
        assert!((d.zeta - 0.5 * c.ell.value_at(d.tau)).abs() < 1e-12);
    }

    #[test]
    fn nested_frontiers_ordered() {
        let mut s = RandomStream::new(4, 0);
        let c = build_skew_coupling(0.5, 1e-4, 40.0, &mut s).unwrap();
        let levels = [0.05, 0.1];
        if let Ok(n) = nested_decompose(&c, 3.0, 1.0, &levels) {
            assert!(n.mid.iter().all(|m| *m >= 0.0));
        }
        assert!(nested_decompose(&c, 1.0, 3.0, &levels).is_err());
    }

    #[test]
    fn scale_solver_frontier_nondecreasing() {
        let mut s = RandomStream::new(5, 0);
        let mut solver = ScaleSolver::new(0.3).unwrap();
        let mut b = 0.0;
        let mut prev = 0.0;
        for _ in 0..100_000 {
            let db = 0.01 * s.standard_normal();
            b += db;
            solver.step(db);
            let f = b - solver.x();
            assert!(f >= prev - 1e-12);
            prev = f;
        }
        assert!(prev > 0.0);
    }

    #[test]
    fn split_durations_and_signs() {
        let mut s = RandomStream::new(6, 0);
        let c = build_skew_coupling(0.5, 1e-4, 2.0, &mut s).unwrap();
        let (wp, wm) = split_timechange(&c).unwrap();
        assert!((wp.duration() + wm.duration() - c.b.duration()).abs() < 1e-9);
        let h = 5.0 * 1e-2;
        assert!(wp.values.iter().all(|v| *v >= -h));
        // W⁻ is bounded below by −γℓ.
        let lmax = c.ell.terminal();
        assert!(wm.values.iter().all(|v| *v >= -c.gamma * lmax - h));
    }
}
