//! Exact samplers for the closed-form marginal laws.
//!
//! These are the ground truth that discretised paths are checked against.
//! Gamma and Poisson variates come from `rand_distr`, whose methods are exact
//! in distribution for every shape and mean.

use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{invalid, nonnegative, positive, Error, Result};
use crate::rng::RandomStream;

/// Draw from the gamma law with shape `r` and unit scale; shape 0 is the
/// point mass at 0.
pub fn sample_gamma(r: f64, s: &mut RandomStream) -> Result<f64> {
    nonnegative("r", r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let law = Gamma::new(r, 1.0).map_err(|e| invalid("r", e.to_string()))?;
    Ok(law.sample(s))
}

/// Marginal at level `x` of `BESQ_0(δ)`: `2x·γ(δ/2)`.
pub fn sample_besq_zero_marginal(delta: f64, x: f64, s: &mut RandomStream) -> Result<f64> {
    positive("delta", delta)?;
    nonnegative("x", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * x * sample_gamma(delta / 2.0, s)?)
}

/// Poisson draw, exact for every mean that `rand_distr` accepts.
pub fn sample_poisson(mean: f64, s: &mut RandomStream) -> Result<u64> {
    nonnegative("mean", mean)?;
    if mean == 0.0 {
        return Ok(0);
    }
    let law = Poisson::new(mean).map_err(|e| invalid("mean", e.to_string()))?;
    let n: f64 = law.sample(s);
    Ok(n as u64)
}

/// Transition of `BESQ(δ)`, `δ ≥ 0`, from `y` over elapsed level `x`:
/// `2x·γ(δ/2 + N)` with `N ~ Poisson(y/2x)`.
pub fn sample_besq_transition(delta: f64, y: f64, x: f64, s: &mut RandomStream) -> Result<f64> {
    if delta.is_finite() && delta < 0.0 {
        return Err(Error::Unsupported(
            "transition sampling for negative dimension; integrate the SDE instead".into(),
        ));
    }
    nonnegative("delta", delta)?;
    nonnegative("y", y)?;
    positive("x", x)?;
    let n = sample_poisson(y / (2.0 * x), s)?;
    Ok(2.0 * x * sample_gamma(delta / 2.0 + n as f64, s)?)
}

/// Probability that `BESQ_{γ(1)/μ}(−δ)` is still alive at level `x`.
pub fn entrance_survival(delta: f64, mu: f64, x: f64) -> f64 {
    (2.0 * mu * x + 1.0).powf(-(1.0 + delta / 2.0))
}

/// Marginal at level `x` of `BESQ(−δ)` started from an exponential law of
/// mean `1/μ`: zero with probability `1 − (2μx+1)^{−(1+δ/2)}`, otherwise
/// exponential with mean `(2μx+1)/μ`.
pub fn sample_entrance_negdim(delta: f64, mu: f64, x: f64, s: &mut RandomStream) -> Result<f64> {
    nonnegative("delta", delta)?;
    positive("mu", mu)?;
    positive("x", x)?;
    let alive = entrance_survival(delta, mu, x);
    let u = s.uniform();
    let e = s.exp1();
    if u < alive {
        Ok((2.0 * mu * x + 1.0) / mu * e)
    } else {
        Ok(0.0)
    }
}

/// Absorption time of `BESQ_v(−δ)`: `v / (2γ(1 + δ/2))`.
pub fn sample_absorption_time(delta: f64, v: f64, s: &mut RandomStream) -> Result<f64> {
    positive("delta", delta)?;
    positive("v", v)?;
    let g = sample_gamma(1.0 + delta / 2.0, s)?;
    Ok(v / (2.0 * g))
}
