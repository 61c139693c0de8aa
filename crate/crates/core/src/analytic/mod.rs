//! Closed-form densities, Laplace transforms and functionals.
//!
//! Everything here is deterministic. The simulation side of the crate is
//! checked against these formulas, and several of them are checked against
//! each other (for instance the exponential-start transform of a BESQ(0)
//! process against its decomposition into a killed negative-dimension part
//! and a zero-dimension remainder).

pub mod quadrature;
mod sturm;
mod transforms;

pub use sturm::{
    bridge_functional, laplace_functional, solve_sturm_liouville, PiecewiseFn,
    SturmLiouvilleSolution,
};
pub use transforms::{
    conditional_lt_y, corollary_identity, first_passage_bridge_lt, hitting_probability,
    lt_besq_marginal, lt_sum_decomposed, lt_sum_decomposed_quadrature, lt_zero_dim_exp_start,
    wolf_integral, CorollaryCheck,
};

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{invalid, nonnegative, positive, Error, Result};

const SERIES_REL_TOL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 10_000_000;

/// Density `t^{r-1} e^{-t} / Γ(r)` of the gamma law with shape `r`, zero for
/// `t ≤ 0`.
pub fn gamma_density(r: f64, t: f64) -> Result<f64> {
    positive("r", r)?;
    if t.is_nan() {
        return Err(invalid("t", "must not be NaN"));
    }
    Ok(gamma_pdf(r, t))
}

pub(crate) fn gamma_pdf(r: f64, t: f64) -> f64 {
    if t <= 0.0 || t.is_infinite() {
        return 0.0;
    }
    ((r - 1.0) * t.ln() - t - ln_gamma(r)).exp()
}

/// Distribution function of γ(r). Shape zero is the point mass at 0.
/// Returns NaN for a negative or non-finite shape.
pub fn gamma_cdf(r: f64, t: f64) -> f64 {
    if !(r >= 0.0) || !r.is_finite() || t.is_nan() {
        return f64::NAN;
    }
    if t < 0.0 {
        return 0.0;
    }
    if r == 0.0 {
        return 1.0;
    }
    if t == 0.0 {
        return 0.0;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    gamma_lr(r, t)
}

/// Density of the first hitting time of 0 for BESQ_v(−δ), which is
/// distributed as `v / (2 γ(1 + δ/2))`.
pub fn zeta_density(delta: f64, v: f64, m: f64) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    if m.is_infinite() {
        return 0.0;
    }
    let r = 1.0 + delta / 2.0;
    let t = v / (2.0 * m);
    (r * t.ln() - t - ln_gamma(r) - m.ln()).exp()
}

/// Distribution function matching [`zeta_density`].
pub fn zeta_cdf(delta: f64, v: f64, m: f64) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    if m.is_infinite() {
        return 1.0;
    }
    gamma_ur(1.0 + delta / 2.0, v / (2.0 * m))
}

fn check_transition_args(gamma_dim: f64, u: f64, v: f64) -> Result<()> {
    nonnegative("gamma_dim", gamma_dim)?;
    positive("u", u)?;
    nonnegative("v", v)?;
    Ok(())
}

/// Logarithm of the BESQ(γ) transition density `q_u^{(γ)}(v, y)`.
pub fn ln_besq_transition_density(gamma_dim: f64, u: f64, v: f64, y: f64) -> Result<f64> {
    check_transition_args(gamma_dim, u, v)?;
    positive("gamma_dim", gamma_dim)?;
    positive("y", y)?;
    let nu = gamma_dim / 2.0;
    let z = y / (2.0 * u);
    let lam = v / (2.0 * u);
    let ln_z = z.ln();
    let base = -z - (2.0 * u).ln();
    if lam == 0.0 {
        return Ok(base + (nu - 1.0) * ln_z - ln_gamma(nu));
    }
    let ln_lam = lam.ln();
    let term = |n: f64| -lam + n * ln_lam - ln_gamma(n + 1.0) + (nu + n - 1.0) * ln_z - ln_gamma(nu + n);
    let mode = ((-nu + (nu * nu + 4.0 * lam * z).sqrt()) / 2.0).floor().max(0.0);
    let peak = term(mode);
    let mut sum = 1.0;
    let mut count = 0usize;
    let mut n = mode + 1.0;
    loop {
        let r = (term(n) - peak).exp();
        sum += r;
        count += 1;
        if r < SERIES_REL_TOL * sum {
            break;
        }
        if count > SERIES_MAX_TERMS {
            return Err(Error::SeriesDivergence(format!(
                "transition density at y={y} did not converge"
            )));
        }
        n += 1.0;
    }
    let mut n = mode - 1.0;
    while n >= 0.0 {
        let r = (term(n) - peak).exp();
        sum += r;
        if r < SERIES_REL_TOL * sum {
            break;
        }
        n -= 1.0;
    }
    Ok(base + peak + sum.ln())
}

/// BESQ(γ) transition density `q_u^{(γ)}(v, y)` for `γ > 0`, `y > 0`: the
/// Poisson(v/2u) mixture of the densities of `2u·γ(γ/2 + n)`.
pub fn besq_transition_density(gamma_dim: f64, u: f64, v: f64, y: f64) -> Result<f64> {
    Ok(ln_besq_transition_density(gamma_dim, u, v, y)?.exp())
}

/// Distribution function of BESQ_v(γ) at time `u`, `γ ≥ 0`. For `γ = 0` the
/// atom at 0 (mass `e^{−v/2u}`) is included.
pub fn besq_transition_cdf(gamma_dim: f64, u: f64, v: f64, y: f64) -> Result<f64> {
    check_transition_args(gamma_dim, u, v)?;
    if y.is_nan() {
        return Err(invalid("y", "must not be NaN"));
    }
    if y < 0.0 {
        return Ok(0.0);
    }
    let nu = gamma_dim / 2.0;
    let z = y / (2.0 * u);
    let lam = v / (2.0 * u);
    if lam == 0.0 {
        return Ok(gamma_cdf(nu, z));
    }
    let ln_pois = |n: f64| -lam + n * lam.ln() - ln_gamma(n + 1.0);
    poisson_sum(lam.floor(), ln_pois, |n| gamma_cdf(nu + n, z))
}

/// Sums `Σ_n exp(ln_w(n)) · g(n)` over a unimodal weight sequence, starting
/// at `mode` and walking outward until the weights are negligible.
fn poisson_sum(mode: f64, ln_w: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let mut total = 0.0;
    let mut n = mode;
    let mut count = 0usize;
    loop {
        let w = ln_w(n).exp();
        total += w * g(n);
        count += 1;
        if n > mode && w < 1e-18 {
            break;
        }
        if count > SERIES_MAX_TERMS {
            return Err(Error::SeriesDivergence("mixture sum did not converge".into()));
        }
        n += 1.0;
    }
    let mut n = mode - 1.0;
    while n >= 0.0 {
        let w = ln_w(n).exp();
        total += w * g(n);
        if w < 1e-18 {
            break;
        }
        n -= 1.0;
    }
    Ok(total.min(1.0))
}

/// Distribution function of `Y(x)` for BESQ_v(−δ) absorbed at 0, `δ ≥ 0`.
///
/// The absorbed process is an h-transform of BESQ(4+δ) with `h(y) = y^α`,
/// `α = 1 + δ/2`, so the law is an atom `P(γ(α) ≥ v/2x)` at 0 plus the
/// mixture `Σ_n w_n · law(2x·γ(n+1))` with
/// `w_n = e^{−λ} λ^{n+α} / Γ(n+α+1)`, `λ = v/2x`.
pub fn besq_negdim_cdf(delta: f64, x: f64, v: f64, y: f64) -> Result<f64> {
    nonnegative("delta", delta)?;
    positive("x", x)?;
    positive("v", v)?;
    if y.is_nan() {
        return Err(invalid("y", "must not be NaN"));
    }
    if y < 0.0 {
        return Ok(0.0);
    }
    let alpha = 1.0 + delta / 2.0;
    let lam = v / (2.0 * x);
    let z = y / (2.0 * x);
    let atom = gamma_ur(alpha, lam);
    let ln_lam = lam.ln();
    let ln_w = |n: f64| -lam + (n + alpha) * ln_lam - ln_gamma(n + alpha + 1.0);
    let mode = (lam - alpha).floor().max(0.0);
    let cont = poisson_sum(mode, ln_w, |n| gamma_cdf(n + 1.0, z))?;
    Ok((atom + cont).min(1.0))
}

/// Mass of the atom at 0 of `Y(x)` for BESQ_v(−δ), i.e. `P(ζ' ≤ x)`.
pub fn besq_negdim_atom(delta: f64, x: f64, v: f64) -> Result<f64> {
    nonnegative("delta", delta)?;
    positive("x", x)?;
    positive("v", v)?;
    Ok(zeta_cdf(delta, v, x))
}
