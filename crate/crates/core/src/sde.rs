//! Euler paths of `dY = δ dx + 2√Y dB` for any real `δ`, and the composite
//! process that glues `Y + Y'` to a fresh BESQ(δ+δ') at a stopping index.
//!
//! For `δ > 0` the scheme is full truncation: the diffusion coefficient is
//! evaluated at `max(Y, 0)` and the new state is clamped at 0. Inside the
//! boundary layer `Y < 20·dt` the Euler step cannot resolve the law near 0
//! (for `δ < 2` the terminal law misses mass of order `dt^{δ/2}` there), so
//! those steps are drawn from the exact transition instead. For `δ ≤ 0`
//! the path is absorbed at the first step whose proposal is nonpositive, and
//! the absorption time is refined by linear interpolation inside that step.

use crate::error::{finite, invalid, nonnegative, positive, Error, Result};
use crate::path::Path;
use crate::rng::RandomStream;
use crate::samplers::sample_besq_transition;

/// One Euler proposal (before truncation or absorption).
#[inline]
pub fn euler_proposal(delta: f64, y: f64, dt: f64, sqrt_dt: f64, z: f64) -> f64 {
    y + delta * dt + 2.0 * y.max(0.0).sqrt() * sqrt_dt * z
}

/// States below `BOUNDARY_LAYER · dt` take an exact transition step.
pub const BOUNDARY_LAYER: f64 = 20.0;

/// One step of the scheme for `δ > 0`.
#[inline]
pub fn besq_step(delta: f64, y: f64, dt: f64, sqrt_dt: f64, s: &mut RandomStream) -> Result<f64> {
    if y < BOUNDARY_LAYER * dt {
        return sample_besq_transition(delta, y, dt, s);
    }
    Ok(euler_proposal(delta, y, dt, sqrt_dt, s.standard_normal()).max(0.0))
}

fn check_args(delta: f64, y: f64, dt: f64) -> Result<()> {
    finite("delta", delta)?;
    nonnegative("y", y)?;
    positive("dt", dt)?;
    if dt.is_infinite() {
        return Err(invalid("dt", "must be finite"));
    }
    Ok(())
}

/// Number of steps needed to cover `horizon` with step `dt`.
pub fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    positive("horizon", horizon)?;
    if horizon.is_infinite() {
        return Err(invalid("horizon", "must be finite"));
    }
    if dt > horizon * (1.0 + 1e-12) {
        return Err(invalid("dt", format!("step {dt} exceeds horizon {horizon}")));
    }
    Ok(((horizon / dt) - 1e-9).ceil().max(1.0) as usize)
}

/// Euler path with exactly `n` steps.
pub fn integrate_besq_steps(delta: f64, y: f64, dt: f64, n: usize, s: &mut RandomStream) -> Result<Path> {
    check_args(delta, y, dt)?;
    let sqrt_dt = dt.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    values.push(y);
    let mut absorbed = None;
    if delta <= 0.0 && y == 0.0 {
        values.resize(n + 1, 0.0);
        let mut p = Path::new(0.0, dt, values)?;
        p.absorbed_at = Some(0);
        p.absorption_time = Some(0.0);
        return Ok(p);
    }
    let mut cur = y;
    for k in 0..n {
        if delta > 0.0 {
            cur = besq_step(delta, cur, dt, sqrt_dt, s)?;
            values.push(cur);
            continue;
        }
        let next = euler_proposal(delta, cur, dt, sqrt_dt, s.standard_normal());
        if next <= 0.0 {
            let frac = cur / (cur - next);
            absorbed = Some((k + 1, (k as f64 + frac) * dt));
            values.resize(n + 1, 0.0);
            break;
        }
        cur = next;
        values.push(cur);
    }
    let mut p = Path::new(0.0, dt, values)?;
    if let Some((k, t)) = absorbed {
        p.absorbed_at = Some(k);
        p.absorption_time = Some(t);
    }
    Ok(p)
}

/// Euler path of BESQ_y(δ) on `[0, horizon]`.
pub fn integrate_besq(delta: f64, y: f64, dt: f64, horizon: f64, s: &mut RandomStream) -> Result<Path> {
    check_args(delta, y, dt)?;
    let n = steps_for(horizon, dt)?;
    integrate_besq_steps(delta, y, dt, n, s)
}

/// Terminal value and absorption time of the same scheme as
/// [`integrate_besq_steps`], without storing the path. Consumes the stream
/// identically.
pub fn besq_terminal(delta: f64, y: f64, dt: f64, n: usize, s: &mut RandomStream) -> Result<(f64, Option<f64>)> {
    check_args(delta, y, dt)?;
    if delta <= 0.0 && y == 0.0 {
        return Ok((0.0, Some(0.0)));
    }
    let sqrt_dt = dt.sqrt();
    let mut cur = y;
    for k in 0..n {
        if delta > 0.0 {
            cur = besq_step(delta, cur, dt, sqrt_dt, s)?;
            continue;
        }
        let next = euler_proposal(delta, cur, dt, sqrt_dt, s.standard_normal());
        if next <= 0.0 {
            return Ok((0.0, Some((k as f64 + cur / (cur - next)) * dt)));
        }
        cur = next;
    }
    Ok((cur, None))
}

/// Runs the scheme until absorption (only meaningful for `δ ≤ 0`) or until
/// `max_steps`; returns the refined absorption time if it happened.
pub fn besq_absorption_time(
    delta: f64,
    y: f64,
    dt: f64,
    max_steps: usize,
    s: &mut RandomStream,
) -> Result<Option<f64>> {
    if delta > 0.0 {
        return Err(invalid("delta", "paths of positive dimension are never absorbed"));
    }
    Ok(besq_terminal(delta, y, dt, max_steps, s)?.1)
}

/// `w ↦ z·Y(w/z)`: values and the time axis both scaled by `z`.
pub fn scale_path(z: f64, path: &Path) -> Result<Path> {
    positive("z", z)?;
    if z.is_infinite() {
        return Err(invalid("z", "must be finite"));
    }
    let mut p = Path::new(z * path.t0, z * path.dt, path.values.iter().map(|v| z * v).collect())?;
    p.absorbed_at = path.absorbed_at;
    p.absorption_time = path.absorption_time.map(|t| z * t);
    Ok(p)
}

/// Stopping index for [`compose_additive`].
#[derive(Debug, Clone, PartialEq)]
pub enum StoppingRule {
    FixedTime(f64),
    /// First zero of the second (companion) path.
    FirstZeroOfCompanion,
    MinOf(Vec<StoppingRule>),
}

impl StoppingRule {
    pub fn resolve(&self, y: &Path, yp: &Path) -> Result<usize> {
        match self {
            StoppingRule::FixedTime(t) => {
                nonnegative("T", *t)?;
                let k = ((t - y.t0) / y.dt).round();
                if k < 0.0 || k as usize > y.steps() {
                    return Err(Error::Precondition(format!("time {t} is outside the path")));
                }
                Ok(k as usize)
            }
            StoppingRule::FirstZeroOfCompanion => yp.absorbed_at.ok_or_else(|| {
                Error::Precondition("companion path never reaches zero".into())
            }),
            StoppingRule::MinOf(rules) => {
                if rules.is_empty() {
                    return Err(invalid("rule", "empty minimum"));
                }
                let mut best = usize::MAX;
                for r in rules {
                    best = best.min(r.resolve(y, yp)?);
                }
                Ok(best)
            }
        }
    }
}

/// `Z = Y + Y'` up to the stopping index `T`, continued afterwards as a
/// BESQ of dimension `combined_dim` (= δ + δ') started at `Z(T)`.
///
/// The continuation is built in the scaling form `Z(T + w) = z·Y₁(w/z)`,
/// `z = Z(T)`, with `Y₁` a BESQ₁(combined_dim) Euler path of step `dt/z`.
/// When `Z(T) = 0` the continuation is 0 for `combined_dim ≤ 0` and a fresh
/// BESQ₀(combined_dim) otherwise.
pub fn compose_additive(
    y: &Path,
    yp: &Path,
    rule: &StoppingRule,
    combined_dim: f64,
    s: &mut RandomStream,
) -> Result<Path> {
    finite("combined_dim", combined_dim)?;
    if !y.same_grid(yp) {
        return Err(Error::GridMismatch(format!(
            "lengths {} and {}, steps {} and {}",
            y.len(),
            yp.len(),
            y.dt,
            yp.dt
        )));
    }
    let t_idx = rule.resolve(y, yp)?;
    for (label, p) in [("first", y), ("companion", yp)] {
        if let Some(k) = p.absorbed_at {
            if t_idx > k {
                return Err(Error::Precondition(format!(
                    "stopping index {t_idx} is after the {label} path's absorption at {k}"
                )));
            }
        }
    }
    let mut values: Vec<f64> = y.values[..=t_idx]
        .iter()
        .zip(&yp.values[..=t_idx])
        .map(|(a, b)| a + b)
        .collect();
    let remaining = y.steps() - t_idx;
    let z = values[t_idx];
    let mut absorbed = None;
    if remaining > 0 {
        let tail = if z > 0.0 {
            let unit = integrate_besq_steps(combined_dim, 1.0, y.dt / z, remaining, s)?;
            scale_path(z, &unit)?
        } else if combined_dim > 0.0 {
            integrate_besq_steps(combined_dim, 0.0, y.dt, remaining, s)?
        } else {
            let mut p = Path::new(0.0, y.dt, vec![0.0; remaining + 1])?;
            p.absorbed_at = Some(0);
            p.absorption_time = Some(0.0);
            p
        };
        if let (Some(k), Some(t)) = (tail.absorbed_at, tail.absorption_time) {
            absorbed = Some((t_idx + k, y.time(t_idx) + t));
        }
        values.extend_from_slice(&tail.values[1..]);
    } else if combined_dim <= 0.0 && z == 0.0 {
        absorbed = Some((t_idx, y.time(t_idx)));
    }
    let mut out = Path::new(y.t0, y.dt, values)?;
    if let Some((k, t)) = absorbed {
        out.absorbed_at = Some(k);
        out.absorption_time = Some(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::stats::mean_within;

    #[test]
    fn zero_dimension_from_zero_is_zero() {
        let mut s = RandomStream::new(1, 0);
        let p = integrate_besq(0.0, 0.0, 1e-3, 1.0, &mut s).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
        assert_eq!(p.absorbed_at, Some(0));
        assert_eq!(p.len(), 1001);
    }

    #[test]
    fn argument_validation() {
        let mut s = RandomStream::new(1, 0);
        assert!(integrate_besq(1.0, 1.0, 0.1, 0.05, &mut s).is_err());
        assert!(integrate_besq(1.0, 1.0, 0.0, 1.0, &mut s).is_err());
        assert!(integrate_besq(f64::NAN, 1.0, 0.1, 1.0, &mut s).is_err());
        assert!(integrate_besq(1.0, -1.0, 0.1, 1.0, &mut s).is_err());
        assert!(integrate_besq(1.0, 1.0, 0.1, 0.1, &mut s).is_ok());
    }

    #[test]
    fn negative_dimension_absorbs() {
        let mut s = RandomStream::new(2, 0);
        let p = integrate_besq(-1.0, 1.0, 1e-3, 20.0, &mut s).unwrap();
        let k = p.absorbed_at.expect("absorbed within horizon");
        assert!(p.check_invariants(true));
        let t = p.absorption_time.unwrap();
        assert!(t > p.time(k - 1) && t <= p.time(k));
        assert!(p.values[k - 1] > 0.0);
    }

    #[test]
    fn terminal_integrator_matches_path() {
        for &(d, y) in &[(2.0, 1.0), (-1.0, 0.5), (0.0, 0.3)] {
            let mut a = RandomStream::new(3, 7);
            let mut b = RandomStream::new(3, 7);
            let p = integrate_besq_steps(d, y, 1e-3, 2000, &mut a).unwrap();
            let (t, abs) = besq_terminal(d, y, 1e-3, 2000, &mut b).unwrap();
            assert_eq!(p.terminal().to_bits(), t.to_bits());
            assert_eq!(p.absorption_time, abs);
        }
    }

    #[test]
    fn mean_curve() {
        let (delta, y, dt) = (1.5, 0.5, 1e-3);
        let n = 1000;
        let reps = 10_000;
        let mut cols = vec![Vec::with_capacity(reps); 5];
        for r in 0..reps {
            let mut s = RandomStream::replicate(4, 0, r as u64);
            let p = integrate_besq_steps(delta, y, dt, n, &mut s).unwrap();
            for (c, col) in cols.iter_mut().enumerate() {
                col.push(p.values[(c + 1) * 200]);
            }
        }
        for (c, col) in cols.iter().enumerate() {
            let x = (c + 1) as f64 * 0.2;
            assert!(mean_within(col, y + delta * x, 4.0).passed, "checkpoint {x}");
        }
    }

    #[test]
    fn scaling_group() {
        let p = Path::new(0.0, 0.1, vec![1.0, 2.0, 0.5]).unwrap();
        assert_eq!(scale_path(1.0, &p).unwrap(), p);
        let back = scale_path(0.5, &scale_path(2.0, &p).unwrap()).unwrap();
        for (a, b) in back.values.iter().zip(&p.values) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((back.dt - p.dt).abs() < 1e-15);
        assert!(scale_path(0.0, &p).is_err());
    }

    #[test]
    fn scaled_euler_equals_direct_euler() {
        // z·Y₁ with step dt/z reproduces the direct scheme started at z.
        let (d, z, dt, n) = (0.7, 2.5, 1e-3, 500);
        let mut a = RandomStream::new(5, 0);
        let mut b = RandomStream::new(5, 0);
        let unit = integrate_besq_steps(d, 1.0, dt / z, n, &mut a).unwrap();
        let scaled = scale_path(z, &unit).unwrap();
        let direct = integrate_besq_steps(d, z, dt, n, &mut b).unwrap();
        for (x, y) in scaled.values.iter().zip(&direct.values) {
            assert!((x - y).abs() < 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn compose_first_branch_and_continuity() {
        let mut s = RandomStream::new(6, 0);
        let y = integrate_besq(1.0, 0.0, 1e-3, 2.0, &mut s).unwrap();
        let yp = integrate_besq(-1.0, 1.0, 1e-3, 2.0, &mut s).unwrap();
        let rule = match yp.absorbed_at {
            Some(k) if k < 500 => StoppingRule::FirstZeroOfCompanion,
            _ => StoppingRule::FixedTime(0.5),
        };
        let t = rule.resolve(&y, &yp).unwrap();
        let z = compose_additive(&y, &yp, &rule, 0.0, &mut s).unwrap();
        for k in 0..=t {
            assert_eq!(z.values[k], y.values[k] + yp.values[k]);
        }
        assert_eq!(z.len(), y.len());
        assert!(z.check_invariants(true));
    }

    #[test]
    fn compose_zero_at_stop() {
        let mut s = RandomStream::new(7, 0);
        let y = Path::new(0.0, 0.01, vec![0.0; 101]).unwrap();
        let mut yp = Path::new(0.0, 0.01, vec![0.0; 101]).unwrap();
        yp.absorbed_at = Some(0);
        let z = compose_additive(&y, &yp, &StoppingRule::FirstZeroOfCompanion, -0.5, &mut s).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
        let z = compose_additive(&y, &yp, &StoppingRule::FirstZeroOfCompanion, 2.0, &mut s).unwrap();
        assert!(z.values[1..].iter().any(|v| *v > 0.0));
    }

    #[test]
    fn compose_errors() {
        let mut s = RandomStream::new(8, 0);
        let y = Path::new(0.0, 0.01, vec![1.0; 101]).unwrap();
        let short = Path::new(0.0, 0.01, vec![1.0; 50]).unwrap();
        assert!(matches!(
            compose_additive(&y, &short, &StoppingRule::FixedTime(0.1), 1.0, &mut s),
            Err(Error::GridMismatch(_))
        ));
        let mut absorbed = Path::new(0.0, 0.01, vec![1.0; 101]).unwrap();
        absorbed.values[10..].iter_mut().for_each(|v| *v = 0.0);
        absorbed.absorbed_at = Some(10);
        assert!(matches!(
            compose_additive(&y, &absorbed, &StoppingRule::FixedTime(0.5), 1.0, &mut s),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            compose_additive(&y, &y, &StoppingRule::FirstZeroOfCompanion, 1.0, &mut s),
            Err(Error::Precondition(_))
        ));
    }
}
