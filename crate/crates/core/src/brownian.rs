//! Brownian paths, local-time fields and inverse local time.
//!
//! Local times use the occupation-density normalization
//! `L(x, t) = lim (1/2h) ∫₀ᵗ 1{|B(s) − x| < h} ds`, under which `|B| − L(0, ·)`
//! is again a Brownian motion.
//!
//! Two estimators are provided. [`LocalTimeEstimator::Window`] counts grid
//! points inside the window `(x − h, x + h)` (left-point rule).
//! [`LocalTimeEstimator::Bridge`] adds, for every step, the expected local
//! time of a Brownian bridge between the step's endpoints, which is exact in
//! expectation for any step size.

use statrs::function::erf::erfc;

use crate::error::{invalid, positive, Error, Result};
use crate::path::Path;
use crate::rng::RandomStream;

/// Gaussian random walk started at 0 with `N(0, dt)` increments.
pub fn sample_brownian(dt: f64, horizon: f64, s: &mut RandomStream) -> Result<Path> {
    let n = crate::sde::steps_for(horizon, dt)?;
    let sq = dt.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut b = 0.0;
    values.push(b);
    for _ in 0..n {
        b += sq * s.standard_normal();
        values.push(b);
    }
    Path::new(0.0, dt, values)
}

/// `e^{y²} erfc(y)` for `y ≥ 0`, with an asymptotic expansion where the
/// direct product would underflow.
fn erfcx(y: f64) -> f64 {
    if y < 25.0 {
        (y * y).exp() * erfc(y)
    } else {
        let y2 = y * y;
        (1.0 - 0.5 / y2 + 0.75 / (y2 * y2)) / (y * std::f64::consts::PI.sqrt())
    }
}

/// Expected local time at `x` of a Brownian bridge from `a` to `b` over a
/// time span `span`:
/// `√(π·span/2) · exp((b−a)²/(2·span)) · erfc((|a−x| + |b−x|)/√(2·span))`.
#[inline]
pub fn bridge_local_time(a: f64, b: f64, span: f64, x: f64) -> f64 {
    let r = (2.0 * span).sqrt();
    let c = ((a - x).abs() + (b - x).abs()) / r;
    if c > 27.0 {
        return 0.0;
    }
    let d = (b - a) / r;
    // e^{d²} erfc(c) = e^{d² − c²} · erfcx(c), and c ≥ |d|.
    (0.5 * std::f64::consts::PI * span).sqrt() * (d * d - c * c).exp() * erfcx(c)
}

/// Local time at `x` of a Brownian bridge from `a` to `b` over `span`, as
/// the quantile at `u ∈ (0, 1]` of its law
/// `P(L > l) = exp(−((|a−x| + |b−x| + l)² − (b−a)²) / (2·span))`.
/// Small `u` gives large local times; `u` above `P(L > 0)` gives 0.
#[inline]
pub fn bridge_local_time_quantile(a: f64, b: f64, span: f64, x: f64, u: f64) -> f64 {
    let c = (a - x).abs() + (b - x).abs();
    let d = b - a;
    let l = (d * d - 2.0 * span * u.ln()).sqrt() - c;
    l.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalTimeEstimator {
    /// Occupation time of `(x−h, x+h)` divided by `2h`.
    Window { h: f64 },
    /// Expected local time of the Brownian bridge between the step's
    /// endpoints.
    Bridge,
    /// A draw from the law of the bridge's local time given the endpoints.
    /// Without a random stream (the path-based routines) it falls back to
    /// its mean, [`LocalTimeEstimator::Bridge`].
    Sampled,
}

impl LocalTimeEstimator {
    /// Default window `h = max(Δx, 5√dt)`.
    pub fn default_window(dx: f64, dt: f64) -> Self {
        LocalTimeEstimator::Window {
            h: dx.max(5.0 * dt.sqrt()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LocalTimeEstimator::Window { h } = self {
            positive("h", *h)?;
        }
        Ok(())
    }

    /// Local time at `x` credited to one step from `a` to `b` of length `span`.
    #[inline]
    pub fn increment(&self, a: f64, b: f64, span: f64, x: f64) -> f64 {
        match *self {
            LocalTimeEstimator::Window { h } => {
                if (a - x).abs() < h {
                    span / (2.0 * h)
                } else {
                    0.0
                }
            }
            LocalTimeEstimator::Bridge | LocalTimeEstimator::Sampled => bridge_local_time(a, b, span, x),
        }
    }

    /// Like [`Self::increment`], drawing from `s` for the sampled estimator.
    /// No draw is made when the bridge cannot reach `x` in floating point.
    #[inline]
    pub fn sample_increment(&self, a: f64, b: f64, span: f64, x: f64, s: &mut RandomStream) -> f64 {
        match *self {
            LocalTimeEstimator::Sampled => {
                let c = (a - x).abs() + (b - x).abs();
                let d = b - a;
                if (c * c - d * d) / (2.0 * span) > 745.0 {
                    return 0.0;
                }
                bridge_local_time_quantile(a, b, span, x, 1.0 - s.uniform())
            }
            _ => self.increment(a, b, span, x),
        }
    }

    /// Half-width of the band outside which a step contributes nothing
    /// (or a negligible amount, for the bridge estimator).
    pub fn reach(&self, span: f64) -> f64 {
        match *self {
            LocalTimeEstimator::Window { h } => h,
            LocalTimeEstimator::Bridge | LocalTimeEstimator::Sampled => 9.0 * span.sqrt(),
        }
    }
}

/// Estimated `L(x_i, t_j)` on a level grid at a list of checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    pub space_grid: Vec<f64>,
    pub checkpoints: Vec<f64>,
    /// `l[i][j] ≈ L(space_grid[i], checkpoints[j])`.
    pub l: Vec<Vec<f64>>,
    pub estimator: LocalTimeEstimator,
}

impl LocalTimeField {
    pub fn bandwidth(&self) -> Option<f64> {
        match self.estimator {
            LocalTimeEstimator::Window { h } => Some(h),
            LocalTimeEstimator::Bridge | LocalTimeEstimator::Sampled => None,
        }
    }

    pub fn level_index(&self, x: f64) -> Option<usize> {
        self.space_grid.iter().position(|&g| (g - x).abs() <= 1e-12)
    }
}

fn strictly_increasing(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid(name, "must not be empty"));
    }
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(name, "must be finite and strictly increasing"));
    }
    Ok(())
}

/// Running local time at `x` at every grid point of `path`.
pub fn cumulative_local_time(path: &Path, x: f64, est: LocalTimeEstimator) -> Result<Vec<f64>> {
    est.validate()?;
    let mut out = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    out.push(acc);
    for w in path.values.windows(2) {
        acc += est.increment(w[0], w[1], path.dt, x);
        out.push(acc);
    }
    Ok(out)
}

/// Local-time field of `path` on `levels` at `checkpoints` (times measured on
/// the path's own clock). A step from `t_k` to `t_{k+1}` counts towards
/// checkpoint `t` when `t_{k+1} ≤ t`.
pub fn estimate_local_time(
    path: &Path,
    levels: &[f64],
    checkpoints: &[f64],
    est: LocalTimeEstimator,
) -> Result<LocalTimeField> {
    strictly_increasing("levels", levels)?;
    strictly_increasing("checkpoints", checkpoints)?;
    est.validate()?;
    let mut acc = vec![0.0; levels.len()];
    let mut counts = vec![0u64; levels.len()];
    let mut l = vec![Vec::with_capacity(checkpoints.len()); levels.len()];
    let mut next_cp = 0;
    let reach = est.reach(path.dt);
    let tol = 1e-9 * path.dt;
    for k in 0..path.steps() {
        let t_end = path.time(k + 1);
        while next_cp < checkpoints.len() && checkpoints[next_cp] < t_end - tol {
            next_cp += 1;
            for (i, row) in l.iter_mut().enumerate() {
                row.push(window_value(est, acc[i], counts[i], path.dt));
            }
        }
        if next_cp == checkpoints.len() {
            break;
        }
        let (a, b) = (path.values[k], path.values[k + 1]);
        let (lo, hi) = (a.min(b) - reach, a.max(b) + reach);
        let start = levels.partition_point(|&x| x <= lo);
        for i in start..levels.len() {
            let x = levels[i];
            if x >= hi {
                break;
            }
            match est {
                LocalTimeEstimator::Window { h } => {
                    if (a - x).abs() < h {
                        counts[i] += 1;
                    }
                }
                LocalTimeEstimator::Bridge | LocalTimeEstimator::Sampled => {
                    acc[i] += bridge_local_time(a, b, path.dt, x)
                }
            }
        }
    }
    // Checkpoints at or beyond the end see the whole path.
    while l[0].len() < checkpoints.len() {
        for (i, row) in l.iter_mut().enumerate() {
            row.push(window_value(est, acc[i], counts[i], path.dt));
        }
    }
    Ok(LocalTimeField {
        space_grid: levels.to_vec(),
        checkpoints: checkpoints.to_vec(),
        l,
        estimator: est,
    })
}

fn window_value(est: LocalTimeEstimator, acc: f64, count: u64, dt: f64) -> f64 {
    match est {
        LocalTimeEstimator::Window { h } => count as f64 * dt / (2.0 * h),
        LocalTimeEstimator::Bridge | LocalTimeEstimator::Sampled => acc,
    }
}

/// `τ(v) = inf{t : L(0, t) > v}`, located first at checkpoint resolution and
/// then refined step by step along `path` with the field's estimator, with
/// linear interpolation inside the crossing step.
pub fn inverse_local_time(field: &LocalTimeField, path: &Path, v: f64) -> Result<f64> {
    positive("v", v)?;
    let i0 = field
        .level_index(0.0)
        .ok_or_else(|| Error::Precondition("level 0 is not in the grid".into()))?;
    let row = &field.l[i0];
    let j = match row.iter().position(|&l| l > v) {
        Some(j) => j,
        None => {
            return Err(Error::HorizonExhausted {
                reached: row.last().copied().unwrap_or(0.0),
                target: v,
            })
        }
    };
    let (start_t, mut acc) = if j == 0 { (path.t0, 0.0) } else { (field.checkpoints[j - 1], row[j - 1]) };
    let start = path.index_at(start_t);
    for k in start..path.steps() {
        let inc = field.estimator.increment(path.values[k], path.values[k + 1], path.dt, 0.0);
        if acc + inc > v {
            let frac = if inc > 0.0 { (v - acc) / inc } else { 1.0 };
            return Ok(path.time(k) + frac * path.dt);
        }
        acc += inc;
    }
    Err(Error::HorizonExhausted { reached: acc, target: v })
}

/// Brownian path run in chunks until its local time at 0 exceeds `v`, or
/// until `max_horizon`.
pub fn brownian_until_local_time(
    v: f64,
    dt: f64,
    est: LocalTimeEstimator,
    max_horizon: f64,
    s: &mut RandomStream,
) -> Result<(Path, f64)> {
    positive("v", v)?;
    positive("dt", dt)?;
    est.validate()?;
    let sq = dt.sqrt();
    let max_steps = (max_horizon / dt).ceil() as usize;
    let mut values = vec![0.0];
    let mut acc = 0.0;
    let mut b = 0.0;
    while values.len() <= max_steps {
        let next = b + sq * s.standard_normal();
        let inc = est.increment(b, next, dt, 0.0);
        values.push(next);
        if acc + inc > v {
            let k = values.len() - 2;
            let frac = (v - acc) / inc;
            let path = Path::new(0.0, dt, values)?;
            return Ok((path, (k as f64 + frac) * dt));
        }
        acc += inc;
        b = next;
    }
    Err(Error::HorizonExhausted { reached: acc, target: v })
}
