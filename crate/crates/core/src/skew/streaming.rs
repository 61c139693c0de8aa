//! Path-free construction of the local-time decomposition.
//!
//! The coupling is advanced by [`SkewStepper`] while only the running local
//! times of `B` at a handful of watched levels are kept. With
//! [`StepPolicy::Adaptive`] the step is `max(dt, (d/c)²)` where `d` is the
//! distance from `X` to 0 and from `B` to the levels that still matter, so
//! long excursions away from everything cost few steps. Local times are then
//! drawn from the law of the Brownian bridge's local time given each step's
//! endpoints, which is exact for one level however long the step is.

use rayon::prelude::*;

use super::stepper::{ScaleSolver, SkewStepper};
use super::gamma_for_delta;
use crate::brownian::LocalTimeEstimator;
use crate::error::{invalid, positive, Error, Result};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Fixed step `dt`.
    Fixed { dt: f64 },
    /// Step `max(floor, (d/c)²)`. The floor is `dt`, or `dt/refine` while a
    /// frontier is within `c·√dt` below a level it has not yet passed: there
    /// the local time collected at the level is of the order of the step's
    /// spatial resolution, and small profile values would be lost.
    Adaptive { dt: f64, c: f64, refine: f64 },
}

impl StepPolicy {
    pub fn base_dt(&self) -> f64 {
        match *self {
            StepPolicy::Fixed { dt } | StepPolicy::Adaptive { dt, .. } => dt,
        }
    }
}

/// What to watch while running one coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpec {
    pub delta: f64,
    pub v: f64,
    /// Positive levels `x` at which the profiles are recorded.
    pub levels: Vec<f64>,
    /// Positive `x` at which `L(−x, τ(v))` is recorded.
    pub negative_levels: Vec<f64>,
    /// Larger dimension for the nested frontier, if any.
    pub nested_delta: Option<f64>,
    pub policy: StepPolicy,
    pub estimator: LocalTimeEstimator,
    /// Give up (and report exhaustion) past this much Brownian time.
    pub max_time: f64,
}

impl EmbeddingSpec {
    /// Sampled bridge local times with adaptive steps.
    pub fn adaptive(delta: f64, v: f64, levels: Vec<f64>, dt: f64) -> Self {
        Self {
            delta,
            v,
            levels,
            negative_levels: Vec::new(),
            nested_delta: None,
            policy: StepPolicy::Adaptive {
                dt,
                c: 6.0,
                refine: 100.0,
            },
            estimator: LocalTimeEstimator::Sampled,
            max_time: 1e12,
        }
    }

    fn validate(&self) -> Result<f64> {
        let gamma = gamma_for_delta(self.delta)?;
        positive("v", self.v)?;
        for x in self.levels.iter().chain(&self.negative_levels) {
            positive("levels", *x)?;
        }
        if self.levels.is_empty() || self.levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("levels", "must be non-empty and strictly increasing"));
        }
        if let Some(d1) = self.nested_delta {
            if !(d1 > self.delta) {
                return Err(invalid("nested_delta", "must exceed delta"));
            }
        }
        match self.policy {
            StepPolicy::Fixed { dt } => {
                positive("dt", dt)?;
            }
            StepPolicy::Adaptive { dt, c, refine } => {
                positive("dt", dt)?;
                positive("c", c)?;
                if !(refine >= 1.0) {
                    return Err(invalid("refine", "must be at least 1"));
                }
            }
        }
        self.estimator.validate()?;
        positive("max_time", self.max_time)?;
        Ok(gamma)
    }
}

/// Everything recorded for one coupling. Profiles are indexed like
/// `EmbeddingSpec::levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingOutcome {
    pub tau: f64,
    pub zeta: f64,
    /// `L(x, S_δ(x))`.
    pub yd: Vec<f64>,
    /// `L(x, τ(v))`.
    pub ltau: Vec<f64>,
    /// `L(x, S_δ(x) ∧ τ(v))`.
    pub ymix: Vec<f64>,
    /// `S_δ(x)`.
    pub frontier: Vec<f64>,
    /// Local time of `B` at `x` collected while `X > 0` (ultimate local time
    /// of `W⁺` at `x`).
    pub wplus: Vec<f64>,
    /// Local time of `B` at `x` collected while `X < 0` up to `τ(v)`.
    pub wminus: Vec<f64>,
    /// `L(−x, τ(v))` for the negative levels.
    pub ltau_negative: Vec<f64>,
    /// Nested frontier results; empty unless a nested dimension was
    /// requested.
    pub top: Vec<f64>,
    pub mid: Vec<f64>,
    pub order_violations: usize,
    pub steps: u64,
}

impl EmbeddingOutcome {
    /// `Yv(x) = L(x, τ(v)) − L(x, S_δ(x) ∧ τ(v))`.
    pub fn yv(&self) -> Vec<f64> {
        self.ltau.iter().zip(&self.ymix).map(|(a, b)| a - b).collect()
    }
}

/// Runs one coupling until `τ(v)` is reached and every frontier has passed
/// every level.
pub fn run_embedding(spec: &EmbeddingSpec, s: &mut RandomStream) -> Result<EmbeddingOutcome> {
    let gamma = spec.validate()?;
    let est = spec.estimator;
    let mut st = SkewStepper::new(gamma, est)?;
    let mut nested = spec.nested_delta.map(gamma_for_delta).transpose()?.map(ScaleSolver::new).transpose()?;
    let m = spec.levels.len();
    let mut lt = vec![0.0; m];
    let mut out = EmbeddingOutcome {
        tau: f64::NAN,
        zeta: f64::NAN,
        yd: vec![f64::NAN; m],
        ltau: vec![f64::NAN; m],
        ymix: vec![f64::NAN; m],
        frontier: vec![f64::INFINITY; m],
        wplus: vec![0.0; m],
        wminus: vec![0.0; m],
        ltau_negative: vec![0.0; spec.negative_levels.len()],
        top: vec![f64::NAN; m],
        mid: vec![f64::NAN; m],
        order_violations: 0,
        steps: 0,
    };
    let mut s_done = vec![false; m];
    // Nested frontier: local time at its crossing, or pending when it
    // crossed before the primary frontier.
    let mut s1_done = vec![nested.is_none(); m];
    let mut s1_pending = vec![false; m];
    let mut l0 = 0.0;
    let mut tau_done = false;
    let mut remaining = m + if nested.is_some() { m } else { 0 };

    loop {
        let span = match spec.policy {
            StepPolicy::Fixed { dt } => dt,
            StepPolicy::Adaptive { dt, c, refine } => {
                let band = c * dt.sqrt();
                let front = gamma * st.ell;
                let front1 = nested.as_ref().map(|ns| st.b - ns.x());
                let near = spec.levels.iter().enumerate().any(|(i, &x)| {
                    (!s_done[i] && x - front < band)
                        || (!s1_done[i] && front1.is_some_and(|f| x - f < band))
                });
                let floor = if near { dt / refine } else { dt };
                let mut d = st.w;
                if !tau_done {
                    d = d.min(st.b.abs());
                    for &x in &spec.negative_levels {
                        d = d.min((st.b + x).abs());
                    }
                }
                for (i, &x) in spec.levels.iter().enumerate() {
                    if !(s_done[i] && s1_done[i] && tau_done) {
                        d = d.min((st.b - x).abs());
                    }
                }
                if let Some(ns) = &nested {
                    d = d.min(ns.x().abs());
                }
                let r = d / c;
                (r * r).max(floor)
            }
        };
        let step = st.step(span, s);
        out.steps += 1;
        let (a, b) = (step.b_old, step.b_new);
        if let Some(ns) = nested.as_mut() {
            ns.step(b - a);
        }
        if !tau_done {
            l0 += est.sample_increment(a, b, span, 0.0, s);
            for (j, &x) in spec.negative_levels.iter().enumerate() {
                out.ltau_negative[j] += est.sample_increment(a, b, span, -x, s);
            }
        }
        for (i, &x) in spec.levels.iter().enumerate() {
            if s_done[i] && s1_done[i] && tau_done {
                continue;
            }
            let inc = est.sample_increment(a, b, span, x, s);
            if inc == 0.0 {
                continue;
            }
            lt[i] += inc;
            if step.sign > 0.0 && !s_done[i] {
                out.wplus[i] += inc;
            }
            if step.sign < 0.0 && !tau_done {
                out.wminus[i] += inc;
            }
        }

        if !tau_done && l0 > spec.v {
            tau_done = true;
            out.tau = st.t;
            out.zeta = gamma * st.ell;
            for i in 0..m {
                out.ltau[i] = lt[i];
                if !s_done[i] {
                    out.ymix[i] = lt[i];
                }
            }
        }
        let front = gamma * st.ell;
        for (i, &x) in spec.levels.iter().enumerate() {
            if !s_done[i] && front > x {
                s_done[i] = true;
                remaining -= 1;
                out.yd[i] = lt[i];
                out.top[i] = lt[i];
                out.frontier[i] = st.t;
                if !tau_done {
                    out.ymix[i] = lt[i];
                }
                if s1_pending[i] {
                    s1_done[i] = true;
                    remaining -= 1;
                    out.mid[i] = 0.0;
                }
            }
        }
        if let Some(ns) = &nested {
            let front1 = b - ns.x();
            for (i, &x) in spec.levels.iter().enumerate() {
                if !s1_done[i] && !s1_pending[i] && front1 > x {
                    if s_done[i] {
                        s1_done[i] = true;
                        remaining -= 1;
                        out.mid[i] = lt[i] - out.yd[i];
                    } else {
                        out.order_violations += 1;
                        s1_pending[i] = true;
                    }
                }
            }
        }
        if tau_done && remaining == 0 {
            if nested.is_none() {
                out.top.clear();
                out.mid.clear();
            }
            return Ok(out);
        }
        if st.t > spec.max_time {
            return Err(Error::HorizonExhausted {
                reached: st.t,
                target: spec.max_time,
            });
        }
    }
}

/// Outcomes for `n` replicates plus the number of replicates that were
/// redrawn on a fresh stream after exhausting `max_time`.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    pub outcomes: Vec<EmbeddingOutcome>,
    pub resampled: usize,
}

const MAX_ATTEMPTS: u64 = 16;

/// Runs `n` independent couplings in parallel. Replicate `i` uses the stream
/// `(seed, block, i)`; a replicate that exhausts its horizon is redrawn on
/// `(seed, block, i + k·2³²)`.
pub fn run_embedding_batch(spec: &EmbeddingSpec, n: usize, seed: u64, block: u32) -> Result<EmbeddingBatch> {
    spec.validate()?;
    let results: Vec<Result<(EmbeddingOutcome, usize)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..MAX_ATTEMPTS {
                let mut s = RandomStream::replicate(seed, block, i + (attempt << 32));
                match run_embedding(spec, &mut s) {
                    Ok(o) => return Ok((o, attempt as usize)),
                    Err(Error::HorizonExhausted { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::ResourceLimit(format!(
                "replicate {i} exhausted the horizon {MAX_ATTEMPTS} times"
            )))
        })
        .collect();
    let mut outcomes = Vec::with_capacity(n);
    let mut resampled = 0;
    for r in results {
        let (o, a) = r?;
        resampled += a;
        outcomes.push(o);
    }
    Ok(EmbeddingBatch { outcomes, resampled })
}

/// `B` observed on the clock that only runs while `X > 0`, at positive-clock
/// time `target` (one draw of `W⁺(target)`).
pub fn sample_wplus(gamma: f64, target: f64, dt: f64, c: f64, s: &mut RandomStream) -> Result<f64> {
    positive("target", target)?;
    positive("dt", dt)?;
    let mut st = SkewStepper::new(gamma, LocalTimeEstimator::Sampled)?;
    let mut clock = 0.0;
    loop {
        let r = st.w / c;
        let mut span = (r * r).max(dt);
        let positive_now = st.w > 0.0 && st.sign > 0.0;
        if positive_now {
            span = span.min(target - clock);
        }
        let step = st.step(span, s);
        if step.sign > 0.0 {
            clock += span;
            if clock >= target * (1.0 - 1e-12) {
                return Ok(step.b_new);
            }
        }
    }
}

/// Data for a picture of one coupling: `B`, `X` and `γℓ` against time, and
/// the frontier as a polyline `(S_δ(x), x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub x: Vec<f64>,
    pub front: Vec<f64>,
    pub frontier_levels: Vec<f64>,
    pub frontier_times: Vec<f64>,
    pub tau: f64,
}

/// Runs one fixed-step coupling until `τ(v)` and until the frontier passes
/// the last level, keeping at most `max_points` evenly spaced samples.
pub fn figure_data(
    delta: f64,
    v: f64,
    levels: &[f64],
    dt: f64,
    max_steps: usize,
    max_points: usize,
    s: &mut RandomStream,
) -> Result<FigureData> {
    let gamma = gamma_for_delta(delta)?;
    positive("v", v)?;
    positive("dt", dt)?;
    let mut st = SkewStepper::new(gamma, LocalTimeEstimator::Sampled)?;
    let (mut t, mut b, mut x, mut front) = (vec![0.0], vec![0.0], vec![0.0], vec![0.0]);
    let mut times = vec![f64::INFINITY; levels.len()];
    let mut l0 = 0.0;
    let mut tau = f64::NAN;
    let top = levels.iter().cloned().fold(0.0, f64::max);
    for _ in 0..max_steps {
        let step = st.step(dt, s);
        if tau.is_nan() {
            l0 += LocalTimeEstimator::Sampled.sample_increment(step.b_old, step.b_new, dt, 0.0, s);
            if l0 > v {
                tau = st.t;
            }
        }
        let f = gamma * st.ell;
        for (i, &lv) in levels.iter().enumerate() {
            if times[i].is_infinite() && f > lv {
                times[i] = st.t;
            }
        }
        t.push(st.t);
        b.push(st.b);
        x.push(st.x());
        front.push(f);
        if !tau.is_nan() && f > top {
            break;
        }
    }
    if tau.is_nan() {
        return Err(Error::HorizonExhausted { reached: l0, target: v });
    }
    let stride = t.len().div_ceil(max_points.max(2));
    let pick = |v: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().step_by(stride).copied().collect();
        if (v.len() - 1) % stride != 0 {
            out.push(*v.last().unwrap());
        }
        out
    };
    Ok(FigureData {
        t: pick(&t),
        b: pick(&b),
        x: pick(&x),
        front: pick(&front),
        frontier_levels: levels.to_vec(),
        frontier_times: times,
        tau,
    })
}
