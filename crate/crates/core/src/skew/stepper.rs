use crate::brownian::{bridge_local_time_quantile, LocalTimeEstimator};
use crate::error::{invalid, Result};
use crate::rng::RandomStream;

/// Probability that an excursion of `X_γ = B − γℓ_γ` is positive.
pub fn positive_excursion_probability(gamma: f64) -> f64 {
    (1.0 - gamma) / 2.0
}

/// Incremental construction of the skew Brownian coupling.
///
/// `|X|` is a reflected random walk. A new excursion starts whenever the
/// underlying walk reaches or crosses 0 during a step (detected exactly for
/// the Brownian bridge between the endpoints), and draws its sign afresh.
/// `ℓ` is the local time of `|X|` at 0 from the configured estimator; with
/// the sampled estimator one draw of the bridge's local-time law decides both
/// whether the step touches 0 and how much local time it collects there.
/// `B` is defined as `X + γℓ`.
#[derive(Debug, Clone)]
pub struct SkewStepper {
    gamma: f64,
    p_pos: f64,
    est: LocalTimeEstimator,
    pub t: f64,
    pub w: f64,
    pub sign: f64,
    pub ell: f64,
    pub b: f64,
    pub excursions: u64,
}

/// What happened during one step.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub span: f64,
    pub b_old: f64,
    pub b_new: f64,
    /// Sign of `X` attributed to the step: the sign at its start, or the
    /// new excursion's sign when the step starts at 0.
    pub sign: f64,
}

impl SkewStepper {
    pub fn new(gamma: f64, est: LocalTimeEstimator) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
        }
        est.validate()?;
        Ok(Self {
            gamma,
            p_pos: positive_excursion_probability(gamma),
            est,
            t: 0.0,
            w: 0.0,
            sign: 1.0,
            ell: 0.0,
            b: 0.0,
            excursions: 0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn x(&self) -> f64 {
        self.sign * self.w
    }

    #[inline]
    pub fn step(&mut self, span: f64, s: &mut RandomStream) -> Step {
        let a = self.w;
        let raw = a + span.sqrt() * s.standard_normal();
        let (dl, fresh) = if self.est == LocalTimeEstimator::Sampled {
            // One uniform decides whether the bridge touches 0 and, if so,
            // how much local time it collects there.
            let q = 2.0 * a * raw / span;
            if a > 0.0 && raw > 0.0 && q >= 745.0 {
                (0.0, false)
            } else {
                let dl = bridge_local_time_quantile(a, raw, span, 0.0, 1.0 - s.uniform());
                (dl, dl > 0.0 || a == 0.0 || raw <= 0.0)
            }
        } else {
            let dl = self.est.increment(a, raw, span, 0.0);
            let mut fresh = a == 0.0 || raw <= 0.0;
            if !fresh {
                let q = 2.0 * a * raw / span;
                if q < 40.0 && s.uniform() < (-q).exp() {
                    fresh = true;
                }
            }
            (dl, fresh)
        };
        let old_sign = self.sign;
        if fresh {
            self.sign = if s.uniform() < self.p_pos { 1.0 } else { -1.0 };
            self.excursions += 1;
        }
        let b_old = self.b;
        self.w = raw.abs();
        self.ell += dl;
        self.t += span;
        self.b = self.sign * self.w + self.gamma * self.ell;
        Step {
            span,
            b_old,
            b_new: self.b,
            sign: if a == 0.0 { self.sign } else { old_sign },
        }
    }
}

/// `X₁` for a second skewness driven by the same `B`, through its natural
/// scale: `Y = s(X₁)` with `s(x) = (1−p)x` for `x ≥ 0` and `p·x` for `x < 0`
/// is a driftless diffusion with `dY = σ(Y) dB`, solved by Euler steps.
/// The frontier `B − X₁` is nondecreasing step by step.
#[derive(Debug, Clone)]
pub struct ScaleSolver {
    p: f64,
    pub y: f64,
}

impl ScaleSolver {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
        }
        Ok(Self {
            p: positive_excursion_probability(gamma),
            y: 0.0,
        })
    }

    #[inline]
    pub fn step(&mut self, db: f64) {
        let sigma = if self.y >= 0.0 { 1.0 - self.p } else { self.p };
        self.y += sigma * db;
    }

    #[inline]
    pub fn x(&self) -> f64 {
        if self.y >= 0.0 {
            self.y / (1.0 - self.p)
        } else {
            self.y / self.p
        }
    }
}
