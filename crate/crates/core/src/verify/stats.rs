//! Goodness-of-fit, moment and independence tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::analytic::quadrature;
use crate::error::{nonnegative, Error, Result};
use crate::rng::RandomStream;

pub const MIN_SAMPLES: usize = 100;
pub const MIN_PAIRS: usize = 500;
pub const DEFAULT_LEVEL: f64 = 0.001;

/// Outcome of one check. Hypothesis tests carry a p-value and pass when it
/// is at least `threshold`; deterministic or tolerance checks carry an error
/// and pass when it is at most `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub error: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
    pub n_samples: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestResult {
    pub fn hypothesis(name: impl Into<String>, statistic: f64, p_value: f64, n: usize) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: Some(p_value),
            error: None,
            threshold: DEFAULT_LEVEL,
            passed: p_value >= DEFAULT_LEVEL,
            n_samples: n,
            seeds: Vec::new(),
            note: None,
        }
    }

    pub fn tolerance(name: impl Into<String>, statistic: f64, error: f64, threshold: f64, n: usize) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: None,
            error: Some(error),
            threshold,
            passed: error <= threshold,
            n_samples: n,
            seeds: Vec::new(),
            note: None,
        }
    }

    /// Re-evaluates `passed` against a different significance level.
    pub fn at_level(mut self, level: f64) -> Self {
        if let Some(p) = self.p_value {
            self.threshold = level;
            self.passed = p >= level;
        }
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // Jacobi-theta form converges fast for small arguments.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += (-j * j * c).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Precondition("samples contain NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// One-sample Kolmogorov–Smirnov test. Ties and atoms of `cdf` are handled
/// by comparing both the value and the left limit at every distinct sample.
pub fn ks_test(name: &str, samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            min: MIN_SAMPLES,
        });
    }
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f_hi = cdf(x);
        let f_lo = cdf(x.next_down());
        if f_hi.is_nan() || f_lo.is_nan() {
            return Err(Error::Precondition(format!("cdf is NaN at {x}")));
        }
        d = d
            .max((j as f64 / n - f_hi).abs())
            .max((i as f64 / n - f_lo).abs());
        i = j;
    }
    Ok(TestResult::hypothesis(name, d, ks_p_value(d, n), xs.len()))
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(name: &str, a: &[f64], b: &[f64]) -> Result<TestResult> {
    for s in [a, b] {
        if s.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: s.len(),
                min: MIN_SAMPLES,
            });
        }
    }
    let (xa, xb) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(TestResult::hypothesis(name, d, ks_p_value(d, n_eff), xa.len() + xb.len()))
}

/// Pearson chi-square test of binned samples against a density; bin
/// probabilities come from adaptive quadrature. Edges may end at `∞`.
pub fn chi_square_density_test(
    name: &str,
    samples: &[f64],
    density: impl Fn(f64) -> f64,
    bin_edges: &[f64],
) -> Result<TestResult> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            min: MIN_SAMPLES,
        });
    }
    if bin_edges.len() < 3 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("need at least two increasing bins".into()));
    }
    let k = bin_edges.len() - 1;
    let mut counts = vec![0usize; k];
    for &x in samples {
        if x < bin_edges[0] || x >= bin_edges[k] {
            return Err(Error::Precondition(format!("sample {x} outside the bins")));
        }
        let b = bin_edges.partition_point(|&e| e <= x) - 1;
        counts[b] += 1;
    }
    let mut probs = Vec::with_capacity(k);
    for w in bin_edges.windows(2) {
        let q = if w[1].is_infinite() {
            quadrature::integrate_from(&density, w[0], 1e-11)?
        } else {
            quadrature::integrate(&density, w[0], w[1], 1e-11)?
        };
        probs.push(q.value);
    }
    let n = samples.len() as f64;
    let total: f64 = probs.iter().sum();
    let mut stat = 0.0;
    for (c, p) in counts.iter().zip(&probs) {
        let e = n * p / total;
        if e <= 0.0 {
            return Err(Error::ZeroDensity);
        }
        stat += (*c as f64 - e).powi(2) / e;
    }
    let chi = ChiSquared::new((k - 1) as f64).map_err(|e| Error::Precondition(e.to_string()))?;
    let p = 1.0 - chi.cdf(stat);
    Ok(TestResult::hypothesis(name, stat, p, samples.len())
        .with_note(format!("probability mass in bins {total:.10}")))
}

/// Sample mean and its standard error.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Passes when the sample mean is within `k` standard errors of `expected`.
/// The statistic and error are both `|mean − expected| / se`.
pub fn mean_within(samples: &[f64], expected: f64, k: f64) -> TestResult {
    let (mean, se) = mean_and_se(samples);
    let z = if se > 0.0 {
        (mean - expected).abs() / se
    } else if (mean - expected).abs() <= 1e-12 * expected.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };
    TestResult::tolerance(format!("mean ≈ {expected:.6}"), mean, z, k, samples.len())
        .with_note(format!("standard error {se:.3e}"))
}

/// Sample mean and standard error of `e^{−λX}` for every `λ`.
pub fn empirical_laplace(samples: &[f64], lambdas: &[f64]) -> Result<Vec<(f64, f64)>> {
    for &x in samples {
        nonnegative("samples", x)?;
    }
    Ok(lambdas
        .iter()
        .map(|&lam| {
            let vals: Vec<f64> = samples.iter().map(|x| (-lam * x).exp()).collect();
            let (m, se) = mean_and_se(&vals);
            (m, if se.is_finite() { se } else { 0.0 })
        })
        .collect())
}

fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Mid-ranks scaled to (0, 1).
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let mid = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mid / (xs.len() as f64 + 1.0);
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

fn double_centered(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (xs[i] - xs[j]).abs();
        }
    }
    let row: Vec<f64> = (0..n).map(|i| m[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let all = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] += all - row[i] - row[j];
        }
    }
    m
}

const DCOR_SUBSAMPLE: usize = 500;
const PERMUTATIONS: usize = 999;

/// Tests independence of paired samples.
///
/// Both margins are replaced by their ranks. Two tests are combined with a
/// Bonferroni bound: the Pearson correlation of the ranks (normal
/// approximation to its Fisher z) and a permutation test on the distance
/// covariance of a subsample of at most 500 pairs. The permutations use a
/// stream derived from `seed`.
pub fn independence_test(name: &str, pairs: &[(f64, f64)], seed: u64) -> Result<TestResult> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::TooFewSamples {
            got: pairs.len(),
            min: MIN_PAIRS,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    for (label, v) in [("first", &xs), ("second", &ys)] {
        if v.iter().any(|x| x.is_nan()) {
            return Err(Error::Precondition(format!("{label} margin contains NaN")));
        }
        if v.iter().all(|x| *x == v[0]) {
            return Err(Error::Degenerate(format!("{label} margin is constant")));
        }
    }
    let (rx, ry) = (ranks(&xs), ranks(&ys));
    let n = pairs.len();
    let r = pearson(&rx, &ry);
    let z = r.clamp(-0.999_999, 0.999_999).atanh() * ((n as f64) - 3.0).sqrt();
    let p_corr = normal_two_sided_p(z);

    let step = n.div_ceil(DCOR_SUBSAMPLE);
    let sx: Vec<f64> = rx.iter().step_by(step).copied().collect();
    let sy: Vec<f64> = ry.iter().step_by(step).copied().collect();
    let m = sx.len();
    let a = double_centered(&sx);
    let b = double_centered(&sy);
    let dcov = |perm: &[usize]| {
        let mut s = 0.0;
        for i in 0..m {
            let pi = perm[i];
            let arow = &a[i * m..(i + 1) * m];
            let brow = &b[pi * m..(pi + 1) * m];
            for j in 0..m {
                s += arow[j] * brow[perm[j]];
            }
        }
        s
    };
    let mut perm: Vec<usize> = (0..m).collect();
    let observed = dcov(&perm);
    let mut rng = RandomStream::new(seed, 0x1d7e_57);
    let mut null = Vec::with_capacity(PERMUTATIONS);
    for _ in 0..PERMUTATIONS {
        for i in (1..m).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            perm.swap(i, j.min(i));
        }
        null.push(dcov(&perm));
    }
    let exceed = null.iter().filter(|&&d| d >= observed).count();
    let p_dcov = if exceed > 0 {
        (exceed + 1) as f64 / (PERMUTATIONS + 1) as f64
    } else {
        // Beyond the resolution of the permutations: moment-matched gamma tail.
        let (mean, se) = mean_and_se(&null);
        let var = se * se * null.len() as f64;
        gamma_ur(mean * mean / var, observed * mean / var)
    };
    let p = (2.0 * p_corr.min(p_dcov)).min(1.0);
    Ok(TestResult::hypothesis(name, r, p, n).with_note(format!(
        "rank correlation {r:.4} (p {p_corr:.3e}); distance covariance permutation p {p_dcov:.3e} on {m} pairs"
    )))
}
