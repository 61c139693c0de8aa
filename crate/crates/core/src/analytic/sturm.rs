use super::ln_besq_transition_density;
use crate::error::{invalid, nonnegative, positive, Error, Result};
use crate::path::Path;

/// Nonnegative piecewise-constant function on `[0, ∞)`, zero from
/// `support_end` on. Piece `i` covers `[breakpoints[i], breakpoints[i+1])`,
/// the last piece ends at `support_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    support_end: f64,
}

impl PiecewiseFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, support_end: f64) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(invalid(
                "breakpoints",
                "need one value per breakpoint and at least one piece",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(invalid("breakpoints", "first breakpoint must be 0"));
        }
        if support_end.is_infinite() {
            return Err(Error::Unsupported(
                "piecewise function with unbounded support".into(),
            ));
        }
        if !(support_end > *breakpoints.last().unwrap()) {
            return Err(invalid("support_end", "must exceed the last breakpoint"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("breakpoints", "must be strictly increasing"));
        }
        for &v in &values {
            nonnegative("values", v)?;
        }
        Ok(Self {
            breakpoints,
            values,
            support_end,
        })
    }

    /// The zero function.
    pub fn zero() -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![0.0],
            support_end: 1.0,
        }
    }

    /// `θ · 1[from, to)`.
    pub fn indicator(theta: f64, from: f64, to: f64) -> Result<Self> {
        nonnegative("from", from)?;
        if !(to > from) {
            return Err(invalid("to", "must exceed from"));
        }
        if from == 0.0 {
            Self::new(vec![0.0], vec![theta], to)
        } else {
            Self::new(vec![0.0, from], vec![0.0, theta], to)
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    fn piece_end(&self, i: usize) -> f64 {
        self.breakpoints
            .get(i + 1)
            .copied()
            .unwrap_or(self.support_end)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 || x >= self.support_end {
            return 0.0;
        }
        let i = self.breakpoints.partition_point(|&b| b <= x) - 1;
        self.values[i]
    }

    /// `∫ f(x) Y(x) dx` for the piecewise-linear interpolation of a path
    /// indexed by `x`.
    pub fn integrate_against(&self, path: &Path) -> f64 {
        let mut total = 0.0;
        for (i, &k) in self.values.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            let lo = self.breakpoints[i].max(path.t0);
            let hi = self.piece_end(i).min(path.end_time());
            if hi > lo {
                total += k * path_integral(path, lo, hi);
            }
        }
        total
    }
}

/// Integral of the linear interpolation of `path` over `[lo, hi]`.
fn path_integral(path: &Path, lo: f64, hi: f64) -> f64 {
    let first = ((lo - path.t0) / path.dt).floor() as usize;
    let last = (((hi - path.t0) / path.dt).ceil() as usize).min(path.steps());
    let mut total = 0.0;
    for k in first..last {
        let (a, b) = (path.time(k), path.time(k + 1));
        let (s, e) = (a.max(lo), b.min(hi));
        if e > s {
            total += 0.5 * (path.value_at(s) + path.value_at(e)) * (e - s);
        }
    }
    total
}

/// Decaying solution of `φ'' = 2fφ`, `φ(0) = 1`, together with the
/// companion `ψ'' = 2fψ`, `ψ(0) = 0`, `ψ'(0) = 1` used for `σ² = φψ`.
///
/// Both are stored in log scale at the breakpoints, so long strongly damped
/// supports neither overflow nor underflow.
#[derive(Debug, Clone)]
pub struct SturmLiouvilleSolution {
    nodes: Vec<f64>,
    omega: Vec<f64>,
    ln_phi: Vec<f64>,
    log_deriv: Vec<f64>,
    ln_psi_scale: Vec<f64>,
    psi_pair: Vec<(f64, f64)>,
}

/// `ln(p cosh(ωd) + q sinh(ωd)/ω)` for a positive combination; `q d` replaces
/// the sinh term when `ω = 0`.
fn ln_comb(omega: f64, d: f64, p: f64, q: f64) -> f64 {
    if omega == 0.0 {
        return (p + q * d).ln();
    }
    let y = omega * d;
    if y < 20.0 {
        (p * y.cosh() + q * y.sinh() / omega).ln()
    } else {
        let e = (-2.0 * y).exp();
        y - std::f64::consts::LN_2 + (p * (1.0 + e) + q * (1.0 - e) / omega).ln()
    }
}

impl SturmLiouvilleSolution {
    fn piece(&self, x: f64) -> usize {
        self.nodes.partition_point(|&b| b <= x) - 1
    }

    fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn ln_phi(&self, x: f64) -> f64 {
        if x >= self.nodes[self.last()] {
            return self.ln_phi[self.last()];
        }
        let i = self.piece(x.max(0.0));
        let d = self.nodes[i + 1] - x;
        self.ln_phi[i + 1] + ln_comb(self.omega[i], d, 1.0, -self.log_deriv[i + 1])
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.ln_phi(x).exp()
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        if x >= self.nodes[self.last()] {
            return 0.0;
        }
        let i = self.piece(x.max(0.0));
        let w = self.omega[i];
        let d = self.nodes[i + 1] - x;
        -(self.ln_phi[i + 1] + ln_comb(w, d, -self.log_deriv[i + 1], w * w)).exp()
    }

    pub fn phi_prime_0(&self) -> f64 {
        self.log_deriv[0]
    }

    pub fn phi_inf(&self) -> f64 {
        self.ln_phi[self.last()].exp()
    }

    pub fn ln_psi(&self, x: f64) -> f64 {
        let m = self.last();
        if x >= self.nodes[m] {
            let (p, q) = self.psi_pair[m];
            return self.ln_psi_scale[m] + (p + q * (x - self.nodes[m])).ln();
        }
        let i = self.piece(x.max(0.0));
        let (p, q) = self.psi_pair[i];
        self.ln_psi_scale[i] + ln_comb(self.omega[i], x - self.nodes[i], p, q)
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.ln_psi(x).exp()
    }

    /// `σ²(x) = φ(x)² ∫₀ˣ φ(u)⁻² du`.
    pub fn sigma_sq(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (self.ln_phi(x) + self.ln_psi(x)).exp()
    }
}

pub fn solve_sturm_liouville(f: &PiecewiseFn) -> Result<SturmLiouvilleSolution> {
    let m = f.values.len();
    let mut nodes = f.breakpoints.clone();
    nodes.push(f.support_end);
    let omega: Vec<f64> = f.values.iter().map(|k| (2.0 * k).sqrt()).collect();

    // Backward sweep from the flat tail: log-derivative and log growth ratio.
    let mut log_deriv = vec![0.0; m + 1];
    let mut ln_ratio = vec![0.0; m];
    for i in (0..m).rev() {
        let (w, u) = (omega[i], log_deriv[i + 1]);
        let len = nodes[i + 1] - nodes[i];
        ln_ratio[i] = ln_comb(w, len, 1.0, -u);
        log_deriv[i] = if w == 0.0 {
            u / (1.0 - u * len)
        } else {
            let th = (w * len).tanh();
            (u - w * th) / (1.0 - u * th / w)
        };
    }
    let mut ln_phi = vec![0.0; m + 1];
    for i in 0..m {
        ln_phi[i + 1] = ln_phi[i] - ln_ratio[i];
    }

    // Forward sweep for ψ, renormalized at every node.
    let mut ln_psi_scale = vec![0.0; m + 1];
    let mut psi_pair = vec![(0.0, 1.0); m + 1];
    for i in 0..m {
        let w = omega[i];
        let len = nodes[i + 1] - nodes[i];
        let (p, q) = psi_pair[i];
        let ln_val = ln_comb(w, len, p, q);
        let ln_der = ln_comb(w, len, q, p * w * w);
        let top = ln_val.max(ln_der);
        ln_psi_scale[i + 1] = ln_psi_scale[i] + top;
        psi_pair[i + 1] = ((ln_val - top).exp(), (ln_der - top).exp());
    }
    if ln_phi.iter().chain(&ln_psi_scale).any(|v| v.is_nan()) {
        return Err(Error::Degenerate("Sturm–Liouville propagation failed".into()));
    }

    Ok(SturmLiouvilleSolution {
        nodes,
        omega,
        ln_phi,
        log_deriv,
        ln_psi_scale,
        psi_pair,
    })
}

/// `E_v exp(−∫₀^∞ f(x) Y(x) dx) = φ(∞)^{dim/2} exp((v/2) φ'(0))` for a BESQ
/// process of (possibly negative) dimension `dim` started at `v`.
pub fn laplace_functional(dim: f64, v: f64, sol: &SturmLiouvilleSolution) -> Result<f64> {
    if !dim.is_finite() {
        return Err(invalid("dim", "must be finite"));
    }
    nonnegative("v", v)?;
    let phi_inf = sol.phi_inf();
    if phi_inf == 0.0 && dim != 0.0 {
        return Err(Error::Degenerate(
            "φ(∞) underflows to 0; the functional is 0 or infinite".into(),
        ));
    }
    let head = if dim == 0.0 { 0.0 } else { dim / 2.0 * sol.ln_phi(f64::INFINITY) };
    let ln = head + v / 2.0 * sol.phi_prime_0();
    Ok(ln.exp())
}

/// `E(exp(−∫₀ˣ f(u) Y(u) du) | Y(0) = a, Y(x) = b)` for BESQ(γ).
pub fn bridge_functional(gamma_dim: f64, a: f64, b: f64, x: f64, f: &PiecewiseFn) -> Result<f64> {
    positive("gamma_dim", gamma_dim)?;
    nonnegative("a", a)?;
    nonnegative("b", b)?;
    positive("x", x)?;
    let sol = solve_sturm_liouville(f)?;
    let phi_x = sol.phi(x);
    let s2 = sol.sigma_sq(x);
    let nu = gamma_dim / 2.0;
    let mut ln = nu * phi_x.ln() + a / 2.0 * sol.phi_prime_0() - b / 2.0 * sol.phi_prime(x) / phi_x;
    if b > 0.0 {
        let den = ln_besq_transition_density(gamma_dim, x, a, b)?;
        if den == f64::NEG_INFINITY {
            return Err(Error::ZeroDensity);
        }
        ln += ln_besq_transition_density(gamma_dim, s2, a * phi_x * phi_x, b)? - den;
    } else {
        // Ratio of the two densities in the limit y → 0⁺.
        ln += nu * (x / s2).ln() - a * phi_x * phi_x / (2.0 * s2) + a / (2.0 * x);
    }
    let value = ln.exp();
    if !value.is_finite() {
        return Err(Error::ZeroDensity);
    }
    Ok(value)
}
