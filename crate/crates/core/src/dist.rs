//! Exact coverage distributions and the calibration-size planner.
//!
//! For a calibration sample of size `n` and miscoverage `alpha`, let
//! `b = ceil((1-alpha)(n+1))` and `g = floor(alpha(n+1))`. The realized
//! coverage of the next `m` predictions is beta-binomial,
//!
//! ```text
//! P(C = k/m) = C(m,k) * prod_{i=1..k}(b+i-1) * prod_{i=1..m-k}(g+i-1)
//!              / prod_{i=1..m}(n+i),    k = 0..m,
//! ```
//!
//! and converges to Beta(b, g) as `m` grows. Both laws and their moments are
//! evaluated here with log-gamma differences and exact integer binomial
//! sums; no naive floating products.

use crate::numeric::{exact_prod_floor, KahanSum, LogFactorial};
use crate::{Error, Result};

/// The pair `(n, alpha)` with its derived urn counts: `b` black balls (the
/// quantile rank) and `g` gray balls. `b + g = n + 1` by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageParams {
    n: u64,
    alpha: f64,
    b: u64,
    g: u64,
}

impl CoverageParams {
    /// Derives `b = ceil((1-alpha)(n+1))` and `g = floor(alpha(n+1))`.
    ///
    /// The floor is taken of the exact real product of the given `alpha`
    /// and `n + 1` (fma error-free transform), so a product that lands on an
    /// integer is never shifted by the rounding of `alpha * (n+1)` itself.
    /// `g = 0` (that is, `alpha < 1/(n+1)`) is a hard error: the prediction
    /// set would need a score rank beyond the calibration sample.
    pub fn new(n: u64, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidData("calibration size n must be >= 1".into()));
        }
        if !alpha.is_finite() || !(0.0 < alpha && alpha < 1.0) {
            return Err(Error::InvalidData(format!(
                "alpha must lie in the open interval (0, 1), got {alpha}"
            )));
        }
        let g = exact_prod_floor(alpha, (n + 1) as f64) as u64;
        if g == 0 {
            return Err(Error::DegenerateCalibration { n, alpha });
        }
        // ceil((1-alpha)(n+1)) = (n+1) - floor(alpha(n+1)) identically.
        let b = n + 1 - g;
        Ok(CoverageParams { n, alpha, b, g })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Black-ball count: the calibration quantile rank `ceil((1-alpha)(n+1))`.
    pub fn b(&self) -> u64 {
        self.b
    }

    /// Gray-ball count: `floor(alpha(n+1)) = n + 1 - b`, always >= 1.
    pub fn g(&self) -> u64 {
        self.g
    }
}

/// The exact law of the coverage `C = (1/m) * #covered` over the next `m`
/// observations, stored in log space on the support `k/m, k = 0..m`.
#[derive(Clone, Debug)]
pub struct FiniteHorizonPmf {
    params: CoverageParams,
    m: u64,
    log_probs: Vec<f64>,
}

impl FiniteHorizonPmf {
    /// Evaluates the beta-binomial pmf via log-factorial differences:
    ///
    /// ```text
    /// log P(C=k/m) = [lf(m)-lf(k)-lf(m-k)] + [lf(b+k-1)-lf(b-1)]
    ///              + [lf(g+m-k-1)-lf(g-1)] - [lf(n+m)-lf(n)]
    /// ```
    ///
    /// with `lf(j) = ln(j!)`. The differences are assembled in double-double
    /// precision: the table entries reach ~1e6 for m ~ 1e5, where a plain
    /// f64 combination would lose the 1e-10 normalization budget to rounding
    /// alone. Empty rising factorials (k=0 or k=m) contribute exactly zero.
    pub fn new(params: CoverageParams, m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidData("horizon m must be >= 1".into()));
        }
        let (n, b, g) = (params.n, params.b, params.g);
        let table = LogFactorial::with_max(n + m);
        let log_denom = table.lf_dd(n + m).sub(table.lf_dd(n));
        let mut log_probs = Vec::with_capacity(m as usize + 1);
        for k in 0..=m {
            // The two rising-factorial parts and the binomial part are each
            // symmetric as a set under k <-> m-k when b = g; combining them
            // in a value-canonical order makes pmf(k) = pmf(m-k) hold to the
            // bit, not just to rounding.
            let binom = table
                .lf_dd(m)
                .sub(table.lf_dd(k.min(m - k)))
                .sub(table.lf_dd(k.max(m - k)));
            let black = table.lf_dd(b + k - 1).sub(table.lf_dd(b - 1));
            let gray = table.lf_dd(g + m - k - 1).sub(table.lf_dd(g - 1));
            let (first, second) = if black.canonical_le(gray) { (black, gray) } else { (gray, black) };
            let lp = binom.add(first).add(second).sub(log_denom).value();
            debug_assert!(lp.is_finite() && lp <= 1e-12, "log-probability out of range: {lp}");
            log_probs.push(lp);
        }
        Ok(FiniteHorizonPmf { params, m, log_probs })
    }

    /// Builds a pmf from externally computed log-probabilities (the urn
    /// oracle path). Lengths must match the support `0..=m`.
    pub(crate) fn from_log_probs(params: CoverageParams, m: u64, log_probs: Vec<f64>) -> Self {
        assert_eq!(log_probs.len(), m as usize + 1);
        FiniteHorizonPmf { params, m, log_probs }
    }

    pub fn params(&self) -> &CoverageParams {
        &self.params
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Log-probabilities indexed by `k = 0..=m`.
    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// `P(C = k/m)`.
    pub fn prob(&self, k: u64) -> f64 {
        self.log_probs[k as usize].exp()
    }

    /// `E[C] = sum_k (k/m) P(C = k/m)`; equals `b/(n+1)` up to summation
    /// rounding, and lies in `[1-alpha, 1-alpha + 1/(n+1)]`.
    pub fn mean(&self) -> f64 {
        let m = self.m as f64;
        let mut sum = KahanSum::default();
        for k in 1..=self.m {
            sum.add(k as f64 / m * self.prob(k));
        }
        sum.value()
    }

    /// `P(C <= t)`: partial sum over support points `k/m <= t`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.partial_sum(|x| x <= t)
    }

    /// `P(C < t)`: partial sum over support points `k/m < t` (strict).
    pub fn cdf_strict(&self, t: f64) -> f64 {
        self.partial_sum(|x| x < t)
    }

    fn partial_sum(&self, included: impl Fn(f64) -> bool) -> f64 {
        let m = self.m as f64;
        let mut sum = KahanSum::default();
        for k in 0..=self.m {
            if included(k as f64 / m) {
                sum.add(self.prob(k));
            }
        }
        sum.value().clamp(0.0, 1.0)
    }
}

/// The limiting law of the coverage as the horizon grows: Beta(b, g) with
/// the integer shape parameters of [`CoverageParams`].
#[derive(Clone, Copy, Debug)]
pub struct LimitDistribution {
    params: CoverageParams,
}

impl LimitDistribution {
    pub fn new(params: CoverageParams) -> Self {
        LimitDistribution { params }
    }

    pub fn params(&self) -> &CoverageParams {
        &self.params
    }

    /// `H(t) = P(C_inf <= t)`, the regularized incomplete beta `I_t(b, g)`.
    ///
    /// Because `b + g - 1 = n`, this is exactly the integer binomial sum
    /// `sum_{j=b..n} C(n,j) t^j (1-t)^(n-j)`: all terms positive (no
    /// cancellation), Kahan-summed, each evaluated in log space.
    pub fn cdf(&self, t: f64) -> f64 {
        let table = LogFactorial::with_max(self.params.n);
        binomial_tail(&table, self.params.n, self.params.b, t)
    }

    /// Beta(b, g) density `n!/((b-1)!(g-1)!) t^(b-1) (1-t)^(g-1)` at
    /// `t in (0, 1)`, evaluated in log space.
    pub fn pdf(&self, t: f64) -> f64 {
        assert!(0.0 < t && t < 1.0, "pdf defined on the open interval (0,1), got {t}");
        let (n, b, g) = (self.params.n, self.params.b, self.params.g);
        let table = LogFactorial::with_max(n);
        let log_coeff = table.lf_dd(n).sub(table.lf_dd(b - 1)).sub(table.lf_dd(g - 1));
        (log_coeff.value() + (b - 1) as f64 * t.ln() + (g - 1) as f64 * (-t).ln_1p()).exp()
    }

    /// `(mean, variance) = (b/(n+1), b*g / ((n+1)^2 (n+2)))`.
    pub fn moments(&self) -> (f64, f64) {
        let (n, b, g) = (self.params.n as f64, self.params.b as f64, self.params.g as f64);
        (b / (n + 1.0), b * g / ((n + 1.0) * (n + 1.0) * (n + 2.0)))
    }
}

/// Normal approximation of the limit law: `C_inf ~ N(1-alpha, alpha(1-alpha)/n)`
/// for large `n` (from `sqrt(n)(C_inf - (1-alpha)) -> N(0, alpha(1-alpha))`).
/// Returns `(center, variance)`.
pub fn limit_normal_approx(n: u64, alpha: f64) -> Result<(f64, f64)> {
    CoverageParams::new(n, alpha)?;
    Ok((1.0 - alpha, alpha * (1.0 - alpha) / n as f64))
}

/// Smallest `n <= n_max` whose limiting coverage law concentrates in
/// `(1-alpha-epsilon, 1-alpha+epsilon]` with probability at least `gamma`:
///
/// ```text
/// min{ n >= 1 : H(1-alpha+epsilon) - H(1-alpha-epsilon) >= gamma }
/// ```
///
/// The scan is an exhaustive upward walk (the ceil/floor jumps in `b`, `g`
/// make the objective non-monotone in `n`, so bisection is unsound), skipping
/// sizes with `g = 0`. One log-factorial table grows across the scan, so the
/// cost per candidate `n` is the `g` terms of its binomial sum; an infeasible
/// `(epsilon, gamma)` pair therefore costs O(sum of g) up to `n_max` before
/// reporting [`Error::PlanNotFound`].
pub fn plan_calibration_size(alpha: f64, epsilon: f64, gamma: f64, n_max: u64) -> Result<u64> {
    if !alpha.is_finite() || !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidData(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidData(format!("epsilon must be positive, got {epsilon}")));
    }
    if !gamma.is_finite() || !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::InvalidData(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if n_max == 0 {
        return Err(Error::InvalidData("n_max must be >= 1".into()));
    }
    let lo = 1.0 - alpha - epsilon;
    let hi = 1.0 - alpha + epsilon;
    let mut table = LogFactorial::new();
    for n in 1..=n_max {
        let params = match CoverageParams::new(n, alpha) {
            Ok(p) => p,
            Err(Error::DegenerateCalibration { .. }) => continue,
            Err(e) => return Err(e),
        };
        table.ensure(n);
        let conc = binomial_tail(&table, n, params.b, hi) - binomial_tail(&table, n, params.b, lo);
        if conc >= gamma {
            return Ok(n);
        }
    }
    Err(Error::PlanNotFound { n_max })
}

/// `I_t(b, n+1-b) = sum_{j=b..n} C(n,j) t^j (1-t)^(n-j)`, clamped to [0, 1].
/// The table must cover `n`.
pub(crate) fn binomial_tail(table: &LogFactorial, n: u64, b: u64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let log_t = t.ln();
    let log_1mt = (-t).ln_1p();
    let mut sum = KahanSum::default();
    for j in b..=n {
        sum.add((table.lchoose(n, j) + j as f64 * log_t + (n - j) as f64 * log_1mt).exp());
    }
    sum.value().clamp(0.0, 1.0)
}
