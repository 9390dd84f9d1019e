//! Urn oracle, exchangeable data generator, and the replication harness.
//!
//! The urn dynamic program recomputes the finite-horizon coverage law in
//! exact rational arithmetic, independently of the closed form in
//! [`crate::dist`]; the harness generates Friedman-process data, runs the
//! full split-conformal pipeline per replication, and aggregates realized
//! coverages deterministically (fixed master seed, one ChaCha stream per
//! replication, order-independent reduction), so results are byte-identical
//! across runs and worker counts.

use crate::conformal::{self, ConformityScorer, Dataset};
use crate::dist::{CoverageParams, FiniteHorizonPmf};
use crate::models::{self, ModelSpec};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Pólya urn: each drawn ball is returned together with one new ball of the
/// same color, so the counts only ever grow.
#[derive(Clone, Copy, Debug)]
pub struct UrnState {
    black: u64,
    gray: u64,
}

impl UrnState {
    /// Starts with `b` black and `g` gray balls, `b + g = n + 1`.
    pub fn new(params: &CoverageParams) -> Self {
        UrnState { black: params.b(), gray: params.g() }
    }

    pub fn black(&self) -> u64 {
        self.black
    }

    pub fn gray(&self) -> u64 {
        self.gray
    }

    /// Draws one ball (true = black) and adds its copy.
    pub fn draw<R: Rng>(&mut self, rng: &mut R) -> bool {
        let p_black = self.black as f64 / (self.black + self.gray) as f64;
        let black = rng.random::<f64>() < p_black;
        if black {
            self.black += 1;
        } else {
            self.gray += 1;
        }
        black
    }
}

/// The finite-horizon coverage law by exact-rational dynamic programming
/// over the urn: `p(t+1, s+1) += p(t, s) * (b+s)/(n+1+t)` and
/// `p(t+1, s) += p(t, s) * (g+t-s)/(n+1+t)`. Independent oracle for the
/// closed-form pmf; capped at `m <= 64` because numerators and denominators
/// grow factorially.
pub fn urn_pmf_oracle_exact(params: &CoverageParams, m: u64) -> Result<Vec<BigRational>> {
    if m == 0 {
        return Err(Error::InvalidData("horizon m must be >= 1".into()));
    }
    if m > 64 {
        return Err(Error::OracleTooLarge { m });
    }
    let (n, b, g) = (params.n(), params.b(), params.g());
    let mut probs = vec![BigRational::from_integer(BigInt::from(1))];
    for t in 0..m {
        let total = BigInt::from(n + 1 + t);
        let mut next = vec![BigRational::zero(); t as usize + 2];
        for (s, p) in probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let s64 = s as u64;
            let to_black = BigRational::new(BigInt::from(b + s64), total.clone());
            let to_gray = BigRational::new(BigInt::from(g + t - s64), total.clone());
            next[s + 1] += p * to_black;
            next[s] += p * to_gray;
        }
        probs = next;
    }
    Ok(probs)
}

/// [`urn_pmf_oracle_exact`] packaged as a [`FiniteHorizonPmf`] (log space).
pub fn urn_pmf_oracle(params: &CoverageParams, m: u64) -> Result<FiniteHorizonPmf> {
    let exact = urn_pmf_oracle_exact(params, m)?;
    let log_probs = exact
        .iter()
        .map(|p| p.to_f64().expect("urn probabilities fit in f64").ln())
        .collect();
    Ok(FiniteHorizonPmf::from_log_probs(*params, m, log_probs))
}

/// Samples the urn indicator sequence `Z_1..Z_m`; same seed, same sequence.
pub fn urn_sample(params: &CoverageParams, m: u64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut urn = UrnState::new(params);
    (0..m).map(|_| urn.draw(&mut rng)).collect()
}

/// Feature count of the Friedman process: five active predictors, five noise.
pub const FRIEDMAN_DIM: usize = 10;

/// Noiseless Friedman response
/// `10 sin(pi x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + 5 x5`; the last five
/// coordinates do not enter.
pub fn friedman_response(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// Friedman-process rows: ten i.i.d. U[0,1] predictors, response
/// `friedman_response(x) + w + eps` with `eps ~ N(0,1)` and `w` the shared
/// shift the caller drew once per replication (an Exp(1) draw in the
/// harness; the source of exchangeable-but-dependent rows).
pub fn friedman_generate(rows: usize, w: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    friedman_with_rng(rows, w, &mut rng)
}

fn friedman_with_rng(rows: usize, w: f64, rng: &mut ChaCha8Rng) -> Dataset {
    let mut xs = Vec::with_capacity(rows);
    let mut ys = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: Vec<f64> = (0..FRIEDMAN_DIM).map(|_| rng.random()).collect();
        let eps: f64 = rng.sample(StandardNormal);
        ys.push(friedman_response(&x) + w + eps);
        xs.push(x);
    }
    Dataset::new(xs, ys).expect("generated rows are rectangular and finite")
}

/// Scorer construction recipe for the harness: which conformity function to
/// use and how to fit its models on each replication's training split.
#[derive(Clone, Debug, PartialEq)]
pub enum ScorerSpec {
    Standard { model: ModelSpec },
    /// `model` for the center, k-NN mean absolute residual of that model
    /// (with `dispersion_k` neighbors) for the scale.
    LocallyWeighted { model: ModelSpec, dispersion_k: usize },
    /// k-NN quantile estimators at levels `p_lo < p_hi`.
    Cqr { k: usize, p_lo: f64, p_hi: f64 },
}

impl ScorerSpec {
    /// Fits the models on `train` and assembles the scorer.
    pub fn build(&self, train: &Dataset) -> Result<ConformityScorer> {
        match self {
            ScorerSpec::Standard { model } => {
                Ok(ConformityScorer::Standard { psi: models::fit(model, train)? })
            }
            ScorerSpec::LocallyWeighted { model, dispersion_k } => {
                let psi = models::fit(model, train)?;
                let sigma_spec =
                    ModelSpec::KnnDispersion { base: Box::new(model.clone()), k: *dispersion_k };
                Ok(ConformityScorer::LocallyWeighted {
                    psi,
                    sigma: models::fit(&sigma_spec, train)?,
                })
            }
            ScorerSpec::Cqr { k, p_lo, p_hi } => {
                if !(p_lo < p_hi) {
                    return Err(Error::BadHyperparameter(format!(
                        "CQR needs p_lo < p_hi, got {p_lo} >= {p_hi}"
                    )));
                }
                Ok(ConformityScorer::Cqr {
                    xi_lo: models::fit(&ModelSpec::KnnQuantile { k: *k, p: *p_lo }, train)?,
                    xi_hi: models::fit(&ModelSpec::KnnQuantile { k: *k, p: *p_hi }, train)?,
                })
            }
        }
    }
}

/// One Monte Carlo experiment: `replications` independent draws of a
/// training/calibration/future partition of the Friedman process.
#[derive(Clone, Debug)]
pub struct ReplicationConfig {
    /// Training sample size.
    pub r: usize,
    /// Calibration sample size.
    pub n: usize,
    /// Future horizon.
    pub m: usize,
    /// Nominal miscoverage level.
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub scorer: ScorerSpec,
}

/// Aggregate of one experiment.
#[derive(Clone, Debug)]
pub struct ReplicationSummary {
    /// Realized coverage per replication, in replication order.
    pub coverages: Vec<f64>,
    /// Frequency of each observed success count `k` (coverage `k/m`).
    pub empirical_pmf: BTreeMap<u64, f64>,
    pub min_coverage: f64,
    /// Fraction of replications with coverage strictly below `1 - alpha`.
    pub below_lower_bound_fraction: f64,
}

/// Runs all replications and aggregates.
///
/// Replication `i` derives its generator by fixing the master seed and
/// selecting ChaCha stream `i`, so draws are independent of scheduling; the
/// per-replication results are collected in index order. Runs on the current
/// rayon thread pool (install a scoped pool to cap workers).
pub fn run_replications(config: &ReplicationConfig) -> Result<ReplicationSummary> {
    if config.r == 0 || config.n == 0 || config.m == 0 || config.replications == 0 {
        return Err(Error::InvalidData(
            "r, n, m, and replications must all be >= 1".into(),
        ));
    }
    // Fail fast on a degenerate (n, alpha) before spawning work.
    CoverageParams::new(config.n as u64, config.alpha)?;
    let successes: Vec<u64> = (0..config.replications)
        .into_par_iter()
        .map(|i| replicate_once(config, i as u64))
        .collect::<Result<Vec<u64>>>()?;
    Ok(summarize(config, &successes))
}

/// One replication: draw the shared shift, generate the three splits, fit,
/// calibrate, and count covered future points.
fn replicate_once(config: &ReplicationConfig, index: u64) -> Result<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(index);
    // Exp(1) by inverse transform; ln_1p keeps small u exact.
    let u: f64 = rng.random();
    let w = -(-u).ln_1p();
    let train = friedman_with_rng(config.r, w, &mut rng);
    let calib = friedman_with_rng(config.n, w, &mut rng);
    let future = friedman_with_rng(config.m, w, &mut rng);
    let scorer = config.scorer.build(&train)?;
    let predictor = conformal::calibrate(scorer, &calib, config.alpha)?;
    let indicators = predictor.coverage_indicators(&future)?;
    Ok(indicators.iter().filter(|&&z| z).count() as u64)
}

fn summarize(config: &ReplicationConfig, successes: &[u64]) -> ReplicationSummary {
    let m = config.m as f64;
    let reps = successes.len() as f64;
    let coverages: Vec<f64> = successes.iter().map(|&k| k as f64 / m).collect();
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &k in successes {
        *counts.entry(k).or_insert(0) += 1;
    }
    let empirical_pmf = counts.into_iter().map(|(k, c)| (k, c as f64 / reps)).collect();
    let min_coverage = coverages.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = 1.0 - config.alpha;
    let below = coverages.iter().filter(|&&c| c < bound).count() as f64 / reps;
    ReplicationSummary {
        coverages,
        empirical_pmf,
        min_coverage,
        below_lower_bound_fraction: below,
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `coverages` and
/// the exact pmf, as the sup over the pmf's support points `k/m` of
/// `|ECDF(k/m) - CDF(k/m)|` (both CDFs right-continuous).
pub fn ks_distance(coverages: &[f64], theoretical: &FiniteHorizonPmf) -> f64 {
    assert!(!coverages.is_empty(), "KS distance needs at least one coverage");
    let mut sorted = coverages.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let m = theoretical.m();
    let mut cdf = 0.0;
    let mut seen = 0usize;
    let mut sup = 0.0f64;
    for k in 0..=m {
        let t = k as f64 / m as f64;
        cdf += theoretical.prob(k);
        while seen < sorted.len() && sorted[seen] <= t {
            seen += 1;
        }
        sup = sup.max((seen as f64 / total - cdf).abs());
    }
    sup
}
