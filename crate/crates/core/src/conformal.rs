//! Conformity scoring, calibration, prediction intervals, and future
//! coverage.
//!
//! The split is structural: scorers are built from models fitted on the
//! training sample only, [`calibrate`] sees the calibration sample only, and
//! coverage is evaluated on future points the predictor has never touched.
//! Membership in the (open) prediction set is the strict comparison
//! `score(x, y) < threshold`, where the threshold is the calibration score
//! of rank `b = ceil((1-alpha)(n+1))`.

use crate::dist::CoverageParams;
use crate::models::FittedModel;
use crate::{Error, Result};
use num_rational::Ratio;

/// Rows of predictors with one real response per row. Rectangular, all
/// entries finite; both are validated at construction so downstream sorting
/// and distance computations never meet a NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    response: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        if rows.len() != response.len() {
            return Err(Error::InvalidData(format!(
                "{} predictor rows but {} responses",
                rows.len(),
                response.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} features, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("row {i} contains a non-finite feature")));
            }
        }
        if let Some(i) = response.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidData(format!("response {i} is non-finite")));
        }
        Ok(Dataset { rows, response })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Feature count; 0 for an empty dataset.
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn response(&self, i: usize) -> f64 {
        self.response[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.response
    }
}

/// A conformity function fitted on the training split. Holding only fitted
/// models (never calibration or future data) enforces its measurability with
/// respect to the training sample.
#[derive(Clone, Debug)]
pub enum ConformityScorer {
    /// Absolute residual `|y - psi(x)|`; intervals of fixed width.
    Standard { psi: FittedModel },
    /// Weighted residual `|y - psi(x)| / sigma(x)`; widths track dispersion.
    LocallyWeighted { psi: FittedModel, sigma: FittedModel },
    /// Conformalized quantile regression, `max{xi_lo(x) - y, y - xi_hi(x)}`.
    Cqr { xi_lo: FittedModel, xi_hi: FittedModel },
}

impl ConformityScorer {
    /// Conformity score of the pair `(x, y)`.
    ///
    /// The CQR score is negative whenever `y` lies strictly inside the
    /// quantile band: the two max arguments sum to `xi_lo - xi_hi <= 0`.
    /// This orientation is what inverts to the interval
    /// `(xi_lo - s, xi_hi + s)`; the transposed `max{xi_hi - y, y - xi_lo}`
    /// is bounded below by `(xi_hi - xi_lo)/2 >= 0` and inverts to a
    /// different (usually empty) set. With `xi_lo = xi_hi = psi` the score
    /// reduces exactly to the standard `|y - psi(x)|`.
    pub fn score(&self, x: &[f64], y: f64) -> Result<f64> {
        match self {
            ConformityScorer::Standard { psi } => Ok((y - psi.predict(x)).abs()),
            ConformityScorer::LocallyWeighted { psi, sigma } => {
                let s = sigma.predict(x);
                if s <= 0.0 {
                    return Err(Error::DispersionNotPositive { value: s });
                }
                Ok((y - psi.predict(x)).abs() / s)
            }
            ConformityScorer::Cqr { xi_lo, xi_hi } => {
                Ok((xi_lo.predict(x) - y).max(y - xi_hi.predict(x)))
            }
        }
    }
}

/// An open interval `(lower, upper)`. The empty case `upper <= lower` is
/// representable: a CQR threshold can be negative enough to cross the
/// endpoints, and then nothing is covered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PredictionInterval {
    pub fn is_empty(&self) -> bool {
        !(self.lower < self.upper)
    }

    /// Open-endpoint membership. Equivalent to `score(x, y) < threshold` in
    /// real arithmetic; [`CalibratedPredictor::covers`] is the normative
    /// score-side test.
    pub fn contains(&self, y: f64) -> bool {
        self.lower < y && y < self.upper
    }
}

/// A scorer plus its calibration summary: the ascending calibration scores
/// and the rank-`b` threshold that defines every prediction set.
#[derive(Clone, Debug)]
pub struct CalibratedPredictor {
    scorer: ConformityScorer,
    params: CoverageParams,
    sorted_scores: Vec<f64>,
    threshold: f64,
    tie_flag: bool,
}

/// Scores the calibration sample, sorts, and stores the rank-`b` score
/// (1-indexed) as the threshold.
///
/// Exactly tied calibration scores set `tie_flag`: the coverage guarantee is
/// stated for almost-surely-distinct scores, and the caller should surface a
/// warning rather than have the data silently jittered.
pub fn calibrate(scorer: ConformityScorer, calib: &Dataset, alpha: f64) -> Result<CalibratedPredictor> {
    if calib.is_empty() {
        return Err(Error::InvalidData("calibration sample is empty".into()));
    }
    let params = CoverageParams::new(calib.len() as u64, alpha)?;
    let mut scores = (0..calib.len())
        .map(|i| scorer.score(calib.row(i), calib.response(i)))
        .collect::<Result<Vec<f64>>>()?;
    scores.sort_unstable_by(f64::total_cmp);
    let tie_flag = scores.windows(2).any(|w| w[0] == w[1]);
    let threshold = scores[params.b() as usize - 1];
    Ok(CalibratedPredictor { scorer, params, sorted_scores: scores, threshold, tie_flag })
}

impl CalibratedPredictor {
    pub fn scorer(&self) -> &ConformityScorer {
        &self.scorer
    }

    pub fn params(&self) -> &CoverageParams {
        &self.params
    }

    /// Ascending calibration scores, length `n`.
    pub fn sorted_scores(&self) -> &[f64] {
        &self.sorted_scores
    }

    /// The calibration score of rank `b` (1-indexed).
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// True if any two calibration scores were exactly equal.
    pub fn tie_flag(&self) -> bool {
        self.tie_flag
    }

    /// The prediction set at `x` in its interval form:
    /// standard `(psi - s, psi + s)`, locally weighted
    /// `(psi - s*sigma, psi + s*sigma)`, CQR `(xi_lo - s, xi_hi + s)`,
    /// with `s` the calibration threshold. Endpoints are open.
    pub fn predict_interval(&self, x: &[f64]) -> Result<PredictionInterval> {
        let s = self.threshold;
        let (lower, upper) = match &self.scorer {
            ConformityScorer::Standard { psi } => {
                let center = psi.predict(x);
                (center - s, center + s)
            }
            ConformityScorer::LocallyWeighted { psi, sigma } => {
                let scale = sigma.predict(x);
                if scale <= 0.0 {
                    return Err(Error::DispersionNotPositive { value: scale });
                }
                let center = psi.predict(x);
                (center - s * scale, center + s * scale)
            }
            ConformityScorer::Cqr { xi_lo, xi_hi } => {
                (xi_lo.predict(x) - s, xi_hi.predict(x) + s)
            }
        };
        Ok(PredictionInterval { lower, upper })
    }

    /// The normative membership test: `score(x, y) < threshold`, strict.
    pub fn covers(&self, x: &[f64], y: f64) -> Result<bool> {
        Ok(self.scorer.score(x, y)? < self.threshold)
    }

    /// `Z_i = 1` iff future point `i` falls in its prediction set.
    pub fn coverage_indicators(&self, future: &Dataset) -> Result<Vec<bool>> {
        if future.is_empty() {
            return Err(Error::InvalidData("future sample is empty".into()));
        }
        (0..future.len())
            .map(|i| self.covers(future.row(i), future.response(i)))
            .collect()
    }
}

/// `C_m = (1/m) sum Z_i` as an exact rational.
pub fn future_coverage(indicators: &[bool]) -> Ratio<u64> {
    assert!(!indicators.is_empty(), "future coverage needs at least one indicator");
    let k = indicators.iter().filter(|&&z| z).count() as u64;
    Ratio::new(k, indicators.len() as u64)
}
