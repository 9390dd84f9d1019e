//! Minimal deterministic regressors behind the conformity scorers.
//!
//! The coverage laws are model-agnostic, so these favor determinism and
//! zero tuning over predictive power: a constant mean and k-nearest-neighbor
//! mean, quantile, and dispersion estimators with Euclidean distance and
//! index tie-breaking.

use crate::conformal::Dataset;
use crate::numeric::exact_prod_ceil;
use crate::{Error, Result};

/// Dispersion predictions are floored here so locally weighted scores stay
/// defined even when the base model interpolates the training data exactly.
pub const DISPERSION_FLOOR: f64 = 1e-8;

/// Model family plus hyperparameters, the fit-time description.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    /// Predicts the training-response mean everywhere.
    ConstantMean,
    /// Mean response of the k nearest training rows.
    KnnMean { k: usize },
    /// Empirical `p`-quantile (lower/type-1) of the k nearest responses.
    KnnQuantile { k: usize, p: f64 },
    /// Mean absolute residual of `base` over the k nearest rows, floored at
    /// [`DISPERSION_FLOOR`]; the positive dispersion estimate for locally
    /// weighted scores.
    KnnDispersion { base: Box<ModelSpec>, k: usize },
}

/// A model fitted on the training split; predictions depend on nothing else.
#[derive(Clone, Debug)]
pub enum FittedModel {
    ConstantMean { mu: f64 },
    KnnMean { train: Dataset, k: usize },
    KnnQuantile { train: Dataset, k: usize, p: f64 },
    KnnDispersion { train: Dataset, base: Box<FittedModel>, k: usize, abs_residuals: Vec<f64> },
}

pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<FittedModel> {
    if train.is_empty() {
        return Err(Error::InvalidData("training sample is empty".into()));
    }
    let check_k = |k: usize| {
        if k == 0 || k > train.len() {
            Err(Error::BadHyperparameter(format!(
                "k = {k} outside 1..={} training rows",
                train.len()
            )))
        } else {
            Ok(())
        }
    };
    match spec {
        ModelSpec::ConstantMean => {
            let mu = train.responses().iter().sum::<f64>() / train.len() as f64;
            Ok(FittedModel::ConstantMean { mu })
        }
        ModelSpec::KnnMean { k } => {
            check_k(*k)?;
            Ok(FittedModel::KnnMean { train: train.clone(), k: *k })
        }
        ModelSpec::KnnQuantile { k, p } => {
            check_k(*k)?;
            if !p.is_finite() || !(0.0 < *p && *p < 1.0) {
                return Err(Error::BadHyperparameter(format!(
                    "quantile level p must lie in (0, 1), got {p}"
                )));
            }
            Ok(FittedModel::KnnQuantile { train: train.clone(), k: *k, p: *p })
        }
        ModelSpec::KnnDispersion { base, k } => {
            check_k(*k)?;
            let base = fit(base, train)?;
            let abs_residuals = (0..train.len())
                .map(|i| (train.response(i) - base.predict(train.row(i))).abs())
                .collect();
            Ok(FittedModel::KnnDispersion {
                train: train.clone(),
                base: Box::new(base),
                k: *k,
                abs_residuals,
            })
        }
    }
}

impl FittedModel {
    /// Point prediction at `x`. The feature dimension must match the
    /// training data (checked; ConstantMean accepts any `x`).
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::ConstantMean { mu } => *mu,
            FittedModel::KnnMean { train, k } => {
                let neighbors = k_nearest(train, x, *k);
                neighbors.iter().map(|&i| train.response(i)).sum::<f64>() / *k as f64
            }
            FittedModel::KnnQuantile { train, k, p } => {
                let neighbors = k_nearest(train, x, *k);
                let mut ys: Vec<f64> = neighbors.iter().map(|&i| train.response(i)).collect();
                ys.sort_unstable_by(f64::total_cmp);
                // Lower empirical quantile: order statistic ceil(p*k),
                // 1-indexed, with the rank taken from the exact real product.
                let rank = exact_prod_ceil(*p, *k as f64) as usize;
                ys[rank - 1]
            }
            FittedModel::KnnDispersion { train, k, abs_residuals, .. } => {
                let neighbors = k_nearest(train, x, *k);
                let mean =
                    neighbors.iter().map(|&i| abs_residuals[i]).sum::<f64>() / *k as f64;
                mean.max(DISPERSION_FLOOR)
            }
        }
    }
}

/// Indices of the k nearest training rows to `x`, ordered by
/// (squared Euclidean distance, original row index). Squared distance
/// preserves the Euclidean order; the index tie-break makes the result a
/// total order and hence deterministic.
fn k_nearest(train: &Dataset, x: &[f64], k: usize) -> Vec<usize> {
    assert_eq!(
        x.len(),
        train.dim(),
        "query has {} features, model was fitted on {}",
        x.len(),
        train.dim()
    );
    let mut order: Vec<(f64, usize)> = (0..train.len())
        .map(|i| {
            let row = train.row(i);
            let d2 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d2, i)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    // Fixed iteration order keeps downstream float sums reproducible.
    order.sort_unstable_by(cmp);
    order.into_iter().map(|(_, i)| i).collect()
}
