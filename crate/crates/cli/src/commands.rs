//! One handler per subcommand: validate, call into the library, serialize.

use crate::data::{csv_writer, read_table};
use crate::{CliError, ModelKind, ScoreKind};
use covplan_core::conformal::calibrate;
use covplan_core::dist::{
    plan_calibration_size, CoverageParams, FiniteHorizonPmf, LimitDistribution,
};
use covplan_core::models::ModelSpec;
use covplan_core::sim::{ks_distance, run_replications, ReplicationConfig, ScorerSpec};
use serde_json::json;
use std::path::Path;

pub fn plan(alpha: f64, epsilon: f64, gamma: f64, n_max: u64) -> Result<(), CliError> {
    let n = plan_calibration_size(alpha, epsilon, gamma, n_max)?;
    let dist = LimitDistribution::new(CoverageParams::new(n, alpha)?);
    let achieved = dist.cdf(1.0 - alpha + epsilon) - dist.cdf(1.0 - alpha - epsilon);
    print_json(&json!({ "n": n, "achieved_probability": achieved }));
    Ok(())
}

pub fn pmf(n: u64, alpha: f64, m: u64, out: Option<&Path>) -> Result<(), CliError> {
    let pmf = FiniteHorizonPmf::new(CoverageParams::new(n, alpha)?, m)?;
    let mut writer = csv_writer(out)?;
    writer.write_record(["k", "coverage", "probability"])?;
    for k in 0..=m {
        let coverage = k as f64 / m as f64;
        writer.write_record([k.to_string(), coverage.to_string(), pmf.prob(k).to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn limit(n: u64, alpha: f64, ts: &[f64]) -> Result<(), CliError> {
    for t in ts {
        if !t.is_finite() {
            return Err(CliError::Invalid(format!("--t must be finite, got {t}")));
        }
    }
    let deciles: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let grid = if ts.is_empty() { &deciles } else { ts };
    let params = CoverageParams::new(n, alpha)?;
    let dist = LimitDistribution::new(params);
    let (mean, variance) = dist.moments();
    let cdf: Vec<[f64; 2]> = grid.iter().map(|&t| [t, dist.cdf(t)]).collect();
    print_json(&json!({
        "b": params.b(),
        "g": params.g(),
        "mean": mean,
        "variance": variance,
        "cdf": cdf,
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    r: usize,
    n: usize,
    m: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    scorer: ScoreKind,
    model: ModelKind,
    k: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let config = ReplicationConfig {
        r,
        n,
        m,
        alpha,
        replications: reps,
        master_seed: seed,
        scorer: scorer_spec(scorer, model, k, alpha),
    };
    let summary = match worker_cap()? {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
            pool.install(|| run_replications(&config))
        }
        None => run_replications(&config),
    }?;
    if let Some(path) = out {
        let mut writer = csv_writer(Some(path))?;
        writer.write_record(["replication", "coverage"])?;
        for (i, c) in summary.coverages.iter().enumerate() {
            writer.write_record([i.to_string(), c.to_string()])?;
        }
        writer.flush()?;
    }
    let exact = FiniteHorizonPmf::new(CoverageParams::new(n as u64, alpha)?, m as u64)?;
    let mean = summary.coverages.iter().sum::<f64>() / summary.coverages.len() as f64;
    print_json(&json!({
        "mean": mean,
        "min": summary.min_coverage,
        "ks_vs_exact": ks_distance(&summary.coverages, &exact),
        "below_lower_bound_fraction": summary.below_lower_bound_fraction,
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn predict(
    train_path: &Path,
    calib_path: &Path,
    test_path: &Path,
    alpha: f64,
    scorer: ScoreKind,
    model: ModelKind,
    k: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let train = read_table(train_path)?;
    let calib = read_table(calib_path)?;
    let test = read_table(test_path)?;
    for (table, path) in [(&calib, calib_path), (&test, test_path)] {
        if table.dim() != train.dim() {
            return Err(CliError::Invalid(format!(
                "{} has {} feature columns, train has {}",
                path.display(),
                table.dim(),
                train.dim()
            )));
        }
    }
    let train_data = train.to_dataset("train")?;
    let conformity = scorer_spec(scorer, model, k, alpha).build(&train_data)?;
    let predictor = calibrate(conformity, &calib.to_dataset("calib")?, alpha)?;
    if predictor.tie_flag() {
        eprintln!(
            "warning: exact ties among calibration scores; the coverage \
             guarantee assumes almost-surely distinct scores"
        );
    }
    let mut writer = csv_writer(out)?;
    if test.has_responses() {
        writer.write_record(["lower", "upper", "covered"])?;
    } else {
        writer.write_record(["lower", "upper"])?;
    }
    for i in 0..test.len() {
        let x = test.row(i);
        let interval = predictor.predict_interval(x)?;
        let mut record = vec![interval.lower.to_string(), interval.upper.to_string()];
        if let Some(y) = test.response(i) {
            record.push(u8::from(predictor.covers(x, y)?).to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn scorer_spec(scorer: ScoreKind, model: ModelKind, k: usize, alpha: f64) -> ScorerSpec {
    let model_spec = match model {
        ModelKind::Constant => ModelSpec::ConstantMean,
        ModelKind::Knn => ModelSpec::KnnMean { k },
    };
    match scorer {
        ScoreKind::Standard => ScorerSpec::Standard { model: model_spec },
        ScoreKind::LocallyWeighted => {
            ScorerSpec::LocallyWeighted { model: model_spec, dispersion_k: k }
        }
        // Central band at the nominal level; its own miscoverage is split
        // evenly between the tails.
        ScoreKind::Cqr => ScorerSpec::Cqr { k, p_lo: alpha / 2.0, p_hi: 1.0 - alpha / 2.0 },
    }
}

/// Worker cap from COVPLAN_THREADS; unset means the default rayon pool.
fn worker_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("COVPLAN_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Invalid(format!("COVPLAN_THREADS: {e}"))),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(workers) if workers >= 1 => Ok(Some(workers)),
            _ => Err(CliError::Invalid(format!(
                "COVPLAN_THREADS must be a positive integer, got {raw:?}"
            ))),
        },
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON from finite floats"));
}
