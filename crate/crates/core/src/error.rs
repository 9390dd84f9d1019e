use thiserror::Error;

/// Errors shared by the distribution, conformal, model, and simulation
/// modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `floor(alpha * (n + 1)) = 0`: the rank-`b` threshold would sit beyond
    /// the calibration sample, so no finite prediction set exists. Signals
    /// `n` too small for this `alpha`.
    #[error("degenerate calibration: floor(alpha*(n+1)) = 0 for n={n}, alpha={alpha}; n is too small for this alpha")]
    DegenerateCalibration { n: u64, alpha: f64 },

    /// No `n <= n_max` reaches the requested concentration probability.
    #[error("no calibration size n <= {n_max} reaches the requested concentration; epsilon too small, gamma too large, or n_max too low")]
    PlanNotFound { n_max: u64 },

    /// A locally weighted score needs a strictly positive dispersion.
    #[error("dispersion estimate {value} is not positive; locally weighted score undefined")]
    DispersionNotPositive { value: f64 },

    #[error("bad hyperparameter: {0}")]
    BadHyperparameter(String),

    /// The exact-rational urn oracle is capped at m = 64.
    #[error("urn oracle horizon m={m} exceeds the exact-arithmetic cap of 64")]
    OracleTooLarge { m: u64 },

    #[error("invalid data: {0}")]
    InvalidData(String),
}
