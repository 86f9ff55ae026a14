//! A-priori recovery error bound for the weighted-constraint solver, the
//! SVD-truncation inflation factor, and the expected-noise default for the
//! constraint radius.
//!
//! These are diagnostics: they are attached to every solve but never steer
//! the optimization itself (except that the expected-noise value is the
//! default choice of the constraint radius).

use crate::error::{Error, Result};
use crate::matrix::MaskedMatrix;
use crate::weights::{QualityGrid, WeightModel};

/// Default value of the numerical constant in the recovery bound.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Inputs to [`recovery_error_bound`].
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    /// Constraint radius used by the solve.
    pub delta: f64,
    /// Fraction of observed entries, |Ω| / (N·l).
    pub sampling_rate: f64,
    /// Row count of the matrix being recovered.
    pub rows: usize,
    /// Numerical constant in (0, 1).
    pub alpha: f64,
    /// Sum of 1/W² over the observed entries.
    pub weight_inverse_sq_sum: f64,
}

impl BoundInputs {
    pub fn new(
        delta: f64,
        sampling_rate: f64,
        rows: usize,
        alpha: f64,
        weight_inverse_sq_sum: f64,
    ) -> Result<Self> {
        let inputs = Self {
            delta,
            sampling_rate,
            rows,
            alpha,
            weight_inverse_sq_sum,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Assembles bound inputs from a solve's data, weight model, and radius,
    /// additionally checking `sum 1/W² >= |Ω|` (weights never exceed 1).
    pub fn from_problem(
        delta: f64,
        observed: &MaskedMatrix,
        weights: &WeightModel,
        alpha: f64,
    ) -> Result<Self> {
        if !weights.matches_omega(observed.omega()) {
            return Err(Error::WeightMaskMismatch);
        }
        let sum = weights.inverse_sq_sum();
        if sum < observed.omega_len() as f64 * (1.0 - 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "inverse-square weight sum {sum} below the observation count {}",
                observed.omega_len()
            )));
        }
        Self::new(delta, observed.sampling_rate(), observed.rows(), alpha, sum)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return Err(Error::InvalidSamplingRate(self.sampling_rate));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.delta < 0.0 {
            return Err(Error::NegativeDelta(self.delta));
        }
        Ok(())
    }
}

/// Worst-case Frobenius distance between the solver optimum and the true
/// low-rank matrix:
///
/// `2δ · sqrt((p+2)/p · N/(1-α)² + 1) · sqrt(Σ 1/W²)`.
pub fn recovery_error_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let p = inputs.sampling_rate;
    let spread = (p + 2.0) / p * inputs.rows as f64 / (1.0 - inputs.alpha).powi(2) + 1.0;
    Ok(2.0 * inputs.delta * spread.sqrt() * inputs.weight_inverse_sq_sum.sqrt())
}

/// Factor by which the squared recovery error may grow when the estimate is
/// truncated to rank 2: `1 + sqrt(rank + 1)`.
pub fn truncation_factor(rank_of_estimate: usize) -> f64 {
    1.0 + ((rank_of_estimate + 1) as f64).sqrt()
}

/// Expected-noise default for the constraint radius:
/// `c · sqrt(Σ 4 W² P)` over the observed entries.
///
/// Under the sign-flip noise model an erroneous entry moves by ±2, so
/// `Σ 4 W² P` is the expected squared weighted noise norm; `scale` adds
/// headroom on top of the expectation.
pub fn default_delta(weights: &WeightModel, qualities: &QualityGrid, scale: f64) -> Result<f64> {
    if weights.omega() != qualities.omega() {
        return Err(Error::WeightMaskMismatch);
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "delta scale must be positive, got {scale}"
        )));
    }
    let sum: f64 = weights
        .weights()
        .iter()
        .zip(qualities.probs())
        .map(|(w, p)| 4.0 * w * w * p)
        .sum();
    Ok(scale * sum.sqrt())
}
