//! Phred quality scores, error probabilities, and the affine-in-log weight
//! model fitted by one-dimensional grid search.
//!
//! A weight for an observed entry with error probability `P` has the form
//! `W = a * log2(1/P) + b`, normalized so that the highest-quality entry gets
//! weight exactly 1 (the intercept is tied to the slope through
//! `b = 1 + a * log2(P_min)`). The slope is selected by scanning a uniform
//! grid over the interval on which all weights stay positive.

use crate::error::{Error, Result};

/// Tolerance for the max-weight-equals-one normalization check.
pub const WEIGHT_NORMALIZATION_TOL: f64 = 1e-9;

/// Default number of grid points used by [`fit_weights`].
pub const DEFAULT_GRID_POINTS: usize = 1000;

/// Converts a Phred quality score to an error probability `10^(-Q/10)`.
pub fn phred_to_prob(q: f64) -> Result<f64> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::InvalidQuality { value: q });
    }
    Ok(10f64.powf(-q / 10.0))
}

/// Per-observation quality scores and the derived error probabilities,
/// aligned index-for-index with an observation set.
#[derive(Debug, Clone)]
pub struct QualityGrid {
    omega: Vec<(usize, usize)>,
    scores: Vec<f64>,
    probs: Vec<f64>,
}

impl QualityGrid {
    /// `omega` and `scores` must be aligned; scores are validated and
    /// converted to probabilities on construction.
    pub fn new(omega: Vec<(usize, usize)>, scores: Vec<f64>) -> Result<Self> {
        if omega.len() != scores.len() {
            return Err(Error::InvalidConfig(format!(
                "quality grid has {} scores for {} observations",
                scores.len(),
                omega.len()
            )));
        }
        let probs = scores
            .iter()
            .map(|&q| phred_to_prob(q))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            omega,
            scores,
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &[(usize, usize)] {
        &self.omega
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

/// The realized weight model: slope, intercept, and one weight per
/// observed entry.
#[derive(Debug, Clone)]
pub struct WeightModel {
    a: f64,
    b: f64,
    omega: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl WeightModel {
    /// All-ones weights on the given observation set (slope 0, intercept 1).
    pub fn uniform(omega: &[(usize, usize)]) -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            omega: omega.to_vec(),
            weights: vec![1.0; omega.len()],
        }
    }

    pub fn slope(&self) -> f64 {
        self.a
    }

    pub fn intercept(&self) -> f64 {
        self.b
    }

    pub fn omega(&self) -> &[(usize, usize)] {
        &self.omega
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Largest squared weight; the Lipschitz constant of the weighted
    /// data-fit gradient.
    pub fn max_weight_sq(&self) -> f64 {
        let w = self.max_weight();
        w * w
    }

    /// Sum of `1 / W_ij^2` over the observation set.
    pub fn inverse_sq_sum(&self) -> f64 {
        self.weights.iter().map(|w| 1.0 / (w * w)).sum()
    }

    /// True if this model covers exactly the given observation set.
    pub fn matches_omega(&self, omega: &[(usize, usize)]) -> bool {
        self.omega == omega
    }
}

/// Realizes `W = a * log2(1/P) + b` on the grid's observation set.
///
/// Every weight must come out positive, and the largest weight must already
/// equal 1 up to [`WEIGHT_NORMALIZATION_TOL`]; a violation is reported as an
/// error rather than silently rescaled.
pub fn realize_weights(a: f64, b: f64, qualities: &QualityGrid) -> Result<WeightModel> {
    if qualities.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let weights: Vec<f64> = qualities
        .probs()
        .iter()
        .map(|&p| a * (1.0 / p).log2() + b)
        .collect();
    if weights.iter().any(|&w| w <= 0.0) {
        // for a positive slope the offender is the lowest-quality entry
        let idx = (0..weights.len())
            .min_by(|&x, &y| weights[x].partial_cmp(&weights[y]).unwrap())
            .unwrap();
        let (row, col) = qualities.omega()[idx];
        return Err(Error::NonPositiveWeight {
            row,
            col,
            quality: qualities.scores()[idx],
            weight: weights[idx],
        });
    }
    let max_weight = weights.iter().copied().fold(0.0, f64::max);
    if (max_weight - 1.0).abs() > WEIGHT_NORMALIZATION_TOL {
        return Err(Error::WeightNotNormalized {
            max_weight,
            tol: WEIGHT_NORMALIZATION_TOL,
        });
    }
    Ok(WeightModel {
        a,
        b,
        omega: qualities.omega().to_vec(),
        weights,
    })
}

/// Objective minimized by the grid search in [`fit_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightObjective {
    /// `sum of 1/W^2` alone. Under the max-weight-one normalization this is
    /// always minimized by uniform weights (slope 0); kept for reference.
    InverseSquare,
    /// `delta(a) * sqrt(sum of 1/W^2)` with `delta(a)^2 = sum of 4 W^2 P` —
    /// the recovery bound with the expected noise level substituted for the
    /// constraint radius, so that down-weighting likely-erroneous entries
    /// pays off.
    DeltaAware,
}

impl WeightObjective {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightObjective::InverseSquare => "inverse-square",
            WeightObjective::DeltaAware => "delta-aware",
        }
    }
}

impl std::str::FromStr for WeightObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse-square" => Ok(WeightObjective::InverseSquare),
            "delta-aware" => Ok(WeightObjective::DeltaAware),
            other => Err(Error::InvalidConfig(format!(
                "unknown weight objective '{other}'"
            ))),
        }
    }
}

/// Result of a grid-search fit.
#[derive(Debug, Clone)]
pub struct WeightFit {
    pub model: WeightModel,
    /// Objective value attained at the selected slope.
    pub objective: f64,
    /// Index of the selected slope in the scanned grid.
    pub grid_index: usize,
    /// True when all qualities were equal, so the grid collapsed to slope 0.
    pub degenerate_grid: bool,
}

/// Largest slope for which every weight stays positive under the tied
/// intercept `b = 1 + a * log2(P_min)`. Zero when all qualities are equal.
pub fn positivity_limit(qualities: &QualityGrid) -> f64 {
    let (p_min, p_max) = (qualities.min_prob(), qualities.max_prob());
    if p_max > p_min {
        1.0 / (p_max / p_min).log2()
    } else {
        0.0
    }
}

/// The slope grid scanned by [`fit_weights`]: `grid_points` uniform values on
/// `[0, 0.999 * a_max]`.
pub fn slope_grid(qualities: &QualityGrid, grid_points: usize) -> Vec<f64> {
    let a_max = positivity_limit(qualities);
    let hi = 0.999 * a_max;
    (0..grid_points)
        .map(|k| hi * k as f64 / (grid_points - 1) as f64)
        .collect()
}

/// Evaluates the selected objective at slope `a` with the tied intercept.
pub fn objective_value(objective: WeightObjective, qualities: &QualityGrid, a: f64) -> f64 {
    let lp_min = qualities.min_prob().log2();
    let mut inv_sq = 0.0;
    let mut noise_sq = 0.0;
    for &p in qualities.probs() {
        let w = 1.0 + a * (lp_min - p.log2());
        inv_sq += 1.0 / (w * w);
        noise_sq += 4.0 * w * w * p;
    }
    match objective {
        WeightObjective::InverseSquare => inv_sq,
        WeightObjective::DeltaAware => noise_sq.sqrt() * inv_sq.sqrt(),
    }
}

/// Selects the slope minimizing `objective` over the positivity grid, with
/// the intercept tied as `b = 1 + a * log2(P_min)`. Ties break toward the
/// smaller slope.
pub fn fit_weights(
    qualities: &QualityGrid,
    objective: WeightObjective,
    grid_points: usize,
) -> Result<WeightFit> {
    if qualities.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if grid_points < 2 {
        return Err(Error::InvalidConfig(
            "grid search needs at least 2 points".into(),
        ));
    }

    let p_min = qualities.min_prob();
    let degenerate = positivity_limit(qualities) == 0.0;
    let grid = if degenerate {
        vec![0.0]
    } else {
        slope_grid(qualities, grid_points)
    };

    let mut best_k = 0;
    let mut best_val = f64::INFINITY;
    for (k, &a) in grid.iter().enumerate() {
        let val = objective_value(objective, qualities, a);
        if val < best_val {
            best_val = val;
            best_k = k;
        }
    }

    let a = grid[best_k];
    let b = 1.0 + a * p_min.log2();
    let model = realize_weights(a, b, qualities)?;
    Ok(WeightFit {
        model,
        objective: best_val,
        grid_index: best_k,
        degenerate_grid: degenerate,
    })
}
