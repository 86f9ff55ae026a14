//! HapWeC: haplotype reconstruction from quality-scored read fragments.
//!
//! The pipeline builds the read matrix, converts qualities to error
//! probabilities, fits entry weights, solves the weighted-constraint
//! completion problem, truncates the estimate to rank 2, extracts the two
//! independent rows by clustering, and rounds them to ±1. A rank-2
//! alternating-least-squares factorization is included as a baseline; it is
//! a stand-in for published alternating-minimization completion methods, not
//! a re-implementation of any particular one.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::bound::{self, BoundInputs, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::matrix::{self, MaskedMatrix, SvdFactors};
use crate::solver::{self, SolveReport, SolverConfig};
use crate::weights::{self, QualityGrid, WeightModel, WeightObjective};

/// The two haplotypes of a diploid individual, entries in {−1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaplotypePair {
    h1: Vec<i8>,
    h2: Vec<i8>,
}

impl HaplotypePair {
    pub fn new(h1: Vec<i8>, h2: Vec<i8>) -> Result<Self> {
        if h1.len() != h2.len() {
            return Err(Error::InvalidConfig(format!(
                "haplotype lengths differ: {} vs {}",
                h1.len(),
                h2.len()
            )));
        }
        if h1.iter().chain(&h2).any(|&v| v != 1 && v != -1) {
            return Err(Error::NotPlusMinusOne);
        }
        Ok(Self { h1, h2 })
    }

    pub fn len(&self) -> usize {
        self.h1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h1.is_empty()
    }

    pub fn h1(&self) -> &[i8] {
        &self.h1
    }

    pub fn h2(&self) -> &[i8] {
        &self.h2
    }

    /// The same pair keeping only the listed columns, in the given order.
    pub fn restrict(&self, cols: &[usize]) -> Self {
        Self {
            h1: cols.iter().map(|&c| self.h1[c]).collect(),
            h2: cols.iter().map(|&c| self.h2[c]).collect(),
        }
    }

    /// True if `other` equals this pair up to swapping the two haplotypes.
    pub fn same_unordered(&self, other: &Self) -> bool {
        (self.h1 == other.h1 && self.h2 == other.h2)
            || (self.h1 == other.h2 && self.h2 == other.h1)
    }
}

/// One site observed by a read: column, allele value (±1), Phred quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadSite {
    pub col: usize,
    pub value: i8,
    pub quality: u32,
}

/// One read: the row it occupies plus its observed sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Read {
    pub row: usize,
    pub sites: Vec<ReadSite>,
}

/// A set of reads over an `num_rows × num_cols` site grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadSet {
    num_rows: usize,
    num_cols: usize,
    reads: Vec<Read>,
}

impl ReadSet {
    pub fn new(num_rows: usize, num_cols: usize, reads: Vec<Read>) -> Result<Self> {
        for read in &reads {
            if read.row >= num_rows {
                return Err(Error::IndexOutOfRange {
                    row: read.row,
                    col: 0,
                    rows: num_rows,
                    cols: num_cols,
                });
            }
            if read.sites.is_empty() {
                return Err(Error::EmptyRead { row: read.row });
            }
            let mut seen = std::collections::HashSet::new();
            for site in &read.sites {
                if site.col >= num_cols {
                    return Err(Error::IndexOutOfRange {
                        row: read.row,
                        col: site.col,
                        rows: num_rows,
                        cols: num_cols,
                    });
                }
                if site.value != 1 && site.value != -1 {
                    return Err(Error::NotPlusMinusOne);
                }
                if !seen.insert(site.col) {
                    return Err(Error::DuplicateObservation {
                        row: read.row,
                        col: site.col,
                    });
                }
            }
        }
        Ok(Self {
            num_rows,
            num_cols,
            reads,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn reads(&self) -> &[Read] {
        &self.reads
    }
}

/// Places the reads into the `N × l` read matrix and the aligned quality
/// grid. Row `i` holds read `i`'s values at its covered columns and zero
/// elsewhere; the observation set is the union of covered positions.
pub fn build_read_matrix(reads: &ReadSet) -> Result<(MaskedMatrix, QualityGrid)> {
    if reads.reads.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let mut entries = Vec::new();
    let mut quality_of = std::collections::HashMap::new();
    for read in &reads.reads {
        for site in &read.sites {
            entries.push((read.row, site.col, site.value as f64));
            if quality_of
                .insert((read.row, site.col), site.quality as f64)
                .is_some()
            {
                return Err(Error::DuplicateObservation {
                    row: read.row,
                    col: site.col,
                });
            }
        }
    }
    let matrix = MaskedMatrix::from_entries(reads.num_rows, reads.num_cols, &entries)?;
    let scores: Vec<f64> = matrix
        .omega()
        .iter()
        .map(|key| quality_of[key])
        .collect();
    let grid = QualityGrid::new(matrix.omega().to_vec(), scores)?;
    Ok((matrix, grid))
}

/// Entrywise sign with ties (exact zeros) mapped to +1.
pub fn round_pm1(v: &DVector<f64>) -> Vec<i8> {
    v.iter().map(|&x| if x < 0.0 { -1i8 } else { 1i8 }).collect()
}

/// Recovers the two independent row vectors of a rank-≤2 truncation.
///
/// Each row of the truncated matrix is represented by its coordinates in the
/// two leading singular directions; those 2-D points are clustered with
/// 2-means initialized at the farthest point pair (ties broken by lowest row
/// index), and each cluster centroid is mapped back to a full-length row
/// vector. Returns the pre-rounding centroid vectors, the one containing row
/// 0 first.
pub fn extract_haplotypes(
    truncated: &DMatrix<f64>,
    factors: &SvdFactors,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if truncated.nrows() != factors.rows() || truncated.ncols() != factors.cols() {
        return Err(Error::InvalidConfig(
            "truncated matrix does not match the decomposition dimensions".into(),
        ));
    }
    let n = factors.rows();
    let k = factors.rank().min(2);
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let mut c = [0.0; 2];
            for d in 0..k {
                c[d] = factors.singular_values()[d] * factors.left()[(i, d)];
            }
            c
        })
        .collect();

    let centroid_to_vector = |c: [f64; 2]| -> DVector<f64> {
        let mut v = DVector::zeros(factors.cols());
        for d in 0..k {
            v += factors.right().column(d) * c[d];
        }
        v
    };

    // farthest pair, deterministic tie-break on (i, j)
    let dist_sq =
        |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let (mut seed_a, mut seed_b, mut best) = (0, 0, -1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist_sq(&coords[i], &coords[j]);
            if d > best {
                best = d;
                seed_a = i;
                seed_b = j;
            }
        }
    }
    // separations at rounding-noise scale mean every row is the same point
    let scale = factors.singular_values().first().copied().unwrap_or(0.0);
    if best.sqrt() <= 1e-9 * scale || best <= 0.0 {
        let centroid = coords.first().copied().unwrap_or([0.0; 2]);
        return Err(Error::DegenerateClusters {
            centroid: centroid_to_vector(centroid).iter().copied().collect(),
        });
    }

    let mut centers = [coords[seed_a], coords[seed_b]];
    let mut assignment = vec![0u8; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, c) in coords.iter().enumerate() {
            let pick = u8::from(dist_sq(c, &centers[1]) < dist_sq(c, &centers[0]));
            if assignment[i] != pick {
                assignment[i] = pick;
                changed = true;
            }
        }
        let mut sums = [[0.0f64; 2]; 2];
        let mut counts = [0usize; 2];
        for (i, c) in coords.iter().enumerate() {
            let g = assignment[i] as usize;
            sums[g][0] += c[0];
            sums[g][1] += c[1];
            counts[g] += 1;
        }
        if counts[0] == 0 || counts[1] == 0 {
            let g = usize::from(counts[0] == 0);
            let centroid = [sums[g][0] / counts[g] as f64, sums[g][1] / counts[g] as f64];
            return Err(Error::DegenerateClusters {
                centroid: centroid_to_vector(centroid).iter().copied().collect(),
            });
        }
        for g in 0..2 {
            centers[g] = [sums[g][0] / counts[g] as f64, sums[g][1] / counts[g] as f64];
        }
        if !changed {
            break;
        }
    }

    // report the cluster holding row 0 first
    let first = assignment[0] as usize;
    Ok((
        centroid_to_vector(centers[first]),
        centroid_to_vector(centers[1 - first]),
    ))
}

/// How the data-fit weights are chosen by [`run_hapwec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Skip fitting entirely; all weights are 1.
    Uniform,
    /// Grid-search fit of the stated objective.
    Fitted(WeightObjective),
}

impl WeightMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightMode::Uniform => "uniform",
            WeightMode::Fitted(obj) => obj.as_str(),
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightMode::Uniform),
            other => Ok(WeightMode::Fitted(other.parse()?)),
        }
    }
}

/// How the constraint radius is chosen when a solve is set up from data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    /// Use this radius as given.
    Fixed(f64),
    /// `scale * sqrt(sum of 4 W^2 P)` from the fitted weights and qualities.
    ExpectedNoise { scale: f64 },
}

impl DeltaPolicy {
    pub fn resolve(&self, w: &WeightModel, q: &QualityGrid) -> Result<f64> {
        match *self {
            DeltaPolicy::Fixed(delta) => {
                if delta < 0.0 {
                    return Err(Error::NegativeDelta(delta));
                }
                Ok(delta)
            }
            DeltaPolicy::ExpectedNoise { scale } => bound::default_delta(w, q, scale),
        }
    }
}

/// Per-step diagnostics of one pipeline run.
#[derive(Debug, Clone)]
pub struct HapwecDiagnostics {
    pub weight_mode: &'static str,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub degenerate_weight_grid: bool,
    pub delta: f64,
    /// Numerical rank of the completion estimate.
    pub estimate_rank: usize,
    /// A-priori recovery error bound evaluated at the solve's inputs.
    pub error_bound: f64,
    /// Columns covered by no read; excluded from reconstruction scoring.
    pub uncallable_columns: Vec<usize>,
    /// True when row clustering collapsed and one haplotype was duplicated.
    pub duplicated_haplotype: bool,
    /// True when the solver stopped on an iteration cap.
    pub solver_warning: bool,
}

/// Everything produced by one pipeline run.
#[derive(Debug, Clone)]
pub struct HapwecOutcome {
    pub haplotypes: HaplotypePair,
    pub report: SolveReport,
    pub diagnostics: HapwecDiagnostics,
}

/// Runs the full reconstruction pipeline on a read set.
///
/// Solver non-convergence and degenerate clustering are reported through the
/// diagnostics rather than as failures; hard errors are reserved for invalid
/// inputs.
pub fn run_hapwec(
    reads: &ReadSet,
    cfg: &SolverConfig,
    weight_mode: WeightMode,
    delta_policy: DeltaPolicy,
) -> Result<HapwecOutcome> {
    let (y, qualities) = build_read_matrix(reads)?;

    let mut covered = vec![false; y.cols()];
    for &(_, j) in y.omega() {
        covered[j] = true;
    }
    let uncallable_columns: Vec<usize> =
        (0..y.cols()).filter(|&j| !covered[j]).collect();

    let (weights, degenerate_weight_grid) = match weight_mode {
        WeightMode::Uniform => (WeightModel::uniform(y.omega()), false),
        WeightMode::Fitted(objective) => {
            let fit =
                weights::fit_weights(&qualities, objective, weights::DEFAULT_GRID_POINTS)?;
            (fit.model, fit.degenerate_grid)
        }
    };

    let delta = delta_policy.resolve(&weights, &qualities)?;
    let solve_cfg = SolverConfig {
        delta,
        ..cfg.clone()
    };
    let report = solver::solve_nuwec(&y, &weights, &solve_cfg)?;

    let factors = matrix::svd(&report.solution)?;
    let truncated = matrix::truncate_rank(&factors, 2)?;
    let (pair, duplicated_haplotype) = haplotypes_from_truncation(&truncated, &factors)?;

    let error_bound = bound::recovery_error_bound(&BoundInputs::from_problem(
        delta,
        &y,
        &weights,
        DEFAULT_ALPHA,
    )?)?;

    Ok(HapwecOutcome {
        haplotypes: pair,
        diagnostics: HapwecDiagnostics {
            weight_mode: weight_mode.as_str(),
            fitted_slope: weights.slope(),
            fitted_intercept: weights.intercept(),
            degenerate_weight_grid,
            delta,
            estimate_rank: factors.rank(),
            error_bound,
            uncallable_columns,
            duplicated_haplotype,
            solver_warning: !report.converged,
        },
        report,
    })
}

/// Shared tail of the pipeline: cluster-extract the two rows and round them,
/// duplicating the single centroid when clustering is degenerate.
pub(crate) fn haplotypes_from_truncation(
    truncated: &DMatrix<f64>,
    factors: &SvdFactors,
) -> Result<(HaplotypePair, bool)> {
    match extract_haplotypes(truncated, factors) {
        Ok((v1, v2)) => Ok((
            HaplotypePair::new(round_pm1(&v1), round_pm1(&v2))?,
            false,
        )),
        Err(Error::DegenerateClusters { centroid }) => {
            let v = DVector::from_vec(centroid);
            let rounded = round_pm1(&v);
            Ok((HaplotypePair::new(rounded.clone(), rounded)?, true))
        }
        Err(e) => Err(e),
    }
}

/// Result of the alternating-least-squares baseline.
#[derive(Debug, Clone)]
pub struct AlsOutcome {
    pub haplotypes: HaplotypePair,
    pub completed: DMatrix<f64>,
    pub sweeps: usize,
    /// True when the relative objective change dropped below 1e-8 before
    /// the sweep cap.
    pub converged: bool,
    /// Data-fit objective (sum of squared residuals on the observed
    /// entries), one value per sweep.
    pub objective_history: Vec<f64>,
    /// True if a rank-deficient least-squares subproblem needed a ridge term.
    pub ridge_fallback: bool,
    pub duplicated_haplotype: bool,
}

/// Rank-2 factorization baseline: alternately solves least squares for the
/// row factors and column factors on the observed entries, from a seeded
/// random initialization, then extracts haplotypes exactly as the main
/// pipeline does.
pub fn als_rank2_baseline(y: &MaskedMatrix, iters: usize, seed: u64) -> Result<AlsOutcome> {
    if y.omega_len() < 2 {
        return Err(Error::InvalidConfig(
            "alternating least squares needs at least 2 observations".into(),
        ));
    }
    let (n, l) = (y.rows(), y.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
    let mut v = DMatrix::from_fn(l, 2, |_, _| rng.random_range(-1.0..1.0));

    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); l];
    for &(i, j) in y.omega() {
        by_row[i].push((j, y.get(i, j)));
        by_col[j].push((i, y.get(i, j)));
    }

    let mut ridge_fallback = false;
    let mut objective_history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut sweeps = 0;
    let mut converged = false;

    for _ in 0..iters {
        sweeps += 1;
        for i in 0..n {
            let sol = ls_2d(&by_row[i], &v, &mut ridge_fallback);
            u[(i, 0)] = sol[0];
            u[(i, 1)] = sol[1];
        }
        for j in 0..l {
            let sol = ls_2d(&by_col[j], &u, &mut ridge_fallback);
            v[(j, 0)] = sol[0];
            v[(j, 1)] = sol[1];
        }

        let objective: f64 = y
            .omega()
            .iter()
            .map(|&(i, j)| {
                let fit = u[(i, 0)] * v[(j, 0)] + u[(i, 1)] * v[(j, 1)];
                (fit - y.get(i, j)).powi(2)
            })
            .sum();
        objective_history.push(objective);
        if (prev - objective).abs() <= 1e-8 * prev.max(1e-12) {
            converged = true;
            break;
        }
        prev = objective;
    }

    let completed = &u * v.transpose();
    let factors = matrix::svd(&completed)?;
    let truncated = matrix::truncate_rank(&factors, 2)?;
    let (haplotypes, duplicated_haplotype) = haplotypes_from_truncation(&truncated, &factors)?;

    Ok(AlsOutcome {
        haplotypes,
        completed,
        sweeps,
        converged,
        objective_history,
        ridge_fallback,
        duplicated_haplotype,
    })
}

/// Solves the 2-D normal equations for one row/column of the factorization,
/// adding a small ridge when the system is near-singular.
fn ls_2d(observations: &[(usize, f64)], basis: &DMatrix<f64>, ridge_used: &mut bool) -> [f64; 2] {
    let (mut a00, mut a01, mut a11) = (0.0, 0.0, 0.0);
    let (mut r0, mut r1) = (0.0, 0.0);
    for &(k, val) in observations {
        let b0 = basis[(k, 0)];
        let b1 = basis[(k, 1)];
        a00 += b0 * b0;
        a01 += b0 * b1;
        a11 += b1 * b1;
        r0 += val * b0;
        r1 += val * b1;
    }
    let mut det = a00 * a11 - a01 * a01;
    let scale = (a00 + a11).max(1.0);
    if det.abs() <= 1e-12 * scale * scale {
        a00 += 1e-8;
        a11 += 1e-8;
        det = a00 * a11 - a01 * a01;
        *ridge_used = true;
    }
    [(r0 * a11 - r1 * a01) / det, (r1 * a00 - r0 * a01) / det]
}
