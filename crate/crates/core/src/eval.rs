//! Reconstruction metrics and the Monte Carlo sweep harness.
//!
//! A sweep scans one axis (sampling rate or noise fraction), runs each
//! method on freshly generated data for every trial, and collects one
//! [`TrialRecord`] per (axis value, method, trial). Trials are independent
//! and run in parallel; the output ordering and every emitted byte are fully
//! determined by the sweep description and the base seed.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bound::{recovery_error_bound, BoundInputs, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::matrix::{self, MaskedMatrix};
use crate::pipeline::{
    self, als_rank2_baseline, run_hapwec, DeltaPolicy, HaplotypePair, WeightMode,
};
use crate::simdata::{self, NoiseMode, Sampling, SimConfig};
use crate::solver::SolverConfig;
use crate::weights::{fit_weights, QualityGrid, WeightModel, WeightObjective, DEFAULT_GRID_POINTS};

/// Normalized reconstruction error: the mean of
/// `||estimate − truth||_F / ||truth||_F` over the estimates.
pub fn nre(estimates: &[DMatrix<f64>], truth: &DMatrix<f64>) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidConfig("no estimates to score".into()));
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let mut total = 0.0;
    for estimate in estimates {
        if estimate.shape() != truth.shape() {
            return Err(Error::InvalidConfig(format!(
                "estimate is {:?} but truth is {:?}",
                estimate.shape(),
                truth.shape()
            )));
        }
        total += (estimate - truth).norm() / denom;
    }
    Ok(total / estimates.len() as f64)
}

/// NRE expressed in decibels.
pub fn nre_db(nre: f64) -> f64 {
    20.0 * nre.log10()
}

/// Reconstruction rate: `1 − (1/4nl) Σ (||ĥ1−h1||_1 + ||ĥ2−h2||_1)`, with
/// each estimated pair first matched to the truth pair under the assignment
/// (identity or swap) that minimizes the summed L1 distance.
pub fn reconstruction_rate(estimates: &[HaplotypePair], truth: &HaplotypePair) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidConfig("no estimates to score".into()));
    }
    let l = truth.len();
    let mut total = 0usize;
    for estimate in estimates {
        if estimate.len() != l {
            return Err(Error::InvalidConfig(format!(
                "haplotype length {} does not match truth length {l}",
                estimate.len()
            )));
        }
        total += pair_l1_distance(estimate, truth);
    }
    Ok(1.0 - total as f64 / (4.0 * estimates.len() as f64 * l as f64))
}

/// Summed L1 distance between two pairs under the better of the two label
/// assignments.
fn pair_l1_distance(estimate: &HaplotypePair, truth: &HaplotypePair) -> usize {
    let l1 = |a: &[i8], b: &[i8]| -> usize {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x as i32 - y as i32).unsigned_abs() as usize)
            .sum()
    };
    let identity = l1(estimate.h1(), truth.h1()) + l1(estimate.h2(), truth.h2());
    let swapped = l1(estimate.h1(), truth.h2()) + l1(estimate.h2(), truth.h1());
    identity.min(swapped)
}

/// The algorithms a sweep can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Unweighted nuclear-norm completion (uniform weights), haplotypes
    /// extracted from the rank-2 truncation.
    Nuclear,
    /// Weighted-constraint completion with fitted weights.
    Nuwec,
    /// The full read-set pipeline (fitted weights); numerically the same
    /// estimate as [`Method::Nuwec`], exercised through the pipeline API.
    Hapwec,
    /// Rank-2 alternating-least-squares baseline.
    Als,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Nuclear => "nuclear",
            Method::Nuwec => "nuwec",
            Method::Hapwec => "hapwec",
            Method::Als => "als",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nuclear" => Ok(Method::Nuclear),
            "nuwec" => Ok(Method::Nuwec),
            "hapwec" => Ok(Method::Hapwec),
            "als" => Ok(Method::Als),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// The swept variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    /// Entrywise sampling rates; the noise mode stays fixed.
    SamplingRate(Vec<f64>),
    /// Fixed-fraction noise levels; the sampling scheme stays fixed.
    NoiseFraction(Vec<f64>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::SamplingRate(_) => "sampling_rate",
            Axis::NoiseFraction(_) => "noise_fraction",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Axis::SamplingRate(v) | Axis::NoiseFraction(v) => v,
        }
    }
}

/// Everything that defines a sweep. Two sweeps with equal specs produce
/// byte-identical output.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub rows: usize,
    pub cols: usize,
    pub axis: Axis,
    /// Sampling scheme used when the axis varies the noise.
    pub sampling: Sampling,
    /// Noise mode used when the axis varies the sampling rate; for a noise
    /// axis this provides the labeling parameters and its `q` is replaced
    /// per axis point.
    pub noise: NoiseMode,
    pub methods: Vec<Method>,
    /// Monte Carlo repetitions per (axis value, method).
    pub trials: usize,
    pub base_seed: u64,
    pub delta: DeltaPolicy,
    pub solver: SolverConfig,
    /// Objective for the fitted-weight methods.
    pub weight_objective: WeightObjective,
    /// Sweep cap for the alternating-least-squares baseline.
    pub als_iters: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if self.axis.values().is_empty() {
            return Err(Error::InvalidConfig("axis has no values".into()));
        }
        if let (Axis::NoiseFraction(_), NoiseMode::QualityDriven { .. }) =
            (&self.axis, &self.noise)
        {
            return Err(Error::InvalidConfig(
                "a noise-fraction axis needs a fixed-fraction noise mode".into(),
            ));
        }
        Ok(())
    }

    fn sim_config(&self, axis_value: f64, seed: u64) -> SimConfig {
        let (sampling, noise) = match &self.axis {
            Axis::SamplingRate(_) => (Sampling::Entrywise { rate: axis_value }, self.noise.clone()),
            Axis::NoiseFraction(_) => {
                let noise = match &self.noise {
                    NoiseMode::FixedFraction {
                        epsilon,
                        low_quality,
                        high_quality,
                        ..
                    } => NoiseMode::FixedFraction {
                        q: axis_value,
                        epsilon: *epsilon,
                        low_quality: *low_quality,
                        high_quality: *high_quality,
                    },
                    other => other.clone(),
                };
                (self.sampling, noise)
            }
        };
        SimConfig {
            rows: self.rows,
            cols: self.cols,
            sampling,
            noise,
            seed,
        }
    }
}

/// One row of the sweep output.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    /// Per-trial relative reconstruction error (the NRE of this single
    /// estimate); NaN for failed trials.
    pub nre: f64,
    /// Per-trial reconstruction rate over callable columns, when haplotype
    /// ground truth applies.
    pub rr: Option<f64>,
    /// A-priori recovery bound at the solve's inputs; NaN for the baseline.
    pub bound: f64,
    pub lambda: f64,
    pub iters: usize,
    pub residual: f64,
    pub converged: bool,
    pub weight_slope: f64,
    pub weight_intercept: f64,
    pub runtime_ms: f64,
    /// True when the trial aborted; metric fields are NaN in that case.
    pub failed: bool,
}

/// A completed trial with the artifacts needed for post-hoc checks.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub estimate: DMatrix<f64>,
    pub truth_matrix: DMatrix<f64>,
    pub truth_haplotypes: HaplotypePair,
    pub estimated_haplotypes: Option<HaplotypePair>,
    /// Numerical rank of the estimate.
    pub estimate_rank: usize,
}

/// Runs a full sweep and returns the records sorted by
/// (axis index, method index, trial).
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<TrialRecord>> {
    Ok(run_sweep_outcomes(spec)?
        .into_iter()
        .map(|outcome| outcome.record)
        .collect())
}

/// Like [`run_sweep`] but keeps the per-trial artifacts.
pub fn run_sweep_outcomes(spec: &SweepSpec) -> Result<Vec<TrialOutcome>> {
    spec.validate()?;
    let mut tasks = Vec::new();
    for (axis_idx, &axis_value) in spec.axis.values().iter().enumerate() {
        for (method_idx, &method) in spec.methods.iter().enumerate() {
            for trial in 0..spec.trials {
                tasks.push((axis_idx, axis_value, method_idx, method, trial));
            }
        }
    }

    let mut outcomes: Vec<((usize, usize, usize), TrialOutcome)> = tasks
        .par_iter()
        .map(|&(axis_idx, axis_value, method_idx, method, trial)| {
            let outcome = run_trial(spec, axis_value, method, trial);
            ((axis_idx, method_idx, trial), outcome)
        })
        .collect();
    outcomes.sort_by_key(|(key, _)| *key);
    Ok(outcomes.into_iter().map(|(_, outcome)| outcome).collect())
}

/// Runs one (axis value, method, trial) cell. Infrastructure failures are
/// folded into a failed record rather than aborting the sweep.
pub fn run_trial(spec: &SweepSpec, axis_value: f64, method: Method, trial: usize) -> TrialOutcome {
    let seed = spec.base_seed + trial as u64;
    let cfg = spec.sim_config(axis_value, seed);

    match try_run_trial(spec, &cfg, axis_value, method, trial, seed) {
        Ok(outcome) => outcome,
        Err(_) => {
            let record = TrialRecord {
                axis_name: spec.axis.name(),
                axis_value,
                method,
                trial,
                seed,
                nre: f64::NAN,
                rr: None,
                bound: f64::NAN,
                lambda: f64::NAN,
                iters: 0,
                residual: f64::NAN,
                converged: false,
                weight_slope: f64::NAN,
                weight_intercept: f64::NAN,
                runtime_ms: 0.0,
                failed: true,
            };
            TrialOutcome {
                record,
                estimate: DMatrix::zeros(spec.rows, spec.cols),
                truth_matrix: DMatrix::zeros(spec.rows, spec.cols),
                truth_haplotypes: HaplotypePair::new(vec![1; spec.cols], {
                    let mut v = vec![1; spec.cols];
                    v[0] = -1;
                    v
                })
                .expect("placeholder pair"),
                estimated_haplotypes: None,
                estimate_rank: 0,
            }
        }
    }
}

fn try_run_trial(
    spec: &SweepSpec,
    cfg: &SimConfig,
    axis_value: f64,
    method: Method,
    trial: usize,
    seed: u64,
) -> Result<TrialOutcome> {
    let (truth_matrix, truth_haplotypes, _assignment) =
        simdata::gen_rank2_matrix(spec.rows, spec.cols, seed)?;
    let clean = simdata::sample_observations(&truth_matrix, cfg)?;
    let (observed, qualities, _flips) = simdata::inject_noise(&clean, cfg, seed)?;

    let start = Instant::now();
    let run = execute_method(spec, method, seed, &observed, &qualities)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let nre_value = (&run.estimate - &truth_matrix).norm() / truth_matrix.norm();

    // reconstruction rate over callable columns only
    let mut covered = vec![false; observed.cols()];
    for &(_, j) in observed.omega() {
        covered[j] = true;
    }
    let callable: Vec<usize> = (0..observed.cols()).filter(|&j| covered[j]).collect();
    let rr = match &run.haplotypes {
        Some(pair) if !callable.is_empty() => Some(reconstruction_rate(
            &[pair.restrict(&callable)],
            &truth_haplotypes.restrict(&callable),
        )?),
        _ => None,
    };

    let estimate_rank = matrix::svd(&run.estimate)?.rank();
    let record = TrialRecord {
        axis_name: spec.axis.name(),
        axis_value,
        method,
        trial,
        seed,
        nre: nre_value,
        rr,
        bound: run.bound,
        lambda: run.lambda,
        iters: run.iters,
        residual: run.residual,
        converged: run.converged,
        weight_slope: run.weight_slope,
        weight_intercept: run.weight_intercept,
        runtime_ms,
        failed: false,
    };
    Ok(TrialOutcome {
        record,
        estimate: run.estimate,
        truth_matrix,
        truth_haplotypes,
        estimated_haplotypes: run.haplotypes,
        estimate_rank,
    })
}

struct MethodRun {
    estimate: DMatrix<f64>,
    haplotypes: Option<HaplotypePair>,
    bound: f64,
    lambda: f64,
    iters: usize,
    residual: f64,
    converged: bool,
    weight_slope: f64,
    weight_intercept: f64,
}

fn execute_method(
    spec: &SweepSpec,
    method: Method,
    seed: u64,
    observed: &MaskedMatrix,
    qualities: &QualityGrid,
) -> Result<MethodRun> {
    match method {
        Method::Nuclear | Method::Nuwec => {
            let weights = match method {
                Method::Nuclear => WeightModel::uniform(observed.omega()),
                _ => fit_weights(qualities, spec.weight_objective, DEFAULT_GRID_POINTS)?.model,
            };
            let delta = spec.delta.resolve(&weights, qualities)?;
            let solver_cfg = SolverConfig {
                delta,
                ..spec.solver.clone()
            };
            let report = crate::solver::solve_nuwec(observed, &weights, &solver_cfg)?;
            let bound = recovery_error_bound(&BoundInputs::from_problem(
                delta,
                observed,
                &weights,
                DEFAULT_ALPHA,
            )?)?;
            let factors = matrix::svd(&report.solution)?;
            let truncated = matrix::truncate_rank(&factors, 2)?;
            let (pair, _) = pipeline::haplotypes_from_truncation(&truncated, &factors)?;
            Ok(MethodRun {
                estimate: report.solution,
                haplotypes: Some(pair),
                bound,
                lambda: report.penalty_lambda,
                iters: report.inner_iterations_total,
                residual: report.final_residual,
                converged: report.converged,
                weight_slope: weights.slope(),
                weight_intercept: weights.intercept(),
            })
        }
        Method::Hapwec => {
            let reads = simdata::to_read_set(observed, qualities)?;
            let outcome = run_hapwec(
                &reads,
                &spec.solver,
                WeightMode::Fitted(spec.weight_objective),
                spec.delta,
            )?;
            Ok(MethodRun {
                estimate: outcome.report.solution.clone(),
                haplotypes: Some(outcome.haplotypes),
                bound: outcome.diagnostics.error_bound,
                lambda: outcome.report.penalty_lambda,
                iters: outcome.report.inner_iterations_total,
                residual: outcome.report.final_residual,
                converged: outcome.report.converged,
                weight_slope: outcome.diagnostics.fitted_slope,
                weight_intercept: outcome.diagnostics.fitted_intercept,
            })
        }
        Method::Als => {
            let outcome = als_rank2_baseline(observed, spec.als_iters, seed)?;
            let residual = outcome
                .objective_history
                .last()
                .map_or(f64::NAN, |&o| o.sqrt());
            Ok(MethodRun {
                estimate: outcome.completed,
                haplotypes: Some(outcome.haplotypes),
                bound: f64::NAN,
                lambda: f64::NAN,
                iters: outcome.sweeps,
                residual,
                converged: outcome.converged,
                weight_slope: f64::NAN,
                weight_intercept: f64::NAN,
            })
        }
    }
}

/// Per-(axis value, method) aggregate of a record list.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub method: Method,
    pub trials: usize,
    pub failures: usize,
    pub converged: usize,
    pub mean_nre: f64,
    pub mean_rr: Option<f64>,
}

/// Collapses records into per-(axis value, method) means; the mean of the
/// per-trial values reproduces the n-trial metric definitions exactly.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut rows: Vec<AggregateRow> = Vec::new();
    for record in records {
        let found = rows.iter_mut().find(|row| {
            row.axis_value == record.axis_value && row.method == record.method
        });
        let row = match found {
            Some(row) => row,
            None => {
                rows.push(AggregateRow {
                    axis_name: record.axis_name,
                    axis_value: record.axis_value,
                    method: record.method,
                    trials: 0,
                    failures: 0,
                    converged: 0,
                    mean_nre: 0.0,
                    mean_rr: None,
                });
                rows.last_mut().unwrap()
            }
        };
        row.trials += 1;
        if record.failed {
            row.failures += 1;
            continue;
        }
        if record.converged {
            row.converged += 1;
        }
        row.mean_nre += record.nre;
        if let Some(rr) = record.rr {
            *row.mean_rr.get_or_insert(0.0) += rr;
        }
    }
    for row in &mut rows {
        let completed = (row.trials - row.failures).max(1) as f64;
        row.mean_nre /= completed;
        if let Some(rr) = row.mean_rr.as_mut() {
            *rr /= completed;
        }
    }
    rows
}

/// The fixed CSV column set.
pub const CSV_HEADER: &str =
    "axis_name,axis_value,method,trial,seed,nre,rr,bound,lambda,iters,residual,converged,a,b,runtime_ms";

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        // nine significant digits
        format!("{x:.8e}")
    }
}

/// Writes records as CSV.
///
/// With `include_timings` off (the default for reproducible sweeps) the
/// `runtime_ms` cell is left empty, since wall-clock times are the one field
/// a seed cannot determine.
pub fn emit_csv<W: Write>(
    records: &[TrialRecord],
    mut out: W,
    include_timings: bool,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to emit".into()));
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let rr = r.rr.map_or(String::new(), fmt_float);
        let runtime = if include_timings {
            format!("{:.3}", r.runtime_ms)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.axis_name,
            fmt_float(r.axis_value),
            r.method.as_str(),
            r.trial,
            r.seed,
            fmt_float(r.nre),
            rr,
            fmt_float(r.bound),
            fmt_float(r.lambda),
            r.iters,
            fmt_float(r.residual),
            r.converged,
            fmt_float(r.weight_slope),
            fmt_float(r.weight_intercept),
            runtime,
        )?;
    }
    Ok(())
}

pub fn emit_csv_file(records: &[TrialRecord], path: &Path, include_timings: bool) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_csv(records, std::io::BufWriter::new(file), include_timings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pair(h1: Vec<i8>, h2: Vec<i8>) -> HaplotypePair {
        HaplotypePair::new(h1, h2).unwrap()
    }

    fn small_spec() -> SweepSpec {
        SweepSpec {
            rows: 12,
            cols: 12,
            axis: Axis::SamplingRate(vec![0.8]),
            sampling: Sampling::Entrywise { rate: 0.8 },
            noise: NoiseMode::noiseless(),
            methods: vec![Method::Nuclear],
            trials: 2,
            base_seed: 5,
            delta: DeltaPolicy::Fixed(1e-6),
            solver: SolverConfig::default(),
            weight_objective: WeightObjective::DeltaAware,
            als_iters: 100,
        }
    }

    #[test]
    fn nre_reference_points() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(nre(&[m.clone()], &m).unwrap(), 0.0);
        assert_eq!(nre(&[DMatrix::zeros(2, 2)], &m).unwrap(), 1.0);
        assert_eq!(nre(&[-m.clone()], &m).unwrap(), 2.0);
    }

    #[test]
    fn nre_rejects_zero_truth() {
        let z = DMatrix::zeros(2, 2);
        assert!(matches!(nre(&[z.clone()], &z), Err(Error::ZeroTruth)));
    }

    #[test]
    fn nre_is_invariant_under_shared_row_permutation() {
        let truth = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 1.0, 1.0, -1.0, 1.0]);
        let est = DMatrix::from_row_slice(3, 2, &[0.5, -1.0, 1.0, 0.5, -1.0, 0.5]);
        let permute = |m: &DMatrix<f64>| {
            let mut p = m.clone();
            p.swap_rows(0, 2);
            p
        };
        let direct = nre(&[est.clone()], &truth).unwrap();
        let permuted = nre(&[permute(&est)], &permute(&truth)).unwrap();
        assert_relative_eq!(direct, permuted, epsilon = 1e-15);
    }

    #[test]
    fn rr_reference_points() {
        let truth = pair(vec![1, -1, 1, -1], vec![-1, -1, 1, 1]);
        assert_eq!(reconstruction_rate(&[truth.clone()], &truth).unwrap(), 1.0);

        // one mismatched site in the second haplotype
        let est = pair(vec![1, -1, 1, -1], vec![-1, -1, 1, -1]);
        assert_eq!(reconstruction_rate(&[est], &truth).unwrap(), 0.875);

        // both haplotypes inverted AND the swap assignment equally wrong;
        // that is only possible when the truth rows coincide
        let homozygous = pair(vec![1, -1, 1, -1], vec![1, -1, 1, -1]);
        let inverted = pair(vec![-1, 1, -1, 1], vec![-1, 1, -1, 1]);
        assert_eq!(
            reconstruction_rate(&[inverted], &homozygous).unwrap(),
            0.0
        );
    }

    #[test]
    fn rr_uses_best_assignment() {
        let truth = pair(vec![1, 1, 1, 1], vec![-1, -1, -1, -1]);
        let swapped = pair(vec![-1, -1, -1, -1], vec![1, 1, 1, 1]);
        assert_eq!(reconstruction_rate(&[swapped], &truth).unwrap(), 1.0);
    }

    #[test]
    fn rr_stays_within_unit_interval() {
        let truth = pair(vec![1, -1, 1], vec![-1, 1, -1]);
        for bits in 0..64 {
            let h1: Vec<i8> = (0..3).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect();
            let h2: Vec<i8> = (0..3).map(|k| if bits >> (k + 3) & 1 == 1 { 1 } else { -1 }).collect();
            let rate = reconstruction_rate(&[pair(h1, h2)], &truth).unwrap();
            assert!((0.0..=1.0).contains(&rate));
        }
    }

    #[test]
    fn noiseless_sweep_recovers_exactly() {
        let records = run_sweep(&small_spec()).unwrap();
        assert_eq!(records.len(), 2);
        for r in &records {
            assert!(!r.failed);
            assert!(r.nre < 1e-2, "nre {}", r.nre);
            assert_eq!(r.rr, Some(1.0));
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        let spec = small_spec();
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        emit_csv(&a, &mut csv_a, false).unwrap();
        emit_csv(&b, &mut csv_b, false).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn record_order_is_axis_method_trial() {
        let mut spec = small_spec();
        spec.axis = Axis::SamplingRate(vec![0.9, 0.8]);
        spec.methods = vec![Method::Nuclear, Method::Als];
        let records = run_sweep(&spec).unwrap();
        let keys: Vec<(f64, &str, usize)> = records
            .iter()
            .map(|r| (r.axis_value, r.method.as_str(), r.trial))
            .collect();
        assert_eq!(
            keys,
            vec![
                (0.9, "nuclear", 0),
                (0.9, "nuclear", 1),
                (0.9, "als", 0),
                (0.9, "als", 1),
                (0.8, "nuclear", 0),
                (0.8, "nuclear", 1),
                (0.8, "als", 0),
                (0.8, "als", 1),
            ]
        );
    }

    #[test]
    fn csv_round_trips_to_printed_precision() {
        let records = run_sweep(&small_spec()).unwrap();
        let mut buffer = Vec::new();
        emit_csv(&records, &mut buffer, false).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for (line, record) in lines.zip(&records) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 15);
            assert_eq!(fields[0], record.axis_name);
            let axis: f64 = fields[1].parse().unwrap();
            assert_relative_eq!(axis, record.axis_value, max_relative = 1e-8);
            assert_eq!(fields[2], record.method.as_str());
            let nre_parsed: f64 = fields[5].parse().unwrap();
            assert_relative_eq!(nre_parsed, record.nre, max_relative = 1e-8);
            let rr_parsed: f64 = fields[6].parse().unwrap();
            assert_relative_eq!(rr_parsed, record.rr.unwrap(), max_relative = 1e-8);
            assert_eq!(fields[14], "");
        }
    }

    #[test]
    fn empty_record_list_is_rejected() {
        let mut buffer = Vec::new();
        assert!(emit_csv(&[], &mut buffer, false).is_err());
    }

    #[test]
    fn single_record_yields_two_lines() {
        let spec = SweepSpec {
            trials: 1,
            ..small_spec()
        };
        let records = run_sweep(&spec).unwrap();
        let mut buffer = Vec::new();
        emit_csv(&records, &mut buffer, false).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn aggregation_averages_per_cell() {
        let mut spec = small_spec();
        spec.methods = vec![Method::Nuclear, Method::Als];
        spec.trials = 3;
        let records = run_sweep(&spec).unwrap();
        let rows = aggregate(&records);
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert_eq!(row.trials, 3);
            assert_eq!(row.failures, 0);
        }
    }
}
