//! Synthetic data generation: rank-2 sign matrices, entrywise or read-based
//! observation sampling, quality-linked flip noise, and a plain-text
//! fragment file format.
//!
//! All generation is deterministic in the configured seed; independent
//! random streams are derived per generation stage so the stages never
//! consume each other's draws.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{mask_apply, MaskedMatrix};
use crate::pipeline::{HaplotypePair, Read, ReadSet, ReadSite};
use crate::weights::{phred_to_prob, QualityGrid};

const STREAM_MATRIX: u64 = 1;
const STREAM_SAMPLING: u64 = 2;
const STREAM_NOISE: u64 = 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How observed positions are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// A uniform random subset of `round(rate * N * l)` entries.
    Entrywise { rate: f64 },
    /// Contiguous-span reads, one per row, tiled so that every column is
    /// covered by exactly `coverage` distinct rows.
    ReadBased { coverage: usize },
}

/// How observation noise and quality labels are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    /// Exactly `round(q * |Ω|)` entries are sign-flipped. Flipped entries
    /// receive the low quality score and clean entries the high one, each
    /// mislabeled (swapped) with probability `epsilon`.
    FixedFraction {
        q: f64,
        epsilon: f64,
        low_quality: u32,
        high_quality: u32,
    },
    /// Every entry draws its quality from the given distribution and then
    /// flips with the implied error probability `10^(-Q/10)`.
    QualityDriven { distribution: Vec<(u32, f64)> },
}

impl NoiseMode {
    /// Quiet data with trustworthy labels: fixed fraction 0, no mislabeling.
    pub fn noiseless() -> Self {
        NoiseMode::FixedFraction {
            q: 0.0,
            epsilon: 0.0,
            low_quality: DEFAULT_LOW_QUALITY,
            high_quality: DEFAULT_HIGH_QUALITY,
        }
    }

    /// Fixed fraction `q` with the default label qualities and mislabel rate.
    pub fn contaminated(q: f64) -> Self {
        NoiseMode::FixedFraction {
            q,
            epsilon: DEFAULT_MISLABEL_RATE,
            low_quality: DEFAULT_LOW_QUALITY,
            high_quality: DEFAULT_HIGH_QUALITY,
        }
    }
}

pub const DEFAULT_LOW_QUALITY: u32 = 10;
pub const DEFAULT_HIGH_QUALITY: u32 = 40;
pub const DEFAULT_MISLABEL_RATE: f64 = 0.1;

/// Default quality distribution for quality-driven noise: uniform over
/// Q ∈ {10, 20, 30, 40}.
pub fn default_quality_distribution() -> Vec<(u32, f64)> {
    vec![(10, 0.25), (20, 0.25), (30, 0.25), (40, 0.25)]
}

/// Full description of one synthetic scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rows: usize,
    pub cols: usize,
    pub sampling: Sampling,
    pub noise: NoiseMode,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::InvalidConfig(
                "need at least a 2x2 grid".into(),
            ));
        }
        match self.sampling {
            Sampling::Entrywise { rate } => {
                if !(rate > 0.0 && rate <= 1.0) {
                    return Err(Error::InvalidSamplingRate(rate));
                }
            }
            Sampling::ReadBased { coverage } => {
                if coverage == 0 {
                    return Err(Error::InvalidConfig("coverage must be at least 1".into()));
                }
            }
        }
        match &self.noise {
            NoiseMode::FixedFraction { q, epsilon, .. } => {
                if !(0.0..1.0).contains(q) {
                    return Err(Error::InvalidConfig(format!(
                        "noise fraction must lie in [0, 1), got {q}"
                    )));
                }
                if !(0.0..1.0).contains(epsilon) {
                    return Err(Error::InvalidConfig(format!(
                        "mislabel rate must lie in [0, 1), got {epsilon}"
                    )));
                }
            }
            NoiseMode::QualityDriven { distribution } => {
                if distribution.is_empty() {
                    return Err(Error::InvalidConfig(
                        "quality distribution is empty".into(),
                    ));
                }
                let total: f64 = distribution.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 || distribution.iter().any(|&(_, p)| p < 0.0) {
                    return Err(Error::InvalidConfig(
                        "quality distribution probabilities must be nonnegative and sum to 1"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Draws a rank-2 matrix whose rows are copies of two distinct ±1 haplotype
/// vectors, both guaranteed to appear.
pub fn gen_rank2_matrix(
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, HaplotypePair, Vec<u8>)> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidConfig("need at least a 2x2 matrix".into()));
    }
    let mut rng = rng_for(seed, STREAM_MATRIX);

    let draw = |rng: &mut ChaCha8Rng| -> Vec<i8> {
        (0..cols).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
    };

    let mut attempts = 0;
    let (h1, h2) = loop {
        let h1 = draw(&mut rng);
        let h2 = draw(&mut rng);
        let negated: Vec<i8> = h1.iter().map(|&x| -x).collect();
        if h2 != h1 && h2 != negated {
            break (h1, h2);
        }
        attempts += 1;
        if attempts >= 100 {
            return Err(Error::InvalidConfig(
                "failed to draw two independent haplotypes".into(),
            ));
        }
    };

    attempts = 0;
    let assignment = loop {
        let assignment: Vec<u8> = (0..rows).map(|_| u8::from(rng.random_bool(0.5))).collect();
        if assignment.iter().any(|&g| g == 0) && assignment.iter().any(|&g| g == 1) {
            break assignment;
        }
        attempts += 1;
        if attempts >= 100 {
            return Err(Error::InvalidConfig(
                "failed to assign both haplotypes to rows".into(),
            ));
        }
    };

    let m = DMatrix::from_fn(rows, cols, |i, j| {
        let src = if assignment[i] == 0 { &h1 } else { &h2 };
        src[j] as f64
    });
    Ok((m, HaplotypePair::new(h1, h2)?, assignment))
}

/// Samples an observation set over `m` according to the configured scheme
/// and returns the masked matrix of true values.
pub fn sample_observations(m: &DMatrix<f64>, cfg: &SimConfig) -> Result<MaskedMatrix> {
    cfg.validate()?;
    if m.nrows() != cfg.rows || m.ncols() != cfg.cols {
        return Err(Error::InvalidConfig(format!(
            "matrix is {}x{} but the scenario says {}x{}",
            m.nrows(),
            m.ncols(),
            cfg.rows,
            cfg.cols
        )));
    }
    let mut rng = rng_for(cfg.seed, STREAM_SAMPLING);
    let omega = match cfg.sampling {
        Sampling::Entrywise { rate } => {
            let total = cfg.rows * cfg.cols;
            let count = (rate * total as f64).round() as usize;
            let mut all: Vec<(usize, usize)> = (0..cfg.rows)
                .flat_map(|i| (0..cfg.cols).map(move |j| (i, j)))
                .collect();
            let (chosen, _) = all.partial_shuffle(&mut rng, count);
            chosen.to_vec()
        }
        Sampling::ReadBased { coverage } => read_spans(cfg, coverage, &mut rng)?
            .into_iter()
            .flat_map(|(row, start, len)| (start..start + len).map(move |j| (row, j)))
            .collect(),
    };
    mask_apply(m, &omega)
}

/// Lays out one contiguous read per row so that every column is covered by
/// exactly `coverage` rows: the rows are split into `coverage` layers and
/// each layer's reads partition the columns into near-equal spans.
/// Returns `(row, start_col, span_len)` triples.
fn read_spans(
    cfg: &SimConfig,
    coverage: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize, usize)>> {
    let (rows, cols) = (cfg.rows, cfg.cols);
    if coverage > rows {
        return Err(Error::InvalidConfig(format!(
            "coverage {coverage} exceeds the number of rows {rows}"
        )));
    }

    // rows per layer, as even as possible
    let base = rows / coverage;
    let extra = rows % coverage;
    let mut layer_sizes = vec![base; coverage];
    for size in layer_sizes.iter_mut().take(extra) {
        *size += 1;
    }
    if layer_sizes.iter().any(|&s| s > cols) {
        return Err(Error::InvalidConfig(format!(
            "cannot split {cols} columns into {} nonempty reads",
            layer_sizes.iter().max().unwrap()
        )));
    }

    // random assignment of rows to layer slots
    let mut row_order: Vec<usize> = (0..rows).collect();
    row_order.shuffle(rng);

    let mut spans = Vec::with_capacity(rows);
    let mut next_row = 0;
    for &reads_in_layer in &layer_sizes {
        // near-equal partition of the columns, remainder spread at random
        let span_base = cols / reads_in_layer;
        let span_extra = cols % reads_in_layer;
        let mut lens = vec![span_base; reads_in_layer];
        let mut slots: Vec<usize> = (0..reads_in_layer).collect();
        slots.shuffle(rng);
        for &slot in slots.iter().take(span_extra) {
            lens[slot] += 1;
        }
        let mut start = 0;
        for &len in &lens {
            spans.push((row_order[next_row], start, len));
            next_row += 1;
            start += len;
        }
    }
    Ok(spans)
}

/// Applies sign-flip noise and draws the quality labels.
///
/// Returns the noisy matrix, the aligned quality grid, and the ground-truth
/// set of flipped positions.
pub fn inject_noise(
    clean: &MaskedMatrix,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(MaskedMatrix, QualityGrid, Vec<(usize, usize)>)> {
    cfg.validate()?;
    for &(i, j) in clean.omega() {
        let v = clean.get(i, j);
        if v != 1.0 && v != -1.0 {
            return Err(Error::NotPlusMinusOne);
        }
    }
    let mut rng = rng_for(seed, STREAM_NOISE);
    let omega = clean.omega();
    let mut values = clean.values().clone();
    let mut scores = vec![0.0f64; omega.len()];
    let mut flipped = Vec::new();

    match &cfg.noise {
        NoiseMode::FixedFraction {
            q,
            epsilon,
            low_quality,
            high_quality,
        } => {
            let flips = (q * omega.len() as f64).round() as usize;
            if flips >= omega.len() && flips > 0 {
                return Err(Error::InvalidConfig(format!(
                    "noise fraction {q} would flip every observation"
                )));
            }
            let mut idx: Vec<usize> = (0..omega.len()).collect();
            let (chosen, _) = idx.partial_shuffle(&mut rng, flips);
            let mut is_flip = vec![false; omega.len()];
            for &k in chosen.iter() {
                is_flip[k] = true;
            }
            for (k, &(i, j)) in omega.iter().enumerate() {
                if is_flip[k] {
                    values[(i, j)] = -values[(i, j)];
                    flipped.push((i, j));
                }
                let mislabeled = *epsilon > 0.0 && rng.random_bool(*epsilon);
                let honest = if is_flip[k] { *low_quality } else { *high_quality };
                let swapped = if is_flip[k] { *high_quality } else { *low_quality };
                scores[k] = if mislabeled { swapped } else { honest } as f64;
            }
            flipped.sort_unstable();
        }
        NoiseMode::QualityDriven { distribution } => {
            for (k, &(i, j)) in omega.iter().enumerate() {
                let mut u = rng.random_range(0.0..1.0);
                let mut quality = distribution.last().unwrap().0;
                for &(candidate, p) in distribution {
                    if u < p {
                        quality = candidate;
                        break;
                    }
                    u -= p;
                }
                scores[k] = quality as f64;
                let flip_prob = phred_to_prob(quality as f64)?;
                if rng.random_bool(flip_prob) {
                    values[(i, j)] = -values[(i, j)];
                    flipped.push((i, j));
                }
            }
        }
    }

    let noisy = mask_apply(&values, omega)?;
    let grid = QualityGrid::new(omega.to_vec(), scores)?;
    Ok((noisy, grid, flipped))
}

/// Regroups a masked ±1 matrix and its quality grid into per-row reads.
/// Rows without observations produce no read.
pub fn to_read_set(y: &MaskedMatrix, qualities: &QualityGrid) -> Result<ReadSet> {
    if y.omega() != qualities.omega() {
        return Err(Error::WeightMaskMismatch);
    }
    let mut per_row: BTreeMap<usize, Vec<ReadSite>> = BTreeMap::new();
    for (&(i, j), &q) in y.omega().iter().zip(qualities.scores()) {
        let value = y.get(i, j);
        if value != 1.0 && value != -1.0 {
            return Err(Error::NotPlusMinusOne);
        }
        per_row.entry(i).or_default().push(ReadSite {
            col: j,
            value: value as i8,
            quality: q as u32,
        });
    }
    let reads = per_row
        .into_iter()
        .map(|(row, sites)| Read { row, sites })
        .collect();
    ReadSet::new(y.rows(), y.cols(), reads)
}

/// Writes a read set in the fragment format:
///
/// ```text
/// N l
/// read_id k col:allele:Q col:allele:Q ...
/// ```
///
/// one read per line, `k` site triples after the count, columns 0-based,
/// allele 0 encoding value +1 and allele 1 encoding −1.
pub fn write_fragments<W: Write>(reads: &ReadSet, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", reads.num_rows(), reads.num_cols())?;
    for read in reads.reads() {
        write!(out, "{} {}", read.row, read.sites.len())?;
        for site in &read.sites {
            let allele = if site.value == 1 { 0 } else { 1 };
            write!(out, " {}:{}:{}", site.col, allele, site.quality)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_fragments_file(reads: &ReadSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_fragments(reads, std::io::BufWriter::new(file))
}

/// Parses the fragment format written by [`write_fragments`].
pub fn read_fragments<R: std::io::Read>(input: R) -> Result<ReadSet> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();

    let parse_err = |line: usize, msg: String| Error::FragmentParse { line, msg };
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(Error::Io)?;
    let mut parts = header.split_whitespace();
    let num_rows: usize = parts
        .next()
        .ok_or_else(|| parse_err(1, "missing row count".into()))?
        .parse()
        .map_err(|e| parse_err(1, format!("bad row count: {e}")))?;
    let num_cols: usize = parts
        .next()
        .ok_or_else(|| parse_err(1, "missing column count".into()))?
        .parse()
        .map_err(|e| parse_err(1, format!("bad column count: {e}")))?;
    if parts.next().is_some() {
        return Err(parse_err(1, "trailing tokens after header".into()));
    }

    let mut reads = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split(' ');
        let row: usize = tokens
            .next()
            .ok_or_else(|| parse_err(line_no, "missing read id".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad read id: {e}")))?;
        let count: usize = tokens
            .next()
            .ok_or_else(|| parse_err(line_no, "missing site count".into()))?
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad site count: {e}")))?;
        let mut sites = Vec::with_capacity(count);
        for _ in 0..count {
            let token = tokens
                .next()
                .ok_or_else(|| parse_err(line_no, "line truncated before all sites".into()))?;
            let mut fields = token.split(':');
            let col: usize = fields
                .next()
                .ok_or_else(|| parse_err(line_no, "missing column".into()))?
                .parse()
                .map_err(|e| parse_err(line_no, format!("bad column: {e}")))?;
            let allele: i64 = fields
                .next()
                .ok_or_else(|| parse_err(line_no, "missing allele".into()))?
                .parse()
                .map_err(|e| parse_err(line_no, format!("bad allele: {e}")))?;
            let quality: i64 = fields
                .next()
                .ok_or_else(|| parse_err(line_no, "missing quality".into()))?
                .parse()
                .map_err(|e| parse_err(line_no, format!("bad quality: {e}")))?;
            if fields.next().is_some() {
                return Err(parse_err(line_no, "too many fields in site".into()));
            }
            let value = match allele {
                0 => 1i8,
                1 => -1i8,
                other => {
                    return Err(parse_err(line_no, format!("allele must be 0 or 1, got {other}")))
                }
            };
            if quality < 0 {
                return Err(parse_err(
                    line_no,
                    format!("quality must be nonnegative, got {quality}"),
                ));
            }
            sites.push(ReadSite {
                col,
                value,
                quality: quality as u32,
            });
        }
        if tokens.next().is_some() {
            return Err(parse_err(line_no, "trailing tokens after sites".into()));
        }
        reads.push(Read { row, sites });
    }
    ReadSet::new(num_rows, num_cols, reads)
}

pub fn read_fragments_file(path: &Path) -> Result<ReadSet> {
    read_fragments(std::fs::File::open(path)?)
}
