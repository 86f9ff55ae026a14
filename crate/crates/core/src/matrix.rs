//! Dense matrix containers, observation-mask algebra, and SVD utilities.
//!
//! Everything downstream works at desk scale (hundreds of rows/columns at
//! most), so storage is dense throughout and the observation set is kept as
//! an explicit, sorted index list for exact mask semantics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold below which a singular value is treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A dense matrix together with the set of observed entries.
///
/// Entries outside the observation set are exactly zero, so the value grid
/// is the masked projection of whatever matrix produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    values: DMatrix<f64>,
    omega: Vec<(usize, usize)>,
}

impl MaskedMatrix {
    /// Builds a masked matrix from explicit `(row, col, value)` observations.
    ///
    /// Unlike [`mask_apply`], duplicate index pairs are rejected rather than
    /// deduplicated, since two observations of the same entry conflict.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut values = DMatrix::zeros(rows, cols);
        let mut omega = Vec::with_capacity(entries.len());
        for &(i, j, v) in entries {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    rows,
                    cols,
                });
            }
            omega.push((i, j));
            values[(i, j)] = v;
        }
        omega.sort_unstable();
        if let Some(w) = omega.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateObservation {
                row: w[0].0,
                col: w[0].1,
            });
        }
        Ok(Self { values, omega })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Observed index pairs, sorted row-major and free of duplicates.
    pub fn omega(&self) -> &[(usize, usize)] {
        &self.omega
    }

    pub fn omega_len(&self) -> usize {
        self.omega.len()
    }

    /// |Ω| / (N·l).
    pub fn sampling_rate(&self) -> f64 {
        self.omega.len() as f64 / (self.rows() * self.cols()) as f64
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    /// Index pairs *not* in the observation set, sorted row-major.
    pub fn complement(&self) -> Vec<(usize, usize)> {
        let mut observed = vec![false; self.rows() * self.cols()];
        for &(i, j) in &self.omega {
            observed[i * self.cols() + j] = true;
        }
        let mut out = Vec::with_capacity(self.rows() * self.cols() - self.omega.len());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                if !observed[i * self.cols() + j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Frobenius norm of the stored (masked) values.
    pub fn masked_norm(&self) -> f64 {
        self.omega
            .iter()
            .map(|&(i, j)| self.values[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Projects a dense matrix onto an observation set: entries in `omega` are
/// kept, all others become zero.
pub fn mask_apply(a: &DMatrix<f64>, omega: &[(usize, usize)]) -> Result<MaskedMatrix> {
    let (rows, cols) = (a.nrows(), a.ncols());
    let mut sorted = omega.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &(i, j) in &sorted {
        if i >= rows || j >= cols {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                rows,
                cols,
            });
        }
    }
    let mut values = DMatrix::zeros(rows, cols);
    for &(i, j) in &sorted {
        values[(i, j)] = a[(i, j)];
    }
    Ok(MaskedMatrix {
        values,
        omega: sorted,
    })
}

/// A thin singular value decomposition with the numerically zero part
/// already removed.
///
/// Singular values are nonincreasing; `left` and `right` hold the matching
/// orthonormal left/right singular vectors as columns.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    rows: usize,
    cols: usize,
    singular_values: Vec<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Left singular vectors, one column per retained singular value.
    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// Right singular vectors, one column per retained singular value.
    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }

    /// Count of singular values above `RANK_TOLERANCE * sigma_1`.
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }

    /// Rebuilds the matrix as the sum of rank-one terms.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        rank_terms_sum(self, self.singular_values.len())
    }
}

fn rank_terms_sum(f: &SvdFactors, terms: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(f.rows, f.cols);
    for k in 0..terms.min(f.singular_values.len()) {
        let sigma = f.singular_values[k];
        let u = f.left.column(k);
        let v = f.right.column(k);
        for j in 0..f.cols {
            let sv = sigma * v[j];
            for i in 0..f.rows {
                out[(i, j)] += u[i] * sv;
            }
        }
    }
    out
}

extern "C" {
    fn openblas_set_num_threads(num_threads: std::os::raw::c_int);
}

/// The solver parallelizes across trials, so the BLAS layer must not spawn
/// its own threads underneath.
fn pin_blas_threads() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// Thin SVD via LAPACK's divide-and-conquer routine. Returns
/// (singular values, U as m×k, Vᵀ as k×n), all column-major.
fn dgesdd_thin(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    pin_blas_threads();
    let (m, n) = (a.nrows(), a.ncols());
    let k = m.min(n);
    let mut work_input = a.as_slice().to_vec();
    let mut s = vec![0.0f64; k];
    let mut u = DMatrix::<f64>::zeros(m, k);
    let mut vt = DMatrix::<f64>::zeros(k, n);
    let mut iwork = vec![0i32; 8 * k];
    let mut info = 0i32;

    let mut optimal = 0.0f64;
    unsafe {
        lapack::dgesdd(
            b'S',
            m as i32,
            n as i32,
            &mut work_input,
            m as i32,
            &mut s,
            u.as_mut_slice(),
            m as i32,
            vt.as_mut_slice(),
            k as i32,
            std::slice::from_mut(&mut optimal),
            -1,
            &mut iwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::SvdFailed);
    }
    let lwork = optimal as usize;
    let mut work = vec![0.0f64; lwork];
    unsafe {
        lapack::dgesdd(
            b'S',
            m as i32,
            n as i32,
            &mut work_input,
            m as i32,
            &mut s,
            u.as_mut_slice(),
            m as i32,
            vt.as_mut_slice(),
            k as i32,
            &mut work,
            lwork as i32,
            &mut iwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::SvdFailed);
    }
    Ok((s, u, vt))
}

/// Full SVD of a dense matrix, with singular values sorted nonincreasing and
/// the numerically zero tail dropped.
pub fn svd(a: &DMatrix<f64>) -> Result<SvdFactors> {
    let (rows, cols) = (a.nrows(), a.ncols());
    for j in 0..cols {
        for i in 0..rows {
            if !a[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidConfig("cannot decompose an empty matrix".into()));
    }
    let (s, u, vt) = dgesdd_thin(a)?;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&x, &y| s[y].partial_cmp(&s[x]).unwrap());
    let sigma_max = order.first().map_or(0.0, |&k| s[k]);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| s[k] > RANK_TOLERANCE * sigma_max && s[k] > 0.0)
        .collect();

    let mut left = DMatrix::zeros(rows, keep.len());
    let mut right = DMatrix::zeros(cols, keep.len());
    let mut singular_values = Vec::with_capacity(keep.len());
    for (out_k, &k) in keep.iter().enumerate() {
        singular_values.push(s[k]);
        for i in 0..rows {
            left[(i, out_k)] = u[(i, k)];
        }
        for j in 0..cols {
            right[(j, out_k)] = vt[(k, j)];
        }
    }
    Ok(SvdFactors {
        rows,
        cols,
        singular_values,
        left,
        right,
    })
}

/// Best rank-`r` reconstruction from an SVD: the sum of the `r` leading
/// rank-one terms.
pub fn truncate_rank(f: &SvdFactors, r: usize) -> Result<DMatrix<f64>> {
    if r == 0 {
        return Err(Error::InvalidConfig(
            "truncation rank must be at least 1".into(),
        ));
    }
    Ok(rank_terms_sum(f, r))
}
