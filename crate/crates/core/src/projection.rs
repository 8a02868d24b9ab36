//! Recursive hierarchical projection.
//!
//! For level `i` the projector is built from the level-`i − 1` projector:
//!
//! ```text
//! P_0 = I
//! P_i = P_{i-1} (I − Q_i Λ_i Q_iᵀ)
//! ```
//!
//! where `Q_i` is an orthonormal basis of the row space of the level's
//! sorted task stack times `P_{i-1}` (after removing dependent rows) and
//! `Λ_i` holds the priority value of the task owning each retained row.
//! With all values equal to 1 this is the classical nested null-space
//! projector; with values in `(0, 1)` the level only partially occupies its
//! directions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::task_model::{select_level_tasks, sort_descending, LevelStack, PriorityMatrix, TaskLibrary};

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Entries below this magnitude are skipped by the QR sign convention.
const SIGN_EPS: f64 = 1e-12;

/// Absolute rank threshold for `b`: `tol · max(1, ‖b‖_max)`.
pub fn rank_threshold(b: &DMatrix<f64>, tol: f64) -> f64 {
    tol * b.amax().max(1.0)
}

/// Orthonormal basis of the retained rows of a level.
#[derive(Clone, Debug, PartialEq)]
pub struct RowBasis {
    /// `n × r`, orthonormal columns.
    pub q: DMatrix<f64>,
    /// Positions of the retained rows in the sorted stack, increasing.
    pub indices: Vec<usize>,
}

impl RowBasis {
    pub fn empty(n: usize) -> Self {
        RowBasis {
            q: DMatrix::zeros(n, 0),
            indices: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }
}

/// Keeps the first maximal linearly independent subset of the rows of `b`.
///
/// Rows are visited in order and reduced by Gauss-Jordan elimination against
/// the rows kept so far, pivoting on the largest remaining entry of each
/// kept row. A row whose residual has max-norm at most
/// [`rank_threshold`] is dependent. Earlier rows therefore always win rank
/// conflicts.
pub fn row_full_rank(b: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<usize>) {
    let threshold = rank_threshold(b, tol);
    // Reduced echelon rows and their pivot columns.
    let mut echelon: Vec<(DVector<f64>, usize)> = Vec::new();
    let mut kept = Vec::new();

    for k in 0..b.nrows() {
        let mut residual: DVector<f64> = b.row(k).transpose();
        for (row, pivot) in &echelon {
            let factor = residual[*pivot] / row[*pivot];
            if factor != 0.0 {
                residual.axpy(-factor, row, 1.0);
            }
        }
        let pivot = residual.iamax();
        if residual[pivot].abs() <= threshold {
            continue;
        }
        // Clear the new pivot column from the rows already kept.
        for (row, _) in echelon.iter_mut() {
            let factor = row[pivot] / residual[pivot];
            if factor != 0.0 {
                row.axpy(-factor, &residual, 1.0);
            }
        }
        echelon.push((residual, pivot));
        kept.push(k);
    }

    let reduced = b.select_rows(kept.iter());
    (reduced, kept)
}

/// Orthonormal basis `Q` (`n × r`) of the row space of a full-row-rank
/// matrix, from the QR decomposition of its transpose.
///
/// Each column is signed so that its first non-negligible entry is positive.
pub fn orthonormal_basis(b_reduced: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let (r, n) = b_reduced.shape();
    if r == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    if r > n {
        return Err(Error::RankMismatch { index: n, diag: 0.0 });
    }
    let qr = b_reduced.transpose().qr();
    let rfac = qr.r();
    // The rows already passed the elimination test; a vanishing diagonal
    // here means the two rank decisions disagree.
    let floor = 1e-2 * rank_threshold(b_reduced, tol);
    for k in 0..r {
        let diag = rfac[(k, k)];
        if diag.abs() <= floor {
            return Err(Error::RankMismatch { index: k, diag });
        }
    }
    let mut q = qr.q();
    for mut col in q.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > SIGN_EPS) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(q)
}

/// Reduced occupation matrix: the full block diagonal
/// `diag(α_{s_1} I_{d_1}, …)` restricted to the retained row positions.
pub fn occupation_matrix(
    psi: &PriorityMatrix,
    level: usize,
    order: &[usize],
    dims: &[usize],
    retained: &[usize],
) -> Result<DMatrix<f64>> {
    let full: Vec<f64> = order
        .iter()
        .zip(dims)
        .flat_map(|(&j, &d)| std::iter::repeat_n(psi.alpha(level, j), d))
        .collect();
    let mut diag = DVector::zeros(retained.len());
    for (k, &idx) in retained.iter().enumerate() {
        diag[k] = *full.get(idx).ok_or(Error::IndexOutOfRange {
            index: idx,
            len: full.len(),
        })?;
    }
    Ok(DMatrix::from_diagonal(&diag))
}

/// `P_prev (I − Q Λ Qᵀ)` for a diagonal `Λ` given by its diagonal.
///
/// Directions with zero occupation are skipped, so `Λ = 0` returns `P_prev`
/// unchanged.
pub fn rhp_update(p_prev: &DMatrix<f64>, q: &DMatrix<f64>, occupation: &DVector<f64>) -> DMatrix<f64> {
    let mut p = p_prev.clone();
    for (k, &lambda) in occupation.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        let qk = q.column(k);
        let pq = p_prev * qk;
        p.ger(-lambda, &pq, &qk, 1.0);
    }
    p
}

/// Outcome of one recursion step.
#[derive(Clone, Debug)]
pub struct RhpLevel {
    pub level: usize,
    /// Projector of the upper `level` levels.
    pub p: DMatrix<f64>,
    pub basis: RowBasis,
    /// Diagonal of the reduced occupation matrix, one entry per retained row.
    pub occupation: DVector<f64>,
    /// Sorted stacked tasks of the level.
    pub stack: LevelStack,
}

/// Computes `P_level` from `P_{level−1}`.
///
/// Steps: select the level's tasks, sort them by descending priority value,
/// drop dependent rows of `A P_{level−1}`, orthonormalize the rest, pick the
/// matching occupation values, and update the projector. A level without
/// tasks returns a copy of `p_prev`.
pub fn compute_rhp(
    psi: &PriorityMatrix,
    library: &TaskLibrary,
    level: usize,
    p_prev: &DMatrix<f64>,
    tol: f64,
) -> Result<RhpLevel> {
    let n = library.n();
    if p_prev.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "previous projector is {}x{}, expected {n}x{n}",
            p_prev.nrows(),
            p_prev.ncols()
        )));
    }
    let selected = select_level_tasks(psi, level);
    let stack = sort_descending(&selected, psi, level, library);
    if stack.is_empty() {
        return Ok(RhpLevel {
            level,
            p: p_prev.clone(),
            basis: RowBasis::empty(n),
            occupation: DVector::zeros(0),
            stack,
        });
    }

    let projected = &stack.a * p_prev;
    let (reduced, indices) = row_full_rank(&projected, tol);
    let q = orthonormal_basis(&reduced, tol)?;
    let occupation = occupation_matrix(psi, level, &stack.order, &stack.dims, &indices)?
        .diagonal();
    let p = rhp_update(p_prev, &q, &occupation);
    Ok(RhpLevel {
        level,
        p,
        basis: RowBasis { q, indices },
        occupation,
        stack,
    })
}

/// `I − A⁺A`, with the pseudoinverse taken over singular values above
/// [`rank_threshold`].
pub fn null_space_projector(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    let range = row_space_basis_svd(a, tol)?;
    Ok(DMatrix::identity(n, n) - &range * range.transpose())
}

/// Singular values of `a` and its full right factor `V` (`n × n`).
///
/// Computed with faer: nalgebra's SVD returns wrong factors for a few
/// percent of exactly rank-deficient wide matrices, which are the normal
/// case for stacked task matrices.
fn right_svd(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let svd = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)])
        .svd()
        .map_err(|_| Error::Svd)?;
    let s = svd.S().column_vector();
    let values = (0..m.min(n)).map(|k| s[k]).collect();
    let v = svd.V();
    Ok((values, DMatrix::from_fn(n, n, |i, j| v[(i, j)])))
}

/// Orthonormal basis of the row space of `a` from its singular value
/// decomposition.
pub fn row_space_basis_svd(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let threshold = rank_threshold(a, tol);
    let (values, v) = right_svd(a)?;
    let cols: Vec<usize> = (0..values.len()).filter(|&k| values[k] > threshold).collect();
    Ok(v.select_columns(cols.iter()))
}

/// Orthonormal basis of the null space of `a` (`n × (n − rank)`).
pub fn null_space_basis_svd(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let threshold = rank_threshold(a, tol);
    let (values, v) = right_svd(a)?;
    let cols: Vec<usize> = (0..n)
        .filter(|&k| values.get(k).is_none_or(|&s| s <= threshold))
        .collect();
    Ok(v.select_columns(cols.iter()))
}
