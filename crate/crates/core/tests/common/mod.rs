//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's projection or QP code, so
//! agreement with it is evidence rather than tautology.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rhp_hqp::qp::QpProblem;
use rhp_hqp::task_model::{Constraint, PriorityMatrix, Task, TaskLibrary};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut StdRng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0))
}

/// Full SVD `(U, σ, V)` through faer. nalgebra's own SVD is not used: it
/// returns wrong factors for some exactly rank-deficient matrices.
pub fn svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let d = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]).svd().unwrap();
    let (u, s, v) = (d.U(), d.S().column_vector(), d.V());
    (
        DMatrix::from_fn(m, m, |i, j| u[(i, j)]),
        (0..m.min(n)).map(|k| s[k]).collect(),
        DMatrix::from_fn(n, n, |i, j| v[(i, j)]),
    )
}

fn numerical_rank(s: &[f64]) -> usize {
    let smax = s.iter().copied().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > 1e-10 * smax.max(1.0)).count()
}

/// Moore–Penrose pseudoinverse, dropping singular values below
/// `1e-10 · max(1, σ_max)`.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let (u, s, v) = svd(a);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for k in 0..numerical_rank(&s) {
        out += v.column(k) * u.column(k).transpose() / s[k];
    }
    out
}

/// `I − A⁺A`.
pub fn nullspace_projector(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    DMatrix::identity(n, n) - pinv(a) * a
}

/// Orthonormal basis (columns) of the null space of `a`.
pub fn nullspace_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let (_, s, v) = svd(a);
    let rank = numerical_rank(&s);
    v.columns(rank, n - rank).into_owned()
}

pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return f64::INFINITY;
    }
    svd(a).1.into_iter().fold(f64::INFINITY, f64::min)
}

/// Global minimizer of a strictly convex QP by enumerating every activity
/// pattern (each row inactive, at its lower or at its upper bound), solving
/// the equality-constrained KKT system and keeping the best feasible point.
pub fn brute_force_qp(problem: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = problem.n();
    let m = problem.m();
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut pattern = vec![0u8; m];
    loop {
        let active: Vec<(usize, f64)> = pattern
            .iter()
            .enumerate()
            .filter_map(|(k, &s)| match s {
                1 => Some((k, problem.lower[k])),
                2 => Some((k, problem.upper[k])),
                _ => None,
            })
            .collect();
        if active.iter().all(|(_, v)| v.is_finite()) && active.len() <= n {
            let size = n + active.len();
            let mut kkt = DMatrix::zeros(size, size);
            let mut rhs = DVector::zeros(size);
            kkt.view_mut((0, 0), (n, n)).copy_from(&problem.h);
            rhs.rows_mut(0, n).copy_from(&(-&problem.g));
            for (r, &(k, value)) in active.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + r, j)] = problem.a[(k, j)];
                    kkt[(j, n + r)] = problem.a[(k, j)];
                }
                rhs[n + r] = value;
            }
            if let Some(sol) = kkt.lu().solve(&rhs) {
                let z = sol.rows(0, n).into_owned();
                let gz = &problem.a * &z;
                let feasible =
                    (0..m).all(|k| gz[k] >= problem.lower[k] - 1e-10 && gz[k] <= problem.upper[k] + 1e-10);
                if feasible {
                    let f = problem.objective(&z);
                    if best.as_ref().is_none_or(|b| f < b.1) {
                        best = Some((z, f));
                    }
                }
            }
        }
        // Next pattern in base 3.
        let mut k = 0;
        loop {
            if k == m {
                return best;
            }
            pattern[k] += 1;
            if pattern[k] == 3 {
                pattern[k] = 0;
                k += 1;
            } else {
                break;
            }
        }
    }
}

/// Random strictly convex QP with `n` variables and `m` two-sided rows.
/// Some bounds are one-sided or equalities; the feasible set always
/// contains a random interior point.
pub fn random_qp(rng: &mut StdRng, n: usize, m: usize) -> QpProblem {
    let root = random_matrix(rng, n, n);
    let h = root.transpose() * &root + DMatrix::identity(n, n) * 0.1;
    let g = random_vector(rng, n) * 3.0;
    let a = random_matrix(rng, m, n);
    let anchor = random_vector(rng, n);
    let at = &a * &anchor;
    let mut lower = DVector::zeros(m);
    let mut upper = DVector::zeros(m);
    for k in 0..m {
        let kind = rng.gen_range(0..8);
        let lo = at[k] - rng.gen_range(0.0..0.5);
        let hi = at[k] + rng.gen_range(0.0..0.5);
        (lower[k], upper[k]) = match kind {
            0 => (f64::NEG_INFINITY, hi),
            1 => (lo, f64::INFINITY),
            2 => (at[k], at[k]),
            _ => (lo, hi),
        };
    }
    QpProblem { h, g, a, lower, upper }
}

/// Random binary, column-monotone priority matrix; every task switches on
/// at some level in `1..=n_levels` and every level receives a task when
/// `n_tasks ≥ n_levels`.
pub fn random_binary_psi(rng: &mut StdRng, n_levels: usize, n_tasks: usize) -> PriorityMatrix {
    let mut first: Vec<usize> = (0..n_tasks).map(|j| j % n_levels).collect();
    for j in n_levels..n_tasks {
        first[j] = rng.gen_range(0..n_levels);
    }
    for j in (1..n_tasks).rev() {
        let k = rng.gen_range(0..=j);
        first.swap(j, k);
    }
    let values = DMatrix::from_fn(n_levels, n_tasks, |i, j| if i >= first[j] { 1.0 } else { 0.0 });
    PriorityMatrix::from_matrix(values)
}

pub fn random_library(rng: &mut StdRng, n: usize, dims: &[usize]) -> TaskLibrary {
    let tasks = dims
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            Task::unweighted(
                j as u32 + 1,
                format!("t{}", j + 1),
                random_matrix(rng, d, n),
                random_vector(rng, d),
            )
            .unwrap()
        })
        .collect();
    TaskLibrary::new(n, tasks, Vec::new()).unwrap()
}

pub fn with_constraints(library: &TaskLibrary, constraints: Vec<Constraint>) -> TaskLibrary {
    TaskLibrary::new(library.n(), library.tasks().to_vec(), constraints).unwrap()
}

/// Stack of the tasks first selected at `level` (binary `psi`).
fn newly_active(psi: &PriorityMatrix, library: &TaskLibrary, level: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = library.n();
    let columns: Vec<usize> = (0..psi.n_tasks())
        .filter(|&j| {
            let above = if level == 0 { 0.0 } else { psi.values()[(level - 1, j)] };
            psi.values()[(level, j)] == 1.0 && above == 0.0
        })
        .collect();
    let rows: usize = columns.iter().map(|&j| library.task(j).dim()).sum();
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let mut r = 0;
    for &j in &columns {
        let t = library.task(j);
        a.rows_mut(r, t.dim()).copy_from(&t.a);
        b.rows_mut(r, t.dim()).copy_from(&t.b);
        r += t.dim();
    }
    (a, b)
}

/// Per-level `(A_i Z_i)` of the nested null-space recursion, for
/// conditioning checks.
pub fn nested_level_maps(psi: &PriorityMatrix, library: &TaskLibrary) -> Vec<DMatrix<f64>> {
    let n = library.n();
    let mut z = DMatrix::identity(n, n);
    let mut out = Vec::new();
    for level in 0..psi.n_levels() {
        let (a, _) = newly_active(psi, library, level);
        let az = &a * &z;
        out.push(az.clone());
        if z.ncols() > 0 && a.nrows() > 0 {
            z = &z * nullspace_basis(&az);
        }
    }
    out
}

/// Lexicographic least squares without constraints: solve each level in
/// the null space of everything above it, with an explicit SVD null-space
/// basis and min-norm solutions.
pub fn nested_nullspace(psi: &PriorityMatrix, library: &TaskLibrary) -> DVector<f64> {
    let n = library.n();
    let mut x = DVector::zeros(n);
    let mut z = DMatrix::identity(n, n);
    for level in 0..psi.n_levels() {
        let (a, b) = newly_active(psi, library, level);
        if a.nrows() == 0 || z.ncols() == 0 {
            continue;
        }
        let az = &a * &z;
        let y = pinv(&az) * (&b - &a * &x);
        x += &z * y;
        z = &z * nullspace_basis(&az);
    }
    x
}
