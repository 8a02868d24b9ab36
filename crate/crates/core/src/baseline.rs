//! Classical strict-hierarchy HQP.
//!
//! Each level is solved in explicit null-space coordinates of every task
//! already fully in the upper levels: `x = x* + Z y` with `Z` an orthonormal
//! null-space basis from a singular value decomposition. Only binary
//! priority matrices are accepted. This is the reference the recursive
//! projection must reproduce on strict hierarchies.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hqp::{
    check_constraint_levels, solve_level, HierarchySolution, LevelDiagnostics, LevelInput,
    SolverConfig,
};
use crate::projection::null_space_basis_svd;
use crate::task_model::{
    select_level_tasks, sort_descending, validate_priority_matrix, PriorityMatrix, TaskLibrary,
};

fn require_binary(psi: &PriorityMatrix) -> Result<()> {
    for level in 1..=psi.n_levels() {
        for task in 0..psi.n_tasks() {
            let value = psi.alpha(level, task);
            if value != 0.0 && value != 1.0 {
                return Err(Error::NonBinaryPriority { level, task, value });
            }
        }
    }
    Ok(())
}

/// Stacked matrices of the tasks with `α_{level, j} = 1`.
fn upper_stack(psi: &PriorityMatrix, library: &TaskLibrary, level: usize) -> DMatrix<f64> {
    let columns: Vec<usize> = (0..psi.n_tasks())
        .filter(|&j| psi.alpha(level, j) == 1.0)
        .collect();
    let rows: usize = columns.iter().map(|&j| library.task(j).dim()).sum();
    let mut a = DMatrix::zeros(rows, library.n());
    let mut offset = 0;
    for &j in &columns {
        let d = library.task(j).dim();
        a.rows_mut(offset, d).copy_from(&library.task(j).a);
        offset += d;
    }
    a
}

/// Solves a binary hierarchy by nested null-space least squares.
pub fn solve_strict_hierarchy(
    psi: &PriorityMatrix,
    library: &TaskLibrary,
    config: &SolverConfig,
) -> Result<HierarchySolution> {
    config.validate()?;
    validate_priority_matrix(psi, library)?;
    require_binary(psi)?;
    check_constraint_levels(psi, library)?;

    let n = library.n();
    let mut slacks: Vec<Option<DVector<f64>>> = vec![None; library.constraints().len()];
    let mut levels = Vec::with_capacity(psi.n_levels() + 1);
    let mut x = DVector::zeros(n);
    let mut basis = DMatrix::identity(n, n);

    if library.constraints().iter().any(|c| c.level == 0) {
        let start = Instant::now();
        let (empty_a, empty_b, empty_w) = (DMatrix::zeros(0, n), DVector::zeros(0), DMatrix::zeros(0, 0));
        let out = solve_level(
            LevelInput {
                level: 0,
                a: &empty_a,
                b: &empty_b,
                w: &empty_w,
                occupation: DVector::zeros(0),
                map: &basis,
                x_prev: &x,
            },
            library,
            &mut slacks,
            config,
        )?;
        x = out.x;
        levels.push(LevelDiagnostics {
            level: 0,
            p: DMatrix::identity(n, n),
            u: out.u,
            v: out.v,
            x: x.clone(),
            task_residuals: Vec::new(),
            rank: 0,
            qp_iterations: out.iterations,
            kkt: out.kkt,
            solve_time: start.elapsed(),
        });
    }

    for level in 1..=psi.n_levels() {
        let start = Instant::now();
        let selected = select_level_tasks(psi, level);
        let stack = sort_descending(&selected, psi, level, library);
        let out = solve_level(
            LevelInput {
                level,
                a: &stack.a,
                b: &stack.b,
                w: &stack.w,
                occupation: DVector::from_element(stack.rows(), 1.0),
                map: &basis,
                x_prev: &x,
            },
            library,
            &mut slacks,
            config,
        )?;
        x = out.x;
        let next = null_space_basis_svd(&upper_stack(psi, library, level), config.rank_tol)?;
        let solve_time = start.elapsed();
        let task_residuals = stack
            .order
            .iter()
            .map(|&j| (j, library.task(j).residual(&x)))
            .collect();
        levels.push(LevelDiagnostics {
            level,
            p: &next * next.transpose(),
            u: &basis * &out.u,
            v: out.v,
            x: x.clone(),
            task_residuals,
            rank: n - next.ncols(),
            qp_iterations: out.iterations,
            kkt: out.kkt,
            solve_time,
        });
        basis = next;
    }

    Ok(HierarchySolution {
        x,
        levels,
        slacks: slacks
            .into_iter()
            .zip(library.constraints())
            .map(|(s, c)| s.unwrap_or_else(|| DVector::zeros(c.rows())))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_model::Task;

    #[test]
    fn rejects_fractional_priorities() {
        let t = Task::unweighted(1, "t", DMatrix::identity(1, 2), DVector::zeros(1)).unwrap();
        let lib = TaskLibrary::new(2, vec![t], vec![]).unwrap();
        let psi = PriorityMatrix::from_rows(&[vec![0.5]]).unwrap();
        assert!(matches!(
            solve_strict_hierarchy(&psi, &lib, &SolverConfig::default()),
            Err(Error::NonBinaryPriority { level: 1, task: 0, .. })
        ));
    }

    #[test]
    fn second_level_uses_remaining_freedom() {
        // Level 1 fixes x0 + x1 = 2; level 2 wants x0 = 0.
        let t1 = Task::unweighted(1, "sum", DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 2.0)).unwrap();
        let t2 = Task::unweighted(2, "first", DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DVector::zeros(1)).unwrap();
        let lib = TaskLibrary::new(2, vec![t1, t2], vec![]).unwrap();
        let psi = PriorityMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let sol = solve_strict_hierarchy(&psi, &lib, &SolverConfig::default()).unwrap();
        assert!((sol.x[0]).abs() < 1e-6);
        assert!((sol.x[1] - 2.0).abs() < 1e-6);
    }
}
