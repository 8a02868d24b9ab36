//! Level-by-level hierarchical QP with recursive hierarchical projection.
//!
//! Level `i` solves, over `u` and the slacks `v` of the constraints first
//! enforced at level `i`,
//!
//! ```text
//! min ‖A (x* + P u) − b̂‖²_Ŵ + ‖v‖² + ε‖u‖²
//! s.t. d̲ ≤ C (x* + P u) + v ≤ d̄          (level-i constraints)
//!      d̲ ≤ C_k (x* + P u) + v*_k ≤ d̄     (constraints of levels k < i)
//! ```
//!
//! with `x*` and `P` from the level above, `Ŵ = Λ W`, and
//! `b̂ = Λ b + (I − Λ) A x*`. The level result is `x*_i = x* + P u*`.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::projection::{compute_rhp, DEFAULT_RANK_TOL};
use crate::qp::{solve_qp, KktResiduals, QpProblem, QpSettings, QpStatus};
use crate::task_model::{validate_priority_matrix, Constraint, PriorityMatrix, TaskLibrary};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Weight `ε` of the `ε‖u‖²` term added to every level.
    pub regularization: f64,
    pub qp_tolerance: f64,
    pub max_qp_iterations: usize,
    /// Relative rank tolerance for row selection and pseudoinverses.
    pub rank_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            regularization: 1e-8,
            qp_tolerance: 1e-9,
            max_qp_iterations: 1000,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.regularization > 0.0) {
            return Err(Error::Config("regularization must be positive".into()));
        }
        if !(self.qp_tolerance > 0.0) {
            return Err(Error::Config("qp_tolerance must be positive".into()));
        }
        if !(self.rank_tol > 0.0) {
            return Err(Error::Config("rank_tol must be positive".into()));
        }
        if self.max_qp_iterations == 0 {
            return Err(Error::Config("max_qp_iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn qp_settings(&self) -> QpSettings {
        QpSettings {
            tolerance: self.qp_tolerance,
            max_iterations: self.max_qp_iterations,
        }
    }
}

/// `Λ b + (I − Λ) A x_prev`, with `Λ` given by its full per-row diagonal.
pub fn shifted_target(
    occupation: &DVector<f64>,
    b: &DVector<f64>,
    a: &DMatrix<f64>,
    x_prev: &DVector<f64>,
) -> DVector<f64> {
    let ax = a * x_prev;
    DVector::from_fn(b.len(), |k, _| {
        occupation[k] * b[k] + (1.0 - occupation[k]) * ax[k]
    })
}

/// A constraint of an upper level together with its frozen slack.
#[derive(Clone, Copy, Debug)]
pub struct FrozenConstraint<'a> {
    pub constraint: &'a Constraint,
    pub slack: &'a DVector<f64>,
}

/// Data of one level's QP.
///
/// `p_prev` maps the level variable into the accumulated solution,
/// `x = x_prev + p_prev · u`. For the recursive projection it is the square
/// projector of the upper levels; any `n × k` map works.
#[derive(Clone, Debug)]
pub struct LevelProblem<'a> {
    pub a: &'a DMatrix<f64>,
    pub b_hat: DVector<f64>,
    pub w_hat: DMatrix<f64>,
    pub p_prev: &'a DMatrix<f64>,
    pub x_prev: &'a DVector<f64>,
    /// Constraints first enforced at this level; each gets a slack.
    pub constraints: Vec<&'a Constraint>,
    pub frozen: Vec<FrozenConstraint<'a>>,
}

impl LevelProblem<'_> {
    fn slack_count(&self) -> usize {
        self.constraints.iter().map(|c| c.rows()).sum()
    }
}

/// Assembles the level QP over `z = (u, v)`.
///
/// Objective `½ zᵀ H z + gᵀ z` with
/// `H = [(A P)ᵀ Ŵ (A P) + εI, 0; 0, I]` and `g = [(A P)ᵀ Ŵ (A x_prev − b̂); 0]`,
/// which is half the level cost up to a constant.
pub fn build_level_qp(problem: &LevelProblem<'_>, config: &SolverConfig) -> Result<QpProblem> {
    let n = problem.x_prev.len();
    let k = problem.p_prev.ncols();
    let rows = problem.a.nrows();
    if problem.p_prev.nrows() != n {
        return Err(Error::Dimension(format!(
            "level map has {} rows, solution has {n} entries",
            problem.p_prev.nrows()
        )));
    }
    if problem.a.ncols() != n
        || problem.b_hat.len() != rows
        || problem.w_hat.shape() != (rows, rows)
    {
        return Err(Error::Dimension(format!(
            "task stack {}x{} with {} targets and {}x{} weight for {n} variables",
            rows,
            problem.a.ncols(),
            problem.b_hat.len(),
            problem.w_hat.nrows(),
            problem.w_hat.ncols()
        )));
    }
    for c in problem
        .constraints
        .iter()
        .copied()
        .chain(problem.frozen.iter().map(|f| f.constraint))
    {
        if c.c.ncols() != n {
            return Err(Error::Dimension(format!(
                "constraint {} has {} columns, expected {n}",
                c.id,
                c.c.ncols()
            )));
        }
    }
    for f in &problem.frozen {
        if f.slack.len() != f.constraint.rows() {
            return Err(Error::Dimension(format!(
                "frozen slack of constraint {} has {} entries, expected {}",
                f.constraint.id,
                f.slack.len(),
                f.constraint.rows()
            )));
        }
    }

    let slacks = problem.slack_count();
    let dim = k + slacks;
    let m = problem.a * problem.p_prev;
    let w = (&problem.w_hat + problem.w_hat.transpose()) * 0.5;
    let mw = m.tr_mul(&w);
    let mut h = DMatrix::zeros(dim, dim);
    let mut huu = &mw * &m;
    for d in 0..k {
        huu[(d, d)] += config.regularization;
    }
    h.view_mut((0, 0), (k, k)).copy_from(&huu);
    for d in k..dim {
        h[(d, d)] = 1.0;
    }
    let residual = problem.a * problem.x_prev - &problem.b_hat;
    let mut g = DVector::zeros(dim);
    g.rows_mut(0, k).copy_from(&(&mw * residual));

    let frozen_rows: usize = problem.frozen.iter().map(|f| f.constraint.rows()).sum();
    let total = slacks + frozen_rows;
    let mut a = DMatrix::zeros(total, dim);
    let mut lower = DVector::zeros(total);
    let mut upper = DVector::zeros(total);
    let mut row = 0;
    let mut slack_col = k;
    for c in &problem.constraints {
        let rows = c.rows();
        let cx = &c.c * problem.x_prev;
        a.view_mut((row, 0), (rows, k)).copy_from(&(&c.c * problem.p_prev));
        for r in 0..rows {
            a[(row + r, slack_col + r)] = 1.0;
        }
        lower.rows_mut(row, rows).copy_from(&(&c.lower - &cx));
        upper.rows_mut(row, rows).copy_from(&(&c.upper - &cx));
        row += rows;
        slack_col += rows;
    }
    for f in &problem.frozen {
        let c = f.constraint;
        let rows = c.rows();
        let offset = &c.c * problem.x_prev + f.slack;
        a.view_mut((row, 0), (rows, k)).copy_from(&(&c.c * problem.p_prev));
        // The level above met these rows only up to its QP tolerance; u = 0
        // must stay feasible or a level with few free directions can be
        // declared infeasible over rounding.
        lower
            .rows_mut(row, rows)
            .copy_from(&(&c.lower - &offset).map(|v| v.min(0.0)));
        upper
            .rows_mut(row, rows)
            .copy_from(&(&c.upper - &offset).map(|v| v.max(0.0)));
        row += rows;
    }

    Ok(QpProblem {
        h,
        g,
        a,
        lower,
        upper,
    })
}

/// `x_prev + P_prev u`.
pub fn accumulate(x_prev: &DVector<f64>, p_prev: &DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
    x_prev + p_prev * u
}

/// Per-level record of a hierarchy solve.
#[derive(Clone, Debug)]
pub struct LevelDiagnostics {
    pub level: usize,
    /// Projector of the upper `level` levels.
    pub p: DMatrix<f64>,
    pub u: DVector<f64>,
    /// Slacks of the constraints first enforced at this level, stacked.
    pub v: DVector<f64>,
    pub x: DVector<f64>,
    /// `(task column, ‖A x − b‖)` for each task solved at this level.
    pub task_residuals: Vec<(usize, f64)>,
    /// Number of rows retained by the projection.
    pub rank: usize,
    pub qp_iterations: usize,
    pub kkt: KktResiduals,
    pub solve_time: Duration,
}

#[derive(Clone, Debug)]
pub struct HierarchySolution {
    pub x: DVector<f64>,
    pub levels: Vec<LevelDiagnostics>,
    /// Frozen slack of every library constraint, in library order.
    pub slacks: Vec<DVector<f64>>,
}

impl HierarchySolution {
    pub fn total_qp_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.qp_iterations).sum()
    }

    pub fn total_time(&self) -> Duration {
        self.levels.iter().map(|l| l.solve_time).sum()
    }

    /// Largest KKT residual over all levels.
    pub fn max_kkt(&self) -> f64 {
        self.levels.iter().map(|l| l.kkt.max()).fold(0.0, f64::max)
    }
}

pub(crate) fn check_constraint_levels(psi: &PriorityMatrix, library: &TaskLibrary) -> Result<()> {
    if let Some(c) = library
        .constraints()
        .iter()
        .find(|c| c.level > psi.n_levels())
    {
        return Err(Error::InvalidConstraint {
            id: c.id,
            reason: format!(
                "assigned to level {} of a {}-level hierarchy",
                c.level,
                psi.n_levels()
            ),
        });
    }
    Ok(())
}

/// Solves one level given its stacked tasks and the upper-level state, and
/// records the new slacks into `slacks`.
pub(crate) struct LevelInput<'a> {
    pub level: usize,
    pub a: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    pub w: &'a DMatrix<f64>,
    /// Full per-row occupation diagonal.
    pub occupation: DVector<f64>,
    pub map: &'a DMatrix<f64>,
    pub x_prev: &'a DVector<f64>,
}

pub(crate) struct LevelOutput {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub x: DVector<f64>,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

pub(crate) fn solve_level(
    input: LevelInput<'_>,
    library: &TaskLibrary,
    slacks: &mut [Option<DVector<f64>>],
    config: &SolverConfig,
) -> Result<LevelOutput> {
    let level = input.level;
    let new: Vec<usize> = (0..library.constraints().len())
        .filter(|&k| library.constraints()[k].level == level)
        .collect();
    let k = input.map.ncols();

    if input.a.nrows() == 0 && new.is_empty() {
        return Ok(LevelOutput {
            u: DVector::zeros(k),
            v: DVector::zeros(0),
            x: input.x_prev.clone(),
            iterations: 0,
            kkt: KktResiduals::default(),
        });
    }

    let b_hat = shifted_target(&input.occupation, input.b, input.a, input.x_prev);
    let w_hat = DMatrix::from_fn(input.w.nrows(), input.w.ncols(), |r, c| {
        input.occupation[r] * input.w[(r, c)]
    });
    let frozen: Vec<FrozenConstraint<'_>> = library
        .constraints()
        .iter()
        .zip(slacks.iter())
        .filter_map(|(c, s)| {
            s.as_ref().map(|slack| FrozenConstraint {
                constraint: c,
                slack,
            })
        })
        .collect();
    let problem = LevelProblem {
        a: input.a,
        b_hat,
        w_hat,
        p_prev: input.map,
        x_prev: input.x_prev,
        constraints: new.iter().map(|&k| &library.constraints()[k]).collect(),
        frozen,
    };
    let qp = build_level_qp(&problem, config)?;
    let sol = solve_qp(&qp, &config.qp_settings())?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::Qp {
            level,
            status: sol.status,
            iterations: sol.iterations,
            detail: format!(
                "{} variables, {} constraint rows, primal residual {:e}",
                qp.n(),
                qp.m(),
                sol.kkt.primal
            ),
        });
    }
    let u = sol.z.rows(0, k).into_owned();
    let v = sol.z.rows(k, sol.z.len() - k).into_owned();
    let mut offset = 0;
    for &c in &new {
        let rows = library.constraints()[c].rows();
        slacks[c] = Some(v.rows(offset, rows).into_owned());
        offset += rows;
    }
    let x = accumulate(input.x_prev, input.map, &u);
    Ok(LevelOutput {
        u,
        v,
        x,
        iterations: sol.iterations,
        kkt: sol.kkt,
    })
}

/// Runs the full recursion: projection update, level QP, accumulation, for
/// every level of `psi`.
///
/// Constraints assigned to level 0 are handled by a task-free pre-level
/// before level 1.
pub fn solve_hierarchy(
    psi: &PriorityMatrix,
    library: &TaskLibrary,
    config: &SolverConfig,
) -> Result<HierarchySolution> {
    config.validate()?;
    validate_priority_matrix(psi, library)?;
    check_constraint_levels(psi, library)?;
    let n = library.n();
    let mut slacks: Vec<Option<DVector<f64>>> = vec![None; library.constraints().len()];
    let mut levels = Vec::with_capacity(psi.n_levels() + 1);
    let mut p_prev = DMatrix::identity(n, n);
    let mut x = DVector::zeros(n);

    if library.constraints().iter().any(|c| c.level == 0) {
        let start = Instant::now();
        let empty_a = DMatrix::zeros(0, n);
        let empty_b = DVector::zeros(0);
        let empty_w = DMatrix::zeros(0, 0);
        let out = solve_level(
            LevelInput {
                level: 0,
                a: &empty_a,
                b: &empty_b,
                w: &empty_w,
                occupation: DVector::zeros(0),
                map: &p_prev,
                x_prev: &x,
            },
            library,
            &mut slacks,
            config,
        )
        .map_err(|e| level_error(e, 0))?;
        x = out.x;
        levels.push(LevelDiagnostics {
            level: 0,
            p: p_prev.clone(),
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
        let rhp = compute_rhp(psi, library, level, &p_prev, config.rank_tol)
            .map_err(|e| level_error(e, level))?;
        let out = solve_level(
            LevelInput {
                level,
                a: &rhp.stack.a,
                b: &rhp.stack.b,
                w: &rhp.stack.w,
                occupation: rhp.stack.row_alphas(),
                map: &p_prev,
                x_prev: &x,
            },
            library,
            &mut slacks,
            config,
        )
        .map_err(|e| level_error(e, level))?;
        let solve_time = start.elapsed();
        x = out.x;
        let task_residuals = rhp
            .stack
            .order
            .iter()
            .map(|&j| (j, library.task(j).residual(&x)))
            .collect();
        levels.push(LevelDiagnostics {
            level,
            p: rhp.p.clone(),
            u: out.u,
            v: out.v,
            x: x.clone(),
            task_residuals,
            rank: rhp.basis.rank(),
            qp_iterations: out.iterations,
            kkt: out.kkt,
            solve_time,
        });
        p_prev = rhp.p;
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

/// Attaches the level to QP failures raised below it.
fn level_error(err: Error, level: usize) -> Error {
    match err {
        Error::Qp {
            status,
            iterations,
            detail,
            ..
        } => Error::Qp {
            level,
            status,
            iterations,
            detail,
        },
        Error::NotPositiveDefinite => Error::Qp {
            level,
            status: QpStatus::Infeasible,
            iterations: 0,
            detail: "level Hessian is not positive definite".into(),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_model::Task;

    fn v(data: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(data)
    }

    #[test]
    fn shifted_target_examples() {
        let a = DMatrix::identity(2, 2);
        let b = v(&[2.0, 0.0]);
        let x = v(&[0.0, 2.0]);
        assert_eq!(shifted_target(&v(&[1.0, 1.0]), &b, &a, &x), b);
        assert_eq!(shifted_target(&v(&[0.0, 0.0]), &b, &a, &x), x);
        assert_eq!(shifted_target(&v(&[0.5, 0.5]), &b, &a, &x), v(&[1.0, 1.0]));
    }

    #[test]
    fn accumulate_examples() {
        let p = DMatrix::from_diagonal(&v(&[0.0, 1.0]));
        assert_eq!(accumulate(&v(&[1.0, 1.0]), &p, &v(&[5.0, 2.0])), v(&[1.0, 3.0]));
        assert_eq!(
            accumulate(&v(&[1.0, 1.0]), &DMatrix::zeros(2, 2), &v(&[5.0, 2.0])),
            v(&[1.0, 1.0])
        );
        assert_eq!(
            accumulate(&v(&[1.0, 1.0]), &DMatrix::identity(2, 2), &v(&[0.0, 0.0])),
            v(&[1.0, 1.0])
        );
    }

    #[test]
    fn unconstrained_level_is_regularized_least_squares() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let b_hat = v(&[1.0, -1.0]);
        let p = DMatrix::identity(3, 3);
        let x0 = DVector::zeros(3);
        let config = SolverConfig::default();
        let problem = LevelProblem {
            a: &a,
            b_hat: b_hat.clone(),
            w_hat: DMatrix::identity(2, 2),
            p_prev: &p,
            x_prev: &x0,
            constraints: vec![],
            frozen: vec![],
        };
        let qp = build_level_qp(&problem, &config).unwrap();
        let sol = solve_qp(&qp, &config.qp_settings()).unwrap();
        // Tikhonov solution from the SVD: sum of σ/(σ² + ε) v uᵀ b.
        let svd = a.clone().svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut expected = DVector::zeros(3);
        for (k, s) in svd.singular_values.iter().enumerate() {
            let coef = s / (s * s + config.regularization) * u.column(k).dot(&b_hat);
            expected += vt.row(k).transpose() * coef;
        }
        // The Hessian has condition number near 1e9, so agreement is at the 1e-7 level.
        assert!((&sol.z - &expected).amax() < 1e-7, "{} vs {}", sol.z, expected);
    }

    #[test]
    fn frozen_slack_offsets_bounds() {
        let c = Constraint::new(
            1,
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v(&[-1.0]),
            v(&[1.0]),
            1,
        )
        .unwrap();
        let slack = v(&[0.1]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let p = DMatrix::identity(2, 2);
        let x0 = v(&[0.2, 0.3]);
        let problem = LevelProblem {
            a: &a,
            b_hat: v(&[0.0]),
            w_hat: DMatrix::identity(1, 1),
            p_prev: &p,
            x_prev: &x0,
            constraints: vec![],
            frozen: vec![FrozenConstraint {
                constraint: &c,
                slack: &slack,
            }],
        };
        let qp = build_level_qp(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(qp.n(), 2);
        assert!((qp.lower[0] - (-1.0 - 0.5 - 0.1)).abs() < 1e-15);
        assert!((qp.upper[0] - (1.0 - 0.5 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn null_map_freezes_solution() {
        let c = Constraint::new(1, DMatrix::identity(2, 2), v(&[-1.0, -1.0]), v(&[1.0, 1.0]), 1)
            .unwrap();
        let a = DMatrix::identity(2, 2);
        let p = DMatrix::zeros(2, 2);
        let x0 = v(&[0.5, 0.0]);
        let problem = LevelProblem {
            a: &a,
            b_hat: v(&[3.0, 3.0]),
            w_hat: DMatrix::identity(2, 2),
            p_prev: &p,
            x_prev: &x0,
            constraints: vec![&c],
            frozen: vec![],
        };
        let qp = build_level_qp(&problem, &SolverConfig::default()).unwrap();
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.z.rows(2, 2).amax() < 1e-12);
        assert_eq!(accumulate(&x0, &p, &sol.z.rows(0, 2).into_owned()), x0);
    }

    #[test]
    fn single_task_single_level() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 2.0, 0.0]);
        let b = v(&[1.0, 2.0]);
        let t = Task::unweighted(1, "t", a.clone(), b.clone()).unwrap();
        let lib = TaskLibrary::new(3, vec![t], vec![]).unwrap();
        let psi = PriorityMatrix::from_rows(&[vec![1.0]]).unwrap();
        let config = SolverConfig::default();
        let sol = solve_hierarchy(&psi, &lib, &config).unwrap();
        let normal = a.transpose() * &a + DMatrix::identity(3, 3) * config.regularization;
        let expected = normal.lu().solve(&(a.transpose() * b)).unwrap();
        assert!((sol.x - expected).amax() < 1e-8);
        assert_eq!(sol.levels.len(), 1);
        assert_eq!(sol.levels[0].rank, 2);
    }

    #[test]
    fn constraint_level_out_of_range() {
        let t = Task::unweighted(1, "t", DMatrix::identity(1, 1), v(&[1.0])).unwrap();
        let c = Constraint::new(1, DMatrix::identity(1, 1), v(&[0.0]), v(&[1.0]), 3).unwrap();
        let lib = TaskLibrary::new(1, vec![t], vec![c]).unwrap();
        let psi = PriorityMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            solve_hierarchy(&psi, &lib, &SolverConfig::default()),
            Err(Error::InvalidConstraint { .. })
        ));
    }

    #[test]
    fn pre_level_constraints_become_hard() {
        // Task wants x = 2, box says |x| <= 1 from level 0.
        let t = Task::unweighted(1, "t", DMatrix::identity(1, 1), v(&[2.0])).unwrap();
        let c = Constraint::new(1, DMatrix::identity(1, 1), v(&[-1.0]), v(&[1.0]), 0).unwrap();
        let lib = TaskLibrary::new(1, vec![t], vec![c]).unwrap();
        let psi = PriorityMatrix::from_rows(&[vec![1.0]]).unwrap();
        let sol = solve_hierarchy(&psi, &lib, &SolverConfig::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert_eq!(sol.levels.len(), 2);
        assert!(sol.slacks[0].amax() < 1e-12);
    }

    #[test]
    fn level_constraints_are_soft() {
        // Same box at level 1 trades slack against task error.
        let t = Task::unweighted(1, "t", DMatrix::identity(1, 1), v(&[2.0])).unwrap();
        let c = Constraint::new(1, DMatrix::identity(1, 1), v(&[-1.0]), v(&[1.0]), 1).unwrap();
        let lib = TaskLibrary::new(1, vec![t], vec![c]).unwrap();
        let psi = PriorityMatrix::from_rows(&[vec![1.0]]).unwrap();
        let sol = solve_hierarchy(&psi, &lib, &SolverConfig::default()).unwrap();
        // min (x-2)^2 + v^2 with x + v = 1 at the bound: x = 1.5, v = -0.5.
        assert!((sol.x[0] - 1.5).abs() < 1e-7);
        assert!((sol.slacks[0][0] + 0.5).abs() < 1e-7);
    }
}
