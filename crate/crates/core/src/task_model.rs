//! Task library and priority matrix.
//!
//! A hierarchy is described by a priority matrix with one row per level and
//! one column per library task. Entry `(i, j)` is the degree to which task `j`
//! occupies degrees of freedom for the tasks below level `i`: `0` means the
//! task is absent from the upper `i` levels, `1` means lower levels are solved
//! strictly in its null space, and values in between describe a task that is
//! being inserted or removed.
//!
//! Levels are numbered from 1. Level 0 is the empty hierarchy, i.e. every
//! entry of the (virtual) row 0 is zero.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalue floor used when checking task weights for definiteness.
const SPD_TOLERANCE: f64 = 1e-12;

/// An equality task `A x = b` weighted by `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: u32,
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub w: DMatrix<f64>,
}

impl Task {
    pub fn new(
        id: u32,
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        w: DMatrix<f64>,
    ) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidTask { id, reason };
        if a.nrows() == 0 {
            return Err(invalid("task matrix has no rows".into()));
        }
        if b.len() != a.nrows() {
            return Err(invalid(format!(
                "target has {} entries, task matrix has {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if w.nrows() != a.nrows() || w.ncols() != a.nrows() {
            return Err(invalid(format!(
                "weight is {}x{}, expected {}x{}",
                w.nrows(),
                w.ncols(),
                a.nrows(),
                a.nrows()
            )));
        }
        if !is_symmetric_positive_definite(&w) {
            return Err(invalid("weight is not symmetric positive definite".into()));
        }
        Ok(Task {
            id,
            name: name.into(),
            a,
            b,
            w,
        })
    }

    /// Task with an identity weight.
    pub fn unweighted(
        id: u32,
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let w = DMatrix::identity(a.nrows(), a.nrows());
        Task::new(id, name, a, b, w)
    }

    /// Row count `d_s`.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    /// Velocity-level residual `‖A x − b‖₂`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).norm()
    }
}

fn is_symmetric_positive_definite(w: &DMatrix<f64>) -> bool {
    let scale = w.amax().max(1.0);
    if (w - w.transpose()).amax() > 1e-12 * scale {
        return false;
    }
    let eig = w.clone().symmetric_eigen();
    eig.eigenvalues.iter().all(|&l| l > SPD_TOLERANCE)
}

/// Two-sided inequality `lower ≤ C x ≤ upper`, enforced from `level` down.
///
/// Level 0 is a constraint-only pre-level solved before any task: its
/// slacks are minimized first and then frozen, so a constraint that is
/// satisfiable by `x = 0` becomes hard for every task level.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub id: u32,
    pub c: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub level: usize,
}

impl Constraint {
    pub fn new(
        id: u32,
        c: DMatrix<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
        level: usize,
    ) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidConstraint { id, reason };
        if lower.len() != c.nrows() || upper.len() != c.nrows() {
            return Err(invalid(format!(
                "bounds have {}/{} entries, matrix has {} rows",
                lower.len(),
                upper.len(),
                c.nrows()
            )));
        }
        if let Some(k) = (0..c.nrows()).find(|&k| !(lower[k] <= upper[k])) {
            return Err(invalid(format!(
                "row {k}: lower bound {} exceeds upper bound {}",
                lower[k], upper[k]
            )));
        }
        Ok(Constraint {
            id,
            c,
            lower,
            upper,
            level,
        })
    }

    pub fn rows(&self) -> usize {
        self.c.nrows()
    }

    /// Largest bound violation of `C x`, zero when satisfied.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let cx = &self.c * x;
        (0..cx.len())
            .map(|k| (self.lower[k] - cx[k]).max(cx[k] - self.upper[k]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Tasks and constraints over a common set of `n` optimization variables.
///
/// Task `j` of the library is column `j` of every priority matrix used with
/// it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaskLibrary {
    tasks: Vec<Task>,
    constraints: Vec<Constraint>,
    n: usize,
}

impl TaskLibrary {
    pub fn new(n: usize, tasks: Vec<Task>, constraints: Vec<Constraint>) -> Result<Self> {
        for task in &tasks {
            if task.ncols() != n {
                return Err(Error::Dimension(format!(
                    "task {} has {} columns, library has {n} variables",
                    task.id,
                    task.ncols()
                )));
            }
        }
        for (k, task) in tasks.iter().enumerate() {
            if tasks[..k].iter().any(|t| t.id == task.id) {
                return Err(Error::InvalidTask {
                    id: task.id,
                    reason: "duplicate task id".into(),
                });
            }
        }
        for con in &constraints {
            if con.c.ncols() != n {
                return Err(Error::Dimension(format!(
                    "constraint {} has {} columns, library has {n} variables",
                    con.id,
                    con.c.ncols()
                )));
            }
        }
        Ok(TaskLibrary {
            tasks,
            constraints,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn task(&self, column: usize) -> &Task {
        &self.tasks[column]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Which validity rule a priority matrix breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorityRule {
    /// Entry outside `[0, 1]` (or not finite).
    Range,
    /// Entry smaller than the one above it in the same column.
    Monotone,
}

/// First offending entry, with a 1-based level and 0-based task column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorityViolation {
    pub level: usize,
    pub task: usize,
    pub rule: PriorityRule,
}

impl fmt::Display for PriorityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = match self.rule {
            PriorityRule::Range => "value outside [0, 1]",
            PriorityRule::Monotone => "column decreases down the hierarchy",
        };
        write!(f, "{rule} at level {}, task {}", self.level, self.task)
    }
}

/// The `n_l × n_t` priority matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorityMatrix {
    values: DMatrix<f64>,
}

impl PriorityMatrix {
    /// Wraps a matrix without validating it; see [`PriorityMatrix::validate`].
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        PriorityMatrix { values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_t) {
            return Err(Error::Dimension("priority matrix rows differ in length".into()));
        }
        Ok(PriorityMatrix {
            values: DMatrix::from_fn(rows.len(), n_t, |i, j| rows[i][j]),
        })
    }

    pub fn zeros(n_levels: usize, n_tasks: usize) -> Self {
        PriorityMatrix {
            values: DMatrix::zeros(n_levels, n_tasks),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_tasks(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `α_{level, task}` with `α_{0, ·} = 0`.
    pub fn alpha(&self, level: usize, task: usize) -> f64 {
        if level == 0 {
            0.0
        } else {
            self.values[(level - 1, task)]
        }
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&a| a == 0.0 || a == 1.0)
    }

    /// Checks the range and column-monotonicity rules, reporting the first
    /// violation in row-major order.
    pub fn validate(&self) -> std::result::Result<(), PriorityViolation> {
        for level in 1..=self.n_levels() {
            for task in 0..self.n_tasks() {
                let a = self.alpha(level, task);
                if !(0.0..=1.0).contains(&a) {
                    return Err(PriorityViolation {
                        level,
                        task,
                        rule: PriorityRule::Range,
                    });
                }
                if a < self.alpha(level - 1, task) {
                    return Err(PriorityViolation {
                        level,
                        task,
                        rule: PriorityRule::Monotone,
                    });
                }
            }
        }
        Ok(())
    }

    /// Max-norm distance between two matrices of equal shape.
    pub fn max_abs_diff(&self, other: &PriorityMatrix) -> f64 {
        (&self.values - &other.values).amax()
    }
}

/// Validates `psi` against the shape of `library` and the priority rules.
pub fn validate_priority_matrix(psi: &PriorityMatrix, library: &TaskLibrary) -> Result<()> {
    if psi.n_tasks() != library.len() {
        return Err(Error::Dimension(format!(
            "priority matrix has {} columns, library has {} tasks",
            psi.n_tasks(),
            library.len()
        )));
    }
    psi.validate().map_err(Error::Priority)
}

/// Task columns solved at `level`: those whose priority value changes from
/// the level above. Returned in ascending column order.
pub fn select_level_tasks(psi: &PriorityMatrix, level: usize) -> Vec<usize> {
    (0..psi.n_tasks())
        .filter(|&j| psi.alpha(level, j) != psi.alpha(level - 1, j))
        .collect()
}

/// The sorted, stacked tasks of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStack {
    /// Task columns ordered by descending priority value.
    pub order: Vec<usize>,
    /// Row count of each task in `order`.
    pub dims: Vec<usize>,
    /// Priority value of each task in `order`.
    pub alphas: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Block-diagonal weight of the stacked rows.
    pub w: DMatrix<f64>,
}

impl LevelStack {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Diagonal of the full occupation matrix: each task's priority value
    /// repeated over its rows.
    pub fn row_alphas(&self) -> DVector<f64> {
        let alphas: Vec<f64> = self
            .dims
            .iter()
            .zip(&self.alphas)
            .flat_map(|(&d, &a)| std::iter::repeat_n(a, d))
            .collect();
        DVector::from_vec(alphas)
    }
}

/// Orders `tasks` by descending `α_{level, j}` (ties by ascending task id)
/// and stacks their matrices, targets, and weights.
pub fn sort_descending(
    tasks: &[usize],
    psi: &PriorityMatrix,
    level: usize,
    library: &TaskLibrary,
) -> LevelStack {
    let mut order = tasks.to_vec();
    order.sort_by(|&x, &y| {
        psi.alpha(level, y)
            .total_cmp(&psi.alpha(level, x))
            .then(library.task(x).id.cmp(&library.task(y).id))
    });

    let dims: Vec<usize> = order.iter().map(|&j| library.task(j).dim()).collect();
    let rows: usize = dims.iter().sum();
    let n = library.n();
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let mut w = DMatrix::zeros(rows, rows);
    let mut offset = 0;
    for &j in &order {
        let task = library.task(j);
        let d = task.dim();
        a.rows_mut(offset, d).copy_from(&task.a);
        b.rows_mut(offset, d).copy_from(&task.b);
        w.view_mut((offset, offset), (d, d)).copy_from(&task.w);
        offset += d;
    }
    let alphas = order.iter().map(|&j| psi.alpha(level, j)).collect();
    LevelStack {
        order,
        dims,
        alphas,
        a,
        b,
        w,
    }
}
