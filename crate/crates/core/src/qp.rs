//! Dense strictly convex quadratic programs.
//!
//! ```text
//!     minimize     ½ zᵀ H z + gᵀ z
//!     subject to   lower ≤ G z ≤ upper
//! ```
//!
//! `H` must be positive definite. Bounds may be infinite; rows with
//! `lower == upper` are treated as equalities.
//!
//! The reference backend is the dual active-set method of Goldfarb and
//! Idnani: start from the unconstrained minimizer, repeatedly add the most
//! violated constraint, and drop active constraints whose multiplier would
//! turn negative. It needs no feasible starting point and detects
//! infeasibility. Step directions are recomputed from a QR factorization of
//! `L⁻¹ N` every iteration (`H = L Lᵀ`, `N` the active normals), which is
//! plenty for the small dense problems of a whole-body controller.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    /// Constraint matrix `G`, one row per two-sided bound.
    pub a: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        QpProblem {
            h,
            g,
            a: DMatrix::zeros(0, n),
            lower: DVector::zeros(0),
            upper: DVector::zeros(0),
        }
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        if self.h.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "Hessian is {}x{}, expected {n}x{n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.a.ncols() != n || self.lower.len() != self.m() || self.upper.len() != self.m() {
            return Err(Error::Dimension(format!(
                "constraint block is {}x{} with {}/{} bounds for {n} variables",
                self.a.nrows(),
                self.a.ncols(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if let Some(k) = (0..self.m()).find(|&k| !(self.lower[k] <= self.upper[k])) {
            return Err(Error::Dimension(format!(
                "constraint row {k} has lower bound above upper bound"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktResiduals {
    /// `‖H z + g − Gᵀ λ‖_∞`.
    pub stationarity: f64,
    /// Largest bound violation.
    pub primal: f64,
    /// Largest multiplier of the wrong sign.
    pub dual: f64,
    /// Largest `|λ_k · slack_k|` over rows with a nonzero multiplier.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }

    /// Residuals of a candidate primal/dual pair. `multipliers` is signed per
    /// row: positive pushes against the lower bound, negative against the
    /// upper bound.
    pub fn evaluate(problem: &QpProblem, z: &DVector<f64>, multipliers: &DVector<f64>) -> Self {
        let grad = &problem.h * z + &problem.g - problem.a.transpose() * multipliers;
        let gz = &problem.a * z;
        let mut res = KktResiduals {
            stationarity: grad.amax(),
            ..Default::default()
        };
        for k in 0..problem.m() {
            let (lo, hi, lam) = (problem.lower[k], problem.upper[k], multipliers[k]);
            res.primal = res.primal.max(lo - gz[k]).max(gz[k] - hi);
            if lo == hi {
                continue;
            }
            if lam > 0.0 {
                res.complementarity = res.complementarity.max((lam * (gz[k] - lo)).abs());
                if lo == f64::NEG_INFINITY {
                    res.dual = res.dual.max(lam);
                }
            } else if lam < 0.0 {
                res.complementarity = res.complementarity.max((lam * (hi - gz[k])).abs());
                if hi == f64::INFINITY {
                    res.dual = res.dual.max(-lam);
                }
            }
        }
        res
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Signed multiplier per constraint row (see [`KktResiduals::evaluate`]).
    pub multipliers: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub kkt: KktResiduals,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpSettings {
    /// Target for every KKT residual; constraints violated by less than a
    /// hundredth of it are not added to the active set.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tolerance: 1e-9,
            max_iterations: 1000,
        }
    }
}

/// A dense QP solver.
pub trait QpBackend {
    fn solve(&self, problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution>;
}

/// Goldfarb-Idnani dual active-set solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct DualActiveSet;

/// Solves with the reference [`DualActiveSet`] backend.
pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    DualActiveSet.solve(problem, settings)
}

/// One-sided constraint `sign · G_row z ≥ sign · bound`.
#[derive(Clone, Copy, Debug)]
struct Side {
    row: usize,
    sign: f64,
    bound: f64,
    equality: bool,
}

impl Side {
    fn normal(&self, a: &DMatrix<f64>) -> DVector<f64> {
        a.row(self.row).transpose() * self.sign
    }

    fn slack(&self, a: &DMatrix<f64>, z: &DVector<f64>) -> f64 {
        self.sign * (a.row(self.row) * z)[0] - self.bound
    }
}

impl QpBackend for DualActiveSet {
    fn solve(&self, problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
        problem.check()?;
        let n = problem.n();
        let a = &problem.a;
        let chol = problem
            .h
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::NotPositiveDefinite)?;

        let add_tol = 1e-2 * settings.tolerance;
        let mut sides = Vec::new();
        let mut infeasible_constant_row = false;
        for k in 0..problem.m() {
            let (lo, hi) = (problem.lower[k], problem.upper[k]);
            if a.row(k).amax() == 0.0 {
                // A row without normal is either always or never satisfied.
                infeasible_constant_row |= lo > settings.tolerance || hi < -settings.tolerance;
                continue;
            }
            if lo == hi {
                sides.push(Side { row: k, sign: 1.0, bound: lo, equality: true });
                continue;
            }
            if lo.is_finite() {
                sides.push(Side { row: k, sign: 1.0, bound: lo, equality: false });
            }
            if hi.is_finite() {
                sides.push(Side { row: k, sign: -1.0, bound: -hi, equality: false });
            }
        }

        let mut z = -chol.solve(&problem.g);
        let mut active: Vec<usize> = Vec::new();
        let mut duals: Vec<f64> = Vec::new();
        // Equalities implied by the active set.
        let mut redundant = vec![false; sides.len()];
        let mut iterations = 0;
        let mut polishes = 0;
        let mut status = if infeasible_constant_row {
            QpStatus::Infeasible
        } else {
            QpStatus::Optimal
        };

        'outer: while status == QpStatus::Optimal {
            // Equalities first, then the most violated inequality.
            let mut pick: Option<(usize, f64)> = None;
            for (idx, side) in sides.iter_mut().enumerate() {
                if redundant[idx] || active.contains(&idx) {
                    continue;
                }
                let mut s = side.slack(a, &z);
                if side.equality {
                    if s > 0.0 {
                        side.sign = -side.sign;
                        side.bound = -side.bound;
                        s = -s;
                    }
                    pick = Some((idx, s));
                    break;
                }
                if s < -add_tol && pick.is_none_or(|(_, best)| s < best) {
                    pick = Some((idx, s));
                }
            }
            let Some((p, _)) = pick else {
                // Polish once at the end and rescan; the polished point is
                // a valid dual iterate if some row turns out violated.
                if polishes < 3 {
                    polishes += 1;
                    if let Some((pz, pd)) = polish(problem, &sides, &active, &z, &duals) {
                        z = pz;
                        duals = pd;
                        continue;
                    }
                }
                break;
            };
            let normal = sides[p].normal(a);
            let mut dual_p = 0.0;
            let mut refined = false;

            loop {
                iterations += 1;
                if iterations > settings.max_iterations {
                    status = QpStatus::MaxIterations;
                    break 'outer;
                }
                let slack_p = sides[p].slack(a, &z);
                let (dz, r, curvature) = directions(&l_inv, a, &sides, &active, &normal);

                // Largest dual step that keeps active inequality multipliers
                // non-negative.
                let mut t_dual = f64::INFINITY;
                let mut drop = None;
                for (k, &idx) in active.iter().enumerate() {
                    if !sides[idx].equality && r[k] > 0.0 {
                        let t = duals[k] / r[k];
                        if t < t_dual {
                            t_dual = t;
                            drop = Some(k);
                        }
                    }
                }
                let t_primal = if curvature == 0.0 {
                    f64::INFINITY
                } else {
                    -slack_p / curvature
                };

                if t_primal.is_infinite() {
                    if sides[p].equality && slack_p.abs() <= add_tol {
                        redundant[p] = true;
                        continue 'outer;
                    }
                    // A dependent row can look violated only because z has
                    // drifted off the active rows; with a nearly flat
                    // Hessian that drift reaches eps · cond(H).
                    if !refined && dual_p == 0.0 {
                        refined = true;
                        if let Some((pz, pd)) = polish(problem, &sides, &active, &z, &duals) {
                            z = pz;
                            duals = pd;
                        }
                        let s = sides[p].slack(a, &z);
                        if s >= -add_tol || (sides[p].equality && s.abs() <= add_tol) {
                            if sides[p].equality {
                                redundant[p] = true;
                            }
                            continue 'outer;
                        }
                        continue;
                    }
                    let Some(k) = drop else {
                        status = QpStatus::Infeasible;
                        break 'outer;
                    };
                    for (d, rk) in duals.iter_mut().zip(r.iter()) {
                        *d -= t_dual * rk;
                    }
                    dual_p += t_dual;
                    active.remove(k);
                    duals.remove(k);
                    continue;
                }

                let t = t_primal.min(t_dual).max(0.0);
                z.axpy(t, &dz, 1.0);
                for (d, rk) in duals.iter_mut().zip(r.iter()) {
                    *d -= t * rk;
                }
                dual_p += t;
                if t_primal <= t_dual {
                    active.push(p);
                    duals.push(dual_p);
                    continue 'outer;
                }
                let k = drop.expect("finite dual step has a blocking constraint");
                active.remove(k);
                duals.remove(k);
            }
        }

        let mut multipliers = DVector::zeros(problem.m());
        for (&idx, &d) in active.iter().zip(&duals) {
            multipliers[sides[idx].row] += sides[idx].sign * d;
        }
        let kkt = KktResiduals::evaluate(problem, &z, &multipliers);
        Ok(QpSolution {
            objective: problem.objective(&z),
            z,
            multipliers,
            status,
            iterations,
            kkt,
        })
    }
}

/// Recomputes the equality-constrained optimum of the active set by the
/// null-space method: `z = z₀ + w` with `Nᵀ z₀ = b` from the QR of the
/// active normals `N` and `w` minimizing the objective in the complement of
/// `range(N)`. Multipliers follow from `N λ = H z + g`.
///
/// The dual iteration keeps `z` on the active rows only up to
/// `eps · cond(H)`, which the `ε`-regularized level Hessians push to 1e-8.
/// This solve works in Euclidean coordinates, so the active rows hold to
/// rounding level. The iterate may move a long way along directions of
/// curvature `ε` that no active row sees; the objective does not notice.
/// Returns `None` when the normals are numerically dependent or a
/// multiplier changes sign.
fn polish(
    problem: &QpProblem,
    sides: &[Side],
    active: &[usize],
    z: &DVector<f64>,
    duals: &[f64],
) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = z.len();
    let k = active.len();
    if k == 0 {
        return None;
    }
    let mut normals = DMatrix::zeros(n, k);
    let mut bounds = DVector::zeros(k);
    for (c, &idx) in active.iter().enumerate() {
        normals.set_column(c, &sides[idx].normal(&problem.a));
        bounds[c] = sides[idx].bound;
    }
    let qr = normals.qr();
    let (q1, r) = (qr.q(), qr.r());
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * scale) {
        return None;
    }
    let z0 = &q1 * r.tr_solve_upper_triangular(&bounds)?;
    let range = &q1 * q1.transpose();
    let complement = DMatrix::identity(n, n) - &range;
    let kmat = &complement * &problem.h * &complement + &range;
    let rhs = -(&complement * (&problem.g + &problem.h * &z0));
    let w = &complement * kmat.cholesky()?.solve(&rhs);
    let polished = z0 + w;
    let grad = &problem.h * &polished + &problem.g;
    let lambda = r.solve_upper_triangular(&q1.tr_mul(&grad))?;
    let flips = active
        .iter()
        .zip(lambda.iter().zip(duals))
        .any(|(&idx, (&l, &d))| !sides[idx].equality && l < -1e-9 * (1.0 + d.abs()));
    if flips {
        return None;
    }
    let lambda = active
        .iter()
        .zip(lambda.iter())
        .map(|(&idx, &l)| if sides[idx].equality { l } else { l.max(0.0) })
        .collect();
    Some((polished, lambda))
}

/// Primal step `dz` and dual step `r` for adding `normal` to the active set.
///
/// With `c = L⁻¹ n` and `L⁻¹ N = Q₁ R`, `dz = L⁻ᵀ (I − Q₁Q₁ᵀ) c` and
/// `r = R⁻¹ Q₁ᵀ c`. The third value is the curvature `normal · dz`; it is
/// zero when `normal` is (numerically) a combination of the active normals.
fn directions(
    l_inv: &DMatrix<f64>,
    a: &DMatrix<f64>,
    sides: &[Side],
    active: &[usize],
    normal: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, f64) {
    let c = l_inv * normal;
    if active.is_empty() {
        let dz = l_inv.tr_mul(&c);
        return (dz, DVector::zeros(0), c.norm_squared());
    }
    let n = c.len();
    let mut normals = DMatrix::zeros(n, active.len());
    for (k, &idx) in active.iter().enumerate() {
        normals.set_column(k, &sides[idx].normal(a));
    }
    let b = l_inv * normals;
    let qr = b.qr();
    let q1 = qr.q();
    let proj = q1.tr_mul(&c);
    let w = &c - &q1 * &proj;
    let r = qr
        .r()
        .solve_upper_triangular(&proj)
        .unwrap_or_else(|| DVector::zeros(active.len()));
    if w.norm() <= 1e-12 * c.norm() {
        return (DVector::zeros(n), r, 0.0);
    }
    // `normal · dz` equals `‖w‖²`; forming it through `dz` loses accuracy
    // by a factor cond(H) and can even flip its sign.
    (l_inv.tr_mul(&w), r, w.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> QpSettings {
        QpSettings::default()
    }

    #[test]
    fn clipped_unconstrained_optimum() {
        // (z - 1)^2 = z^2 - 2z + 1 -> H = 2, g = -2.
        let p = QpProblem {
            h: DMatrix::from_element(1, 1, 2.0),
            g: DVector::from_element(1, -2.0),
            a: DMatrix::from_element(1, 1, 1.0),
            lower: DVector::from_element(1, f64::NEG_INFINITY),
            upper: DVector::from_element(1, 0.0),
        };
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.z[0].abs() < 1e-12);
        assert!((sol.multipliers[0] + 2.0).abs() < 1e-12);
        assert!(sol.kkt.max() < 1e-12);
    }

    #[test]
    fn nearest_point_in_box() {
        let p = QpProblem {
            h: DMatrix::identity(2, 2) * 2.0,
            g: DVector::zeros(2),
            a: DMatrix::identity(2, 2),
            lower: DVector::from_element(2, 1.0),
            upper: DVector::from_element(2, 2.0),
        };
        let sol = solve_qp(&p, &settings()).unwrap();
        assert!((sol.z.clone() - DVector::from_element(2, 1.0)).amax() < 1e-12);
        assert!(sol.kkt.max() < 1e-12);
    }

    #[test]
    fn equality_rows() {
        // min |z|^2 s.t. z0 + z1 = 2.
        let p = QpProblem {
            h: DMatrix::identity(2, 2),
            g: DVector::zeros(2),
            a: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            lower: DVector::from_element(1, 2.0),
            upper: DVector::from_element(1, 2.0),
        };
        let sol = solve_qp(&p, &settings()).unwrap();
        assert!((sol.z.clone() - DVector::from_element(2, 1.0)).amax() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let p = QpProblem {
            h: DMatrix::identity(1, 1),
            g: DVector::zeros(1),
            a: DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            lower: DVector::from_vec(vec![1.0, f64::NEG_INFINITY]),
            upper: DVector::from_vec(vec![f64::INFINITY, 0.0]),
        };
        assert_eq!(solve_qp(&p, &settings()).unwrap().status, QpStatus::Infeasible);

        let p = QpProblem {
            h: DMatrix::identity(1, 1),
            g: DVector::zeros(1),
            a: DMatrix::zeros(1, 1),
            lower: DVector::from_element(1, 1.0),
            upper: DVector::from_element(1, 2.0),
        };
        assert_eq!(solve_qp(&p, &settings()).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn zero_rows_within_bounds_are_ignored() {
        let p = QpProblem {
            h: DMatrix::identity(1, 1),
            g: DVector::from_element(1, -1.0),
            a: DMatrix::zeros(1, 1),
            lower: DVector::from_element(1, -1.0),
            upper: DVector::from_element(1, 1.0),
        };
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let p = QpProblem::unconstrained(DMatrix::from_element(1, 1, -1.0), DVector::zeros(1));
        assert!(matches!(solve_qp(&p, &settings()), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn iteration_cap() {
        let p = QpProblem {
            h: DMatrix::identity(2, 2),
            g: DVector::zeros(2),
            a: DMatrix::identity(2, 2),
            lower: DVector::from_element(2, 1.0),
            upper: DVector::from_element(2, 2.0),
        };
        let capped = QpSettings {
            max_iterations: 1,
            ..settings()
        };
        assert_eq!(solve_qp(&p, &capped).unwrap().status, QpStatus::MaxIterations);
    }
}
