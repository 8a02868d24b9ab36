mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use rhp_hqp::qp::{solve_qp, KktResiduals, QpProblem, QpSettings, QpStatus};

use common::{brute_force_qp, random_qp, rng};

fn settings() -> QpSettings {
    QpSettings {
        tolerance: 1e-9,
        max_iterations: 1000,
    }
}

#[test]
fn box_constrained_five_variable_qps_match_enumeration() {
    let mut r = rng(11);
    for case in 0..100 {
        let mut problem = random_qp(&mut r, 5, 0);
        problem.a = DMatrix::zeros(3, 5);
        let mut lower = DVector::zeros(3);
        let mut upper = DVector::zeros(3);
        for k in 0..3 {
            problem.a[(k, k)] = 1.0;
            lower[k] = r.gen_range(-1.0..0.0);
            upper[k] = r.gen_range(0.0..1.0);
        }
        problem.lower = lower;
        problem.upper = upper;
        let sol = solve_qp(&problem, &settings()).unwrap();
        let (z, f) = brute_force_qp(&problem).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        assert!((&sol.z - &z).amax() <= 1e-8, "case {case}: {} vs {}", sol.z, z);
        assert!((sol.objective - f).abs() <= 1e-8, "case {case}");
    }
}

#[test]
fn general_qps_match_enumeration_and_satisfy_kkt() {
    let mut r = rng(12);
    for case in 0..300 {
        let n = r.gen_range(1..=6);
        let m = r.gen_range(0..=4);
        let problem = random_qp(&mut r, n, m);
        let sol = solve_qp(&problem, &settings()).unwrap();
        let (z, f) = brute_force_qp(&problem).expect("feasible by construction");
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        let kkt = KktResiduals::evaluate(&problem, &sol.z, &sol.multipliers);
        assert!(kkt.max() <= 1e-8, "case {case}: {kkt:?}");
        assert!((sol.objective - f).abs() <= 1e-8, "case {case}: {} vs {f}", sol.objective);
        assert!((&sol.z - &z).amax() <= 1e-7, "case {case}");
    }
}

#[test]
fn redundant_rows_do_not_break_the_solver() {
    // The same bound stated twice, once scaled.
    let problem = QpProblem {
        h: DMatrix::identity(2, 2),
        g: DVector::from_vec(vec![-2.0, -2.0]),
        a: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]),
        lower: DVector::from_vec(vec![f64::NEG_INFINITY, f64::NEG_INFINITY]),
        upper: DVector::from_vec(vec![1.0, 2.0]),
    };
    let sol = solve_qp(&problem, &settings()).unwrap();
    assert!((sol.z[0] - 1.0).abs() < 1e-12);
    assert!((sol.z[1] - 2.0).abs() < 1e-12);
}

#[test]
fn nearly_flat_hessians_keep_kkt() {
    // Level QPs have curvature 1e-8 along every direction the tasks do not
    // see, and box rows stacked twice with different bounds.
    let mut r = rng(13);
    for case in 0..300 {
        let n = 10;
        let rank = r.gen_range(1..n);
        let root = common::random_matrix(&mut r, rank, n);
        let h = root.transpose() * &root + DMatrix::identity(n, n) * 1e-8;
        let g = common::random_vector(&mut r, n);
        let mut a = DMatrix::zeros(2 * n, n);
        let basis = common::random_matrix(&mut r, n, n);
        a.rows_mut(0, n).copy_from(&basis);
        a.rows_mut(n, n).copy_from(&basis);
        let lower = DVector::from_fn(2 * n, |_, _| -r.gen_range(0.0..1.0));
        let upper = DVector::from_fn(2 * n, |_, _| r.gen_range(0.0..1.0));
        let problem = QpProblem { h, g, a, lower, upper };
        let sol = solve_qp(&problem, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        let kkt = KktResiduals::evaluate(&problem, &sol.z, &sol.multipliers);
        assert!(kkt.primal <= 1e-9, "case {case}: {kkt:?}");
        assert!(kkt.stationarity <= 1e-8, "case {case}: {kkt:?}");
        assert!(kkt.dual <= 1e-12 && kkt.complementarity <= 1e-8, "case {case}: {kkt:?}");
    }
}
