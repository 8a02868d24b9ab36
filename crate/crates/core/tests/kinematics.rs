mod common;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Point3, UnitQuaternion, Vector3, Vector4};
use rand::rngs::StdRng;
use rand::Rng;

use rhp_hqp::hqp::{solve_hierarchy, SolverConfig};
use rhp_hqp::robot::{
    forward_kinematics, make_tasks, min_distance, orientation_jacobian, point_jacobian, step, tip_point,
    KinematicChain, RobotState, TaskBinding, TaskKind,
};
use rhp_hqp::task_model::{PriorityMatrix, TaskLibrary};

use common::rng;

fn random_q(r: &mut StdRng, chain: &KinematicChain) -> Vec<f64> {
    chain.joints.iter().map(|j| r.gen_range(j.q_min..j.q_max)).collect()
}

/// Rodrigues rotation about a unit axis.
fn rotation(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = Matrix3::new(0.0, -axis.z, axis.y, axis.z, 0.0, -axis.x, -axis.y, axis.x, 0.0);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

fn homogeneous(rot: &Matrix3<f64>, trans: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(trans);
    m
}

/// Link frames as plain 4 × 4 products of per-joint matrices.
fn frames(chain: &KinematicChain, q: &[f64]) -> Vec<Matrix4<f64>> {
    let mut t = Matrix4::identity();
    let mut out = Vec::new();
    for (joint, &angle) in chain.joints.iter().zip(q) {
        let offset = homogeneous(
            joint.offset.rotation.to_rotation_matrix().matrix(),
            &joint.offset.translation.vector,
        );
        t = t * offset * homogeneous(&rotation(&joint.axis, angle), &Vector3::zeros());
        out.push(t);
    }
    out
}

fn apply(t: &Matrix4<f64>, p: &Point3<f64>) -> Vector3<f64> {
    (t * Vector4::new(p.x, p.y, p.z, 1.0)).xyz()
}

fn tip(chain: &KinematicChain, q: &[f64]) -> Vector3<f64> {
    apply(frames(chain, q).last().unwrap(), &tip_point(chain))
}

/// Rotation vector of `r` by the matrix log.
fn log_map(r: &Matrix3<f64>) -> Vector3<f64> {
    let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-12 {
        v / 2.0
    } else {
        v * (angle / (2.0 * angle.sin()))
    }
}

fn shifted(q: &[f64], j: usize, h: f64) -> Vec<f64> {
    let mut out = q.to_vec();
    out[j] += h;
    out
}

#[test]
fn tip_matches_homogeneous_products() {
    let chain = KinematicChain::desk10();
    let mut r = rng(31);
    for _ in 0..100 {
        let q = random_q(&mut r, &chain);
        let pose = forward_kinematics(&chain, &q);
        assert!((pose.tip.translation.vector - tip(&chain, &q)).amax() <= 1e-12);
        for (frame, oracle) in pose.links.iter().zip(frames(&chain, &q)) {
            assert!((frame.to_homogeneous() - oracle).amax() <= 1e-12);
        }
    }
}

#[test]
fn point_jacobian_matches_finite_differences() {
    let chain = KinematicChain::desk10();
    let h = 1e-6;
    let mut r = rng(32);
    for _ in 0..100 {
        let q = random_q(&mut r, &chain);
        let link = r.gen_range(0..chain.dof());
        let local = Point3::new(r.gen_range(-0.2..0.2), r.gen_range(-0.2..0.2), r.gen_range(-0.2..0.2));
        let jac = point_jacobian(&chain, &q, link, &local);
        for j in 0..chain.dof() {
            let plus = apply(&frames(&chain, &shifted(&q, j, h))[link], &local);
            let minus = apply(&frames(&chain, &shifted(&q, j, -h))[link], &local);
            let fd = (plus - minus) / (2.0 * h);
            assert!((jac.column(j) - fd).amax() <= 1e-6, "link {link} joint {j}");
        }
    }
}

#[test]
fn orientation_jacobian_matches_log_map_differences() {
    let chain = KinematicChain::desk10();
    let h = 1e-6;
    let mut r = rng(33);
    for _ in 0..100 {
        let q = random_q(&mut r, &chain);
        let link = r.gen_range(0..chain.dof());
        let jac = orientation_jacobian(&chain, &q, link);
        for j in 0..chain.dof() {
            let plus = frames(&chain, &shifted(&q, j, h))[link].fixed_view::<3, 3>(0, 0).into_owned();
            let minus = frames(&chain, &shifted(&q, j, -h))[link].fixed_view::<3, 3>(0, 0).into_owned();
            let fd = log_map(&(plus * minus.transpose())) / (2.0 * h);
            assert!((jac.column(j) - fd).amax() <= 1e-6, "link {link} joint {j}");
        }
    }
}

/// Distance over the arm segments sampled ten times more densely than the
/// chain's own points, and the largest half-spacing of those points.
fn dense_distance(chain: &KinematicChain, q: &[f64], center: &Vector3<f64>, radius: f64) -> (f64, f64) {
    let frames = frames(chain, q);
    let mut best = f64::INFINITY;
    let mut resolution: f64 = 0.0;
    for &link in &chain.layout.arm_links {
        let points = &chain.joints[link].points;
        let (first, last) = (points[0], points[points.len() - 1]);
        resolution = resolution.max((last - first).norm() / (points.len() - 1) as f64 / 2.0);
        let count = 10 * (points.len() - 1) + 1;
        for k in 0..count {
            let s = k as f64 / (count - 1) as f64;
            let p = Point3::from(first.coords + (last - first) * s);
            best = best.min((apply(&frames[link], &p) - center).norm() - radius);
        }
    }
    (best, resolution)
}

#[test]
fn min_distance_matches_dense_sampling() {
    let chain = KinematicChain::desk10();
    let mut r = rng(34);
    for case in 0..100 {
        let q = random_q(&mut r, &chain);
        let center = Vector3::new(r.gen_range(0.0..0.8), r.gen_range(-0.5..0.8), r.gen_range(0.0..0.8));
        let radius = r.gen_range(0.02..0.1);
        let w = min_distance(&chain, &q, &center, radius, &chain.layout.arm_links).unwrap();
        let (dense, resolution) = dense_distance(&chain, &q, &center, radius);
        // The chain's points are a subset of the segments.
        assert!(w.distance >= dense - 1e-12, "case {case}");
        assert!(w.distance - dense <= resolution, "case {case}: {} vs {dense}", w.distance);
        // The witness point reproduces the distance.
        let p = apply(&frames(&chain, &q)[w.link], &w.local);
        assert!(((p - center).norm() - radius - w.distance).abs() <= 1e-12);
    }
}

#[test]
fn min_distance_gradient_matches_finite_differences() {
    let chain = KinematicChain::desk10();
    let h = 1e-6;
    let mut r = rng(35);
    let mut checked = 0;
    while checked < 100 {
        let q = random_q(&mut r, &chain);
        let center = Vector3::new(r.gen_range(0.0..0.8), r.gen_range(-0.5..0.8), r.gen_range(0.0..0.8));
        let links = &chain.layout.arm_links;
        let w = min_distance(&chain, &q, &center, 0.05, links).unwrap();
        let mut fd = Vec::new();
        for j in 0..chain.dof() {
            let plus = min_distance(&chain, &shifted(&q, j, h), &center, 0.05, links).unwrap();
            let minus = min_distance(&chain, &shifted(&q, j, -h), &center, 0.05, links).unwrap();
            // Skip configurations where the witness switches inside the stencil.
            if (plus.link, plus.local) != (w.link, w.local) || (minus.link, minus.local) != (w.link, w.local) {
                break;
            }
            fd.push((plus.distance - minus.distance) / (2.0 * h));
        }
        if fd.len() < chain.dof() {
            continue;
        }
        for (j, v) in fd.iter().enumerate() {
            assert!((w.gradient[j] - v).abs() <= 1e-6, "joint {j}");
        }
        checked += 1;
    }
}

#[test]
fn min_distance_is_continuous_along_segments() {
    let chain = KinematicChain::desk10();
    let mut r = rng(36);
    let center = Vector3::new(0.45, 0.1, 0.35);
    for _ in 0..20 {
        let (a, b) = (random_q(&mut r, &chain), random_q(&mut r, &chain));
        let dq: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        let length = dq.iter().map(|v| v * v).sum::<f64>().sqrt();
        let steps = (length / 1e-3).ceil() as usize;
        let at = |k: usize| -> Vec<f64> {
            let s = k as f64 / steps as f64;
            a.iter().zip(&dq).map(|(x, d)| x + d * s).collect()
        };
        let step_len = length / steps as f64;
        let mut prev = min_distance(&chain, &at(0), &center, 0.05, &chain.layout.arm_links).unwrap();
        for k in 1..=steps {
            let cur = min_distance(&chain, &at(k), &center, 0.05, &chain.layout.arm_links).unwrap();
            // Distance is 1-Lipschitz in each point, and a point within
            // reach R of every axis moves at most R·√n·|Δq|.
            let bound = 1.2 * (chain.dof() as f64).sqrt() * step_len;
            assert!((cur.distance - prev.distance).abs() <= bound);
            prev = cur;
        }
    }
}

fn hand_only(target: Vector3<f64>) -> Vec<TaskBinding> {
    vec![TaskBinding {
        id: 3,
        name: "hand".into(),
        kind: TaskKind::HandPosition { target },
        gain: 2.0,
        weight: 1.0,
    }]
}

#[test]
fn hand_task_alone_converges() {
    let chain = KinematicChain::desk10();
    let mut r = rng(37);
    let dt = 0.004;
    let psi = PriorityMatrix::from_rows(&[vec![1.0]]).unwrap();
    let far = Vector3::new(10.0, 10.0, 10.0);
    for case in 0..5 {
        let q0 = random_q(&mut r, &chain);
        // A reachable target: the tip at a nearby configuration.
        let goal: Vec<f64> = q0.iter().map(|v| v + r.gen_range(-0.3..0.3)).collect();
        let target = tip(&chain, &goal);
        let bindings = hand_only(target);
        let mut state = RobotState::at_rest(DVector::from_vec(q0));
        let mut errors = Vec::new();
        while state.t < 5.0 - 1e-9 {
            let (tasks, constraints, frame) =
                make_tasks(&chain, &state, &bindings, &[], &far, 0.05, dt).unwrap();
            errors.push(frame.position_error.norm());
            let library = TaskLibrary::new(chain.dof(), tasks, constraints).unwrap();
            let x = solve_hierarchy(&psi, &library, &SolverConfig::default()).unwrap().x;
            state = step(&chain, &state, &x, dt, 1e-9).unwrap().0;
        }
        let last = (tip(&chain, state.q.as_slice()) - target).norm();
        assert!(last <= 1e-4, "case {case}: {last}");
        // Monotone decay once the first 0.5 s are over.
        let settle = (0.5 / dt) as usize;
        for w in errors[settle..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "case {case}");
        }
    }
}

#[test]
fn zero_errors_give_near_zero_command() {
    let chain = KinematicChain::desk10();
    let mut r = rng(38);
    for _ in 0..20 {
        let q = random_q(&mut r, &chain);
        let pose = forward_kinematics(&chain, &q);
        let bindings = vec![
            TaskBinding {
                id: 1,
                name: "torso".into(),
                kind: TaskKind::TorsoAvoidance { d_safe: 0.1 },
                gain: 2.0,
                weight: 1.0,
            },
            TaskBinding {
                id: 2,
                name: "posture".into(),
                kind: TaskKind::HandOrientation {
                    target: UnitQuaternion::from(pose.tip.rotation),
                },
                gain: 2.0,
                weight: 1.0,
            },
            TaskBinding {
                id: 3,
                name: "hand".into(),
                kind: TaskKind::HandPosition {
                    target: pose.tip.translation.vector,
                },
                gain: 2.0,
                weight: 1.0,
            },
        ];
        let state = RobotState::at_rest(DVector::from_vec(q));
        let far = Vector3::new(10.0, 10.0, 10.0);
        let (tasks, constraints, _) = make_tasks(&chain, &state, &bindings, &[], &far, 0.05, 0.004).unwrap();
        assert!(tasks.iter().all(|t| t.b.amax() <= 1e-12));
        let library = TaskLibrary::new(chain.dof(), tasks, constraints).unwrap();
        let psi = PriorityMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]]).unwrap();
        let x = solve_hierarchy(&psi, &library, &SolverConfig::default()).unwrap().x;
        assert!(x.norm() <= 1e-6);
    }
}

#[test]
fn gain_times_error_targets() {
    let chain = KinematicChain::desk10();
    let q = vec![0.1; 10];
    let pose = forward_kinematics(&chain, &q);
    let target = pose.tip.translation.vector + Vector3::new(0.1, 0.0, 0.0);
    let state = RobotState::at_rest(DVector::from_vec(q));
    let far = Vector3::new(10.0, 10.0, 10.0);
    let (tasks, _, _) = make_tasks(&chain, &state, &hand_only(target), &[], &far, 0.05, 0.004).unwrap();
    let expected = DMatrix::from_column_slice(3, 1, &[0.2, 0.0, 0.0]);
    assert!((&tasks[0].b - expected.column(0)).amax() <= 1e-12);
}
