//! Per-cycle task and constraint generation, and velocity integration.

use nalgebra::{DMatrix, DVector, RowDVector, UnitQuaternion, Vector3};

use super::chain::{
    forward_kinematics, orientation_jacobian_at, point_jacobian_at, tip_point, ChainPose,
    KinematicChain,
};
use super::obstacle::{min_distance_at, DistanceWitness};
use crate::error::{Error, Result};
use crate::task_model::{Constraint, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub t: f64,
}

impl RobotState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        RobotState {
            q,
            qdot: DVector::zeros(n),
            t: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskKind {
    HandPosition {
        target: Vector3<f64>,
    },
    HandOrientation {
        target: UnitQuaternion<f64>,
    },
    /// Holds the waist joints still, or moves them at the repulsive speed
    /// along the waist part of the torso distance gradient when the torso
    /// is closer than `d_safe`.
    TorsoAvoidance {
        d_safe: f64,
    },
    /// One row along the arm distance gradient. The row fades in with a
    /// smoothstep as the distance falls from `activation_distance` to
    /// `d_safe`; below `d_safe` it asks for the repulsive speed.
    ArmAvoidance {
        d_safe: f64,
        activation_distance: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskBinding {
    pub id: u32,
    pub name: String,
    pub kind: TaskKind,
    /// Proportional gain `k_p` (1/s).
    pub gain: f64,
    /// Scalar row weight, `W = weight · I`.
    pub weight: f64,
}

impl TaskBinding {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidTask {
            id: self.id,
            reason: reason.into(),
        };
        if !(self.gain > 0.0) {
            return Err(invalid("gain must be positive"));
        }
        if !(self.weight > 0.0) {
            return Err(invalid("weight must be positive"));
        }
        match self.kind {
            TaskKind::TorsoAvoidance { d_safe } if !(d_safe > 0.0) => {
                Err(invalid("d_safe must be positive"))
            }
            TaskKind::ArmAvoidance {
                d_safe,
                activation_distance,
            } if !(d_safe > 0.0 && activation_distance > d_safe) => {
                Err(invalid("arm avoidance needs 0 < d_safe < activation_distance"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `|q̇| ≤ q̇_max`.
    JointVelocity,
    /// `(q_min − q)/τ ≤ q̇ ≤ (q_max − q)/τ` with `τ = max(dt, approach_time)`.
    /// At `τ = dt` a joint may reach its limit in one step; a longer `τ`
    /// slows it down exponentially on the way in.
    JointPosition { approach_time: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintBinding {
    pub id: u32,
    pub kind: ConstraintKind,
    pub level: usize,
}

/// Everything the tasks were generated from, kept for logging.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskFrame {
    pub pose: ChainPose,
    pub obstacle_center: Vector3<f64>,
    /// Closest arm point, `None` if the arm links carry no points.
    pub arm: Option<DistanceWitness>,
    pub torso: Option<DistanceWitness>,
    pub position_error: Vector3<f64>,
    pub orientation_error: Vector3<f64>,
}

impl TaskFrame {
    pub fn d_min(&self) -> f64 {
        self.arm.as_ref().map_or(f64::INFINITY, |w| w.distance)
    }
}

/// Rotation vector `log(R_target R_handᵀ)`, expressed in the world frame.
pub fn orientation_error(target: &UnitQuaternion<f64>, hand: &UnitQuaternion<f64>) -> Vector3<f64> {
    (target * hand.inverse()).scaled_axis()
}

/// `0` at or beyond `far`, `1` at or inside `near`, smoothstep in between.
fn activation(d: f64, near: f64, far: f64) -> f64 {
    let s = ((far - d) / (far - near)).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Hand position and orientation targets that bindings may share.
fn hand_errors(bindings: &[TaskBinding], pose: &ChainPose) -> (Vector3<f64>, Vector3<f64>) {
    let mut position = Vector3::zeros();
    let mut orientation = Vector3::zeros();
    for b in bindings {
        match &b.kind {
            TaskKind::HandPosition { target } => position = target - pose.tip.translation.vector,
            TaskKind::HandOrientation { target } => {
                orientation = orientation_error(target, &pose.tip.rotation)
            }
            _ => {}
        }
    }
    (position, orientation)
}

fn waist_rows(chain: &KinematicChain) -> DMatrix<f64> {
    let waist = &chain.layout.waist_joints;
    let mut a = DMatrix::zeros(waist.len(), chain.dof());
    for (r, &j) in waist.iter().enumerate() {
        a[(r, j)] = 1.0;
    }
    a
}

/// Builds the tasks (in binding order) and constraints for one cycle.
pub fn make_tasks(
    chain: &KinematicChain,
    state: &RobotState,
    bindings: &[TaskBinding],
    constraints: &[ConstraintBinding],
    obstacle_center: &Vector3<f64>,
    obstacle_radius: f64,
    dt: f64,
) -> Result<(Vec<Task>, Vec<Constraint>, TaskFrame)> {
    let n = chain.dof();
    if state.q.len() != n {
        return Err(Error::Dimension(format!(
            "state has {} joints, chain has {n}",
            state.q.len()
        )));
    }
    let q = state.q.as_slice();
    let pose = forward_kinematics(chain, q);
    let last = n - 1;
    let arm = min_distance_at(chain, &pose, obstacle_center, obstacle_radius, &chain.layout.arm_links);
    let torso = min_distance_at(chain, &pose, obstacle_center, obstacle_radius, &chain.layout.torso_links);
    let (position_error, orientation_err) = hand_errors(bindings, &pose);

    let mut tasks = Vec::with_capacity(bindings.len());
    for binding in bindings {
        binding.validate()?;
        let k = binding.gain;
        let (a, b) = match &binding.kind {
            TaskKind::HandPosition { .. } => (
                point_jacobian_at(chain, &pose, last, &tip_point(chain)),
                DVector::from_column_slice((position_error * k).as_slice()),
            ),
            TaskKind::HandOrientation { .. } => (
                orientation_jacobian_at(chain, &pose, last),
                DVector::from_column_slice((orientation_err * k).as_slice()),
            ),
            TaskKind::TorsoAvoidance { d_safe } => {
                let a = waist_rows(chain);
                let mut b = DVector::zeros(a.nrows());
                if let Some(w) = &torso {
                    let push = k * (d_safe - w.distance).max(0.0);
                    let g: DVector<f64> = chain
                        .layout
                        .waist_joints
                        .iter()
                        .map(|&j| w.gradient[j])
                        .collect::<Vec<_>>()
                        .into();
                    let g2 = g.norm_squared();
                    if push > 0.0 && g2 > 1e-18 {
                        b = g * (push / g2);
                    }
                }
                (a, b)
            }
            TaskKind::ArmAvoidance {
                d_safe,
                activation_distance,
            } => match &arm {
                Some(w) => {
                    let beta = activation(w.distance, *d_safe, *activation_distance);
                    let push = k * (d_safe - w.distance).max(0.0);
                    let row: RowDVector<f64> = &w.gradient * beta;
                    (
                        DMatrix::from_row_slice(1, n, row.as_slice()),
                        DVector::from_element(1, beta * push),
                    )
                }
                None => (DMatrix::zeros(1, n), DVector::zeros(1)),
            },
        };
        let rows = a.nrows();
        tasks.push(Task::new(
            binding.id,
            binding.name.clone(),
            a,
            b,
            DMatrix::identity(rows, rows) * binding.weight,
        )?);
    }

    let mut out = Vec::with_capacity(constraints.len());
    for c in constraints {
        let (lower, upper) = match c.kind {
            ConstraintKind::JointVelocity => {
                let max = DVector::from_vec(chain.qdot_max());
                (-&max, max)
            }
            ConstraintKind::JointPosition { approach_time } => {
                let tau = dt.max(approach_time);
                let lo = DVector::from_vec(chain.q_min());
                let hi = DVector::from_vec(chain.q_max());
                // A state marginally past a limit asks for zero motion
                // toward it rather than an infeasible return.
                let lower = (lo - &state.q).map(|v| (v / tau).min(0.0));
                let upper = (hi - &state.q).map(|v| (v / tau).max(0.0));
                (lower, upper)
            }
        };
        out.push(Constraint::new(c.id, DMatrix::identity(n, n), lower, upper, c.level)?);
    }

    let frame = TaskFrame {
        pose,
        obstacle_center: *obstacle_center,
        arm,
        torso,
        position_error,
        orientation_error: orientation_err,
    };
    Ok((tasks, out, frame))
}

/// A command that exceeded a joint's velocity limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitViolation {
    pub joint: usize,
    pub excess: f64,
}

/// Explicit Euler step. Commands beyond the velocity limits by more than
/// `tolerance` are still applied but reported.
pub fn step(
    chain: &KinematicChain,
    state: &RobotState,
    command: &DVector<f64>,
    dt: f64,
    tolerance: f64,
) -> Result<(RobotState, Option<LimitViolation>)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if command.len() != state.q.len() {
        return Err(Error::Dimension(format!(
            "command has {} entries, state has {}",
            command.len(),
            state.q.len()
        )));
    }
    let mut violation: Option<LimitViolation> = None;
    for (j, (v, max)) in command.iter().zip(chain.qdot_max()).enumerate() {
        let excess = v.abs() - max;
        if excess > tolerance && violation.is_none_or(|w| excess > w.excess) {
            violation = Some(LimitViolation { joint: j, excess });
        }
    }
    let next = RobotState {
        q: &state.q + command * dt,
        qdot: command.clone(),
        t: state.t + dt,
    };
    Ok((next, violation))
}
