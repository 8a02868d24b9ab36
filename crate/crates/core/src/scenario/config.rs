//! Scenario files.
//!
//! A scenario is a TOML document (`.cfg` by convention). Top-level keys:
//!
//! ```toml
//! schema_version = 1
//! name = "example"
//! duration = 5.0          # s
//! dt = 0.004              # s
//! mode = "rhp_hqp"        # or "strict_hqp_baseline"
//! seed = 0
//!
//! [robot]
//! preset = "desk10"       # or an explicit [[robot.joints]] list
//! initial_q = [0.0, ...]
//!
//! [obstacle]
//! radius = 0.06
//! waypoints = [[t, x, y, z], ...]
//!
//! [[tasks]]               # one per priority-matrix column, in order
//! id = 3
//! kind = "hand_position"  # hand_orientation, torso_avoidance, arm_avoidance
//! gain = 4.0
//! target_offset = [0.1, 0.0, 0.0]
//!
//! [[constraints]]
//! id = 1
//! kind = "joint_velocity" # or joint_position
//! level = 0
//! approach_time = 0.1    # joint_position only, defaults to dt
//!
//! [schedule]
//! initial = "nominal"
//! avoidance = "avoid"     # optional distance-driven candidate
//! [[schedule.candidates]]
//! label = "nominal"
//! psi = [[1, 0, 0, 0], ...]
//! [[schedule.events]]
//! event = "reach_out"
//! from = ["nominal"]
//! to = "released"
//! [[triggers]]
//! event = "reach_out"
//! when = "elbow_extension_above"   # d_min_below, d_min_above, time_after
//! value = 0.95
//!
//! [solver]                # optional, defaults shown by `SolverConfig`
//! ```

use std::path::Path;

use nalgebra::{DVector, Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::hqp::SolverConfig;
use crate::robot::{
    forward_kinematics, ChainLayout, ConstraintBinding, ConstraintKind, Joint, KinematicChain,
    Obstacle, TaskBinding, TaskKind, Waypoint,
};
use crate::schedule::{BlendPolicy, CandidateSet, EventRule, Ramp, ScheduleRules};
use crate::task_model::PriorityMatrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    RhpHqp,
    StrictHqpBaseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::RhpHqp => "rhp_hqp",
            Mode::StrictHqpBaseline => "strict_hqp_baseline",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rhp_hqp" => Ok(Mode::RhpHqp),
            "strict_hqp_baseline" => Ok(Mode::StrictHqpBaseline),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: u32,
    name: String,
    duration: f64,
    dt: f64,
    #[serde(default)]
    mode: Mode,
    #[serde(default)]
    seed: u64,
    robot: RawRobot,
    obstacle: RawObstacle,
    tasks: Vec<RawTask>,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
    schedule: RawSchedule,
    #[serde(default)]
    triggers: Vec<RawTrigger>,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    preset: Option<String>,
    #[serde(default)]
    joints: Vec<RawJoint>,
    tip: Option<[f64; 3]>,
    layout: Option<RawLayout>,
    initial_q: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    name: String,
    axis: [f64; 3],
    offset: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    q_min: f64,
    q_max: f64,
    qdot_max: f64,
    #[serde(default)]
    points: Vec<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    waist_joints: Vec<usize>,
    torso_links: Vec<usize>,
    arm_links: Vec<usize>,
    shoulder_joint: usize,
    wrist_joint: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    radius: f64,
    waypoints: Vec<[f64; 4]>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawTaskKind {
    HandPosition,
    HandOrientation,
    TorsoAvoidance,
    ArmAvoidance,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    id: u32,
    name: Option<String>,
    kind: RawTaskKind,
    gain: f64,
    #[serde(default = "one")]
    weight: f64,
    target: Option<[f64; 3]>,
    target_offset: Option<[f64; 3]>,
    target_rpy: Option<[f64; 3]>,
    d_safe: Option<f64>,
    activation_distance: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawConstraintKind {
    JointVelocity,
    JointPosition,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    id: u32,
    kind: RawConstraintKind,
    #[serde(default)]
    level: usize,
    /// Joint position limits only; see `ConstraintKind::JointPosition`.
    approach_time: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCandidate {
    label: String,
    psi: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    event: String,
    #[serde(default)]
    from: Vec<String>,
    to: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    initial: String,
    avoidance: Option<String>,
    d_low: Option<f64>,
    d_high: Option<f64>,
    #[serde(default)]
    ramp: Ramp,
    rate_limit: Option<f64>,
    candidates: Vec<RawCandidate>,
    #[serde(default)]
    events: Vec<RawEvent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerCondition {
    DMinBelow,
    DMinAbove,
    ElbowExtensionAbove,
    TimeAfter,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrigger {
    event: String,
    when: TriggerCondition,
    value: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    regularization: Option<f64>,
    qp_tolerance: Option<f64>,
    max_qp_iterations: Option<usize>,
    rank_tol: Option<f64>,
}

/// Emits `event` the first cycle its condition holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Trigger {
    pub event: String,
    pub when: TriggerCondition,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    pub mode: Mode,
    pub seed: u64,
    pub chain: KinematicChain,
    pub initial_q: DVector<f64>,
    pub obstacle: Obstacle,
    pub tasks: Vec<TaskBinding>,
    pub constraints: Vec<ConstraintBinding>,
    pub candidates: CandidateSet,
    pub initial_candidate: usize,
    pub policy: BlendPolicy,
    pub rules: ScheduleRules,
    pub triggers: Vec<Trigger>,
    pub solver: SolverConfig,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        build(raw)
    }

    /// Number of control cycles, `round(duration / dt)`.
    pub fn cycles(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn build_chain(raw: &RawRobot) -> Result<KinematicChain> {
    match (&raw.preset, raw.joints.is_empty()) {
        (Some(preset), true) => match preset.as_str() {
            "desk10" => Ok(KinematicChain::desk10()),
            other => Err(Error::Config(format!("unknown robot preset {other:?}"))),
        },
        (None, false) => {
            let joints = raw
                .joints
                .iter()
                .map(|j| {
                    let axis = vec3(j.axis);
                    if (axis.norm() - 1.0).abs() > 1e-12 {
                        return Err(Error::Config(format!("joint {} axis is not unit length", j.name)));
                    }
                    let mut joint = Joint::revolute(j.name.clone(), axis, vec3(j.offset))
                        .with_limits(j.q_min, j.q_max, j.qdot_max)
                        .with_points(j.points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect());
                    joint.offset = Isometry3::from_parts(
                        Translation3::from(vec3(j.offset)),
                        UnitQuaternion::from_euler_angles(j.rpy[0], j.rpy[1], j.rpy[2]),
                    );
                    Ok(joint)
                })
                .collect::<Result<Vec<_>>>()?;
            let layout = raw
                .layout
                .as_ref()
                .ok_or_else(|| Error::Config("explicit joints need a [robot.layout] table".into()))?;
            let tip = Isometry3::translation(
                raw.tip.map_or(0.0, |t| t[0]),
                raw.tip.map_or(0.0, |t| t[1]),
                raw.tip.map_or(0.0, |t| t[2]),
            );
            KinematicChain::new(
                joints,
                tip,
                ChainLayout {
                    waist_joints: layout.waist_joints.clone(),
                    torso_links: layout.torso_links.clone(),
                    arm_links: layout.arm_links.clone(),
                    shoulder_joint: layout.shoulder_joint,
                    wrist_joint: layout.wrist_joint,
                },
            )
        }
        _ => Err(Error::Config(
            "robot needs exactly one of `preset` or `joints`".into(),
        )),
    }
}

fn build_task(raw: &RawTask, hand: &Isometry3<f64>) -> Result<TaskBinding> {
    let missing = |field: &str| Error::Config(format!("task {} needs `{field}`", raw.id));
    let kind = match raw.kind {
        RawTaskKind::HandPosition => {
            let here = hand.translation.vector;
            let target = match (raw.target, raw.target_offset) {
                (Some(t), None) => vec3(t),
                (None, Some(o)) => here + vec3(o),
                (None, None) => here,
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "task {}: give `target` or `target_offset`, not both",
                        raw.id
                    )))
                }
            };
            TaskKind::HandPosition { target }
        }
        RawTaskKind::HandOrientation => TaskKind::HandOrientation {
            target: raw
                .target_rpy
                .map_or(hand.rotation, |r| UnitQuaternion::from_euler_angles(r[0], r[1], r[2])),
        },
        RawTaskKind::TorsoAvoidance => TaskKind::TorsoAvoidance {
            d_safe: raw.d_safe.unwrap_or(0.10),
        },
        RawTaskKind::ArmAvoidance => TaskKind::ArmAvoidance {
            d_safe: raw.d_safe.unwrap_or(0.05),
            activation_distance: raw.activation_distance.ok_or_else(|| missing("activation_distance"))?,
        },
    };
    let name = raw.name.clone().unwrap_or_else(|| {
        match raw.kind {
            RawTaskKind::HandPosition => "hand_position",
            RawTaskKind::HandOrientation => "hand_orientation",
            RawTaskKind::TorsoAvoidance => "torso_avoidance",
            RawTaskKind::ArmAvoidance => "arm_avoidance",
        }
        .to_string()
    });
    let binding = TaskBinding {
        id: raw.id,
        name,
        kind,
        gain: raw.gain,
        weight: raw.weight,
    };
    binding.validate()?;
    Ok(binding)
}

fn build(raw: RawScenario) -> Result<Scenario> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            raw.schema_version
        )));
    }
    if !(raw.duration >= 0.0 && raw.duration.is_finite()) {
        return Err(Error::Config(format!("duration must be non-negative, got {}", raw.duration)));
    }
    if !(raw.dt > 0.0 && raw.dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {}", raw.dt)));
    }

    let chain = build_chain(&raw.robot)?;
    if raw.robot.initial_q.len() != chain.dof() {
        return Err(Error::Config(format!(
            "initial_q has {} entries, chain has {} joints",
            raw.robot.initial_q.len(),
            chain.dof()
        )));
    }
    for (k, (q, j)) in raw.robot.initial_q.iter().zip(&chain.joints).enumerate() {
        if !(j.q_min <= *q && *q <= j.q_max) {
            return Err(Error::Config(format!(
                "initial_q[{k}] = {q} is outside [{}, {}]",
                j.q_min, j.q_max
            )));
        }
    }
    let initial_q = DVector::from_vec(raw.robot.initial_q.clone());
    let hand = forward_kinematics(&chain, initial_q.as_slice()).tip;

    let waypoints = raw
        .obstacle
        .waypoints
        .iter()
        .map(|w| Waypoint {
            t: w[0],
            position: Vector3::new(w[1], w[2], w[3]),
        })
        .collect();
    let obstacle = Obstacle::new(raw.obstacle.radius, waypoints)?;

    if raw.tasks.is_empty() {
        return Err(Error::Config("scenario has no tasks".into()));
    }
    let tasks = raw
        .tasks
        .iter()
        .map(|t| build_task(t, &hand))
        .collect::<Result<Vec<_>>>()?;
    for (k, t) in tasks.iter().enumerate() {
        if tasks[..k].iter().any(|o| o.id == t.id) {
            return Err(Error::Config(format!("duplicate task id {}", t.id)));
        }
    }
    if let Some(c) = raw.constraints.iter().find(|c| {
        c.approach_time.is_some_and(|t| !(t >= 0.0) || matches!(c.kind, RawConstraintKind::JointVelocity))
    }) {
        return Err(Error::Config(format!(
            "constraint {}: approach_time must be non-negative and only applies to joint_position",
            c.id
        )));
    }
    let constraints: Vec<ConstraintBinding> = raw
        .constraints
        .iter()
        .map(|c| ConstraintBinding {
            id: c.id,
            kind: match c.kind {
                RawConstraintKind::JointVelocity => ConstraintKind::JointVelocity,
                RawConstraintKind::JointPosition => ConstraintKind::JointPosition {
                    approach_time: c.approach_time.unwrap_or(0.0),
                },
            },
            level: c.level,
        })
        .collect();

    let s = &raw.schedule;
    let labels: Vec<String> = s.candidates.iter().map(|c| c.label.clone()).collect();
    let matrices = s
        .candidates
        .iter()
        .map(|c| PriorityMatrix::from_rows(&c.psi))
        .collect::<Result<Vec<_>>>()?;
    let candidates = CandidateSet::new(matrices, labels)?;
    if candidates.get(0).n_tasks() != tasks.len() {
        return Err(Error::Config(format!(
            "priority matrices have {} columns for {} tasks",
            candidates.get(0).n_tasks(),
            tasks.len()
        )));
    }
    for c in &constraints {
        if c.level > candidates.get(0).n_levels() {
            return Err(Error::Config(format!(
                "constraint {} is assigned to level {} of {}",
                c.id,
                c.level,
                candidates.get(0).n_levels()
            )));
        }
    }
    let lookup = |label: &str| {
        candidates
            .index_of(label)
            .ok_or_else(|| Error::Config(format!("unknown candidate {label:?}")))
    };
    let initial_candidate = lookup(&s.initial)?;
    let defaults = BlendPolicy::default();
    let policy = BlendPolicy {
        d_low: s.d_low.unwrap_or(defaults.d_low),
        d_high: s.d_high.unwrap_or(defaults.d_high),
        ramp: s.ramp,
        rate_limit: s.rate_limit.unwrap_or(defaults.rate_limit),
    };
    policy.validate()?;
    let rules = ScheduleRules {
        avoidance: s.avoidance.as_deref().map(lookup).transpose()?,
        events: s
            .events
            .iter()
            .map(|e| {
                Ok(EventRule {
                    event: e.event.clone(),
                    from: e.from.iter().map(|l| lookup(l)).collect::<Result<_>>()?,
                    to: lookup(&e.to)?,
                })
            })
            .collect::<Result<_>>()?,
    };
    rules.validate(candidates.len())?;
    let triggers: Vec<Trigger> = raw
        .triggers
        .iter()
        .map(|t| Trigger {
            event: t.event.clone(),
            when: t.when,
            value: t.value,
        })
        .collect();
    if let Some(t) = triggers.iter().find(|t| !rules.events.iter().any(|r| r.event == t.event)) {
        return Err(Error::Config(format!("trigger fires unknown event {:?}", t.event)));
    }

    let base = SolverConfig::default();
    let solver = SolverConfig {
        regularization: raw.solver.regularization.unwrap_or(base.regularization),
        qp_tolerance: raw.solver.qp_tolerance.unwrap_or(base.qp_tolerance),
        max_qp_iterations: raw.solver.max_qp_iterations.unwrap_or(base.max_qp_iterations),
        rank_tol: raw.solver.rank_tol.unwrap_or(base.rank_tol),
    };
    solver.validate()?;

    Ok(Scenario {
        name: raw.name,
        duration: raw.duration,
        dt: raw.dt,
        mode: raw.mode,
        seed: raw.seed,
        chain,
        initial_q,
        obstacle,
        tasks,
        constraints,
        candidates,
        initial_candidate,
        policy,
        rules,
        triggers,
        solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
schema_version = 1
name = "minimal"
duration = 0.02
dt = 0.004

[robot]
preset = "desk10"
initial_q = [0.0, 0.0, 0.0, 0.8, 0.0, 0.0, -1.2, 0.0, 0.0, 0.0]

[obstacle]
radius = 0.05
waypoints = [[0.0, 2.0, 0.0, 0.5]]

[[tasks]]
id = 3
kind = "hand_position"
gain = 2.0
target_offset = [0.05, 0.0, 0.0]

[[constraints]]
id = 1
kind = "joint_velocity"

[schedule]
initial = "only"
[[schedule.candidates]]
label = "only"
psi = [[1.0]]
"#;

    #[test]
    fn parses_minimal() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.cycles(), 5);
        assert_eq!(s.mode, Mode::RhpHqp);
        assert_eq!(s.tasks.len(), 1);
        assert_eq!(s.constraints[0].level, 0);
    }

    #[test]
    fn rejects_wrong_version() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(Scenario::parse(&text), Err(Error::Config(m)) if m.contains("schema_version")));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = MINIMAL.replace("dt = 0.004", "dt = 0.004\nspeed = 3");
        assert!(matches!(Scenario::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_column_mismatch() {
        let text = MINIMAL.replace("psi = [[1.0]]", "psi = [[1.0, 0.0]]");
        assert!(Scenario::parse(&text).is_err());
    }

    #[test]
    fn rejects_non_monotone_candidate() {
        let text = MINIMAL
            .replace("psi = [[1.0]]", "psi = [[1.0], [0.5]]");
        assert!(matches!(Scenario::parse(&text), Err(Error::Priority(_))));
    }
}
