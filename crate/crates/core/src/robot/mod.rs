//! Kinematic simulation of a redundant serial arm.

mod chain;
mod obstacle;
mod tasks;

pub use chain::{
    forward_kinematics, orientation_jacobian, point_jacobian, tip_point, ChainLayout, ChainPose,
    Joint, KinematicChain,
};
pub use obstacle::{min_distance, DistanceWitness, Obstacle, Waypoint};
pub use tasks::{
    make_tasks, orientation_error, step, ConstraintBinding, ConstraintKind, LimitViolation,
    RobotState, TaskBinding, TaskFrame, TaskKind,
};
