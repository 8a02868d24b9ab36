//! Serial chains of revolute joints.

use nalgebra::{DMatrix, Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Rotation axis in the joint frame.
    pub axis: Unit<Vector3<f64>>,
    /// Pose of the joint frame in the parent link frame at `q = 0`.
    pub offset: Isometry3<f64>,
    pub q_min: f64,
    pub q_max: f64,
    pub qdot_max: f64,
    /// Collision-check points of the link driven by this joint, in its frame.
    pub points: Vec<Point3<f64>>,
}

impl Joint {
    pub fn revolute(name: impl Into<String>, axis: Vector3<f64>, offset: Vector3<f64>) -> Self {
        Joint {
            name: name.into(),
            axis: Unit::new_normalize(axis),
            offset: Isometry3::from_parts(Translation3::from(offset), UnitQuaternion::identity()),
            q_min: -std::f64::consts::PI,
            q_max: std::f64::consts::PI,
            qdot_max: 2.0,
            points: Vec::new(),
        }
    }

    pub fn with_limits(mut self, q_min: f64, q_max: f64, qdot_max: f64) -> Self {
        self.q_min = q_min;
        self.q_max = q_max;
        self.qdot_max = qdot_max;
        self
    }

    /// Evenly spaced points on the segment `from → to`, both ends included.
    pub fn with_segment_points(mut self, from: Vector3<f64>, to: Vector3<f64>, count: usize) -> Self {
        let count = count.max(2);
        for k in 0..count {
            let s = k as f64 / (count - 1) as f64;
            self.points.push(Point3::from(from + (to - from) * s));
        }
        self
    }

    pub fn with_points(mut self, points: Vec<Point3<f64>>) -> Self {
        self.points.extend(points);
        self
    }
}

/// Named link groups used by the task generators.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainLayout {
    /// Joints whose motion is held by the torso task.
    pub waist_joints: Vec<usize>,
    /// Links checked against the obstacle for the torso task.
    pub torso_links: Vec<usize>,
    /// Links checked against the obstacle for the arm task and `d_min`.
    pub arm_links: Vec<usize>,
    /// Joint whose origin is the shoulder.
    pub shoulder_joint: usize,
    /// Joint whose origin is the wrist.
    pub wrist_joint: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    pub joints: Vec<Joint>,
    /// Hand frame relative to the last link.
    pub tip: Isometry3<f64>,
    pub layout: ChainLayout,
}

/// World poses of every link frame and of the hand.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPose {
    pub links: Vec<Isometry3<f64>>,
    pub tip: Isometry3<f64>,
}

impl ChainPose {
    pub fn joint_origin(&self, joint: usize) -> Vector3<f64> {
        self.links[joint].translation.vector
    }
}

impl KinematicChain {
    pub fn new(joints: Vec<Joint>, tip: Isometry3<f64>, layout: ChainLayout) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Config("chain has no joints".into()));
        }
        let n = joints.len();
        for j in &joints {
            if (j.axis.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("joint {} axis is not unit length", j.name)));
            }
            if !(j.q_min < j.q_max) || !(j.qdot_max > 0.0) {
                return Err(Error::Config(format!("joint {} has invalid limits", j.name)));
            }
        }
        let in_range = |k: &usize| *k < n;
        if !(layout.waist_joints.iter().all(in_range)
            && layout.torso_links.iter().all(in_range)
            && layout.arm_links.iter().all(in_range)
            && in_range(&layout.shoulder_joint)
            && in_range(&layout.wrist_joint))
        {
            return Err(Error::Config("chain layout refers to a missing joint".into()));
        }
        Ok(KinematicChain { joints, tip, layout })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn q_min(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.q_min).collect()
    }

    pub fn q_max(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.q_max).collect()
    }

    pub fn qdot_max(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.qdot_max).collect()
    }

    /// Distance between shoulder and wrist origins when the elbow is straight.
    pub fn arm_span(&self) -> f64 {
        let zero = vec![0.0; self.dof()];
        let pose = forward_kinematics(self, &zero);
        (pose.joint_origin(self.layout.wrist_joint) - pose.joint_origin(self.layout.shoulder_joint))
            .norm()
    }

    /// Shoulder-wrist distance relative to [`KinematicChain::arm_span`].
    pub fn elbow_extension(&self, q: &[f64]) -> f64 {
        let pose = forward_kinematics(self, q);
        (pose.joint_origin(self.layout.wrist_joint) - pose.joint_origin(self.layout.shoulder_joint))
            .norm()
            / self.arm_span()
    }

    /// Desk-scale upper body: three waist joints and a seven-joint arm,
    /// about 1.1 m from base to fingertip. Link points are spaced at most
    /// 5 cm apart.
    pub fn desk10() -> Self {
        let x = Vector3::x();
        let y = Vector3::y();
        let z = Vector3::z();
        let zero = Vector3::zeros();
        let torso_points = [-0.12, 0.0, 0.12]
            .iter()
            .flat_map(|&py| {
                [0.10, 0.15, 0.20, 0.25, 0.30]
                    .into_iter()
                    .map(move |pz| Point3::new(0.0, py, pz))
            })
            .collect();
        let joints = vec![
            Joint::revolute("waist_yaw", z, zero).with_limits(-1.0, 1.0, 1.5),
            Joint::revolute("waist_pitch", y, Vector3::new(0.0, 0.0, 0.05)).with_limits(-0.6, 0.9, 1.5),
            Joint::revolute("waist_roll", x, Vector3::new(0.0, 0.0, 0.05))
                .with_limits(-0.5, 0.5, 1.5)
                .with_points(torso_points),
            Joint::revolute("shoulder_pitch", y, Vector3::new(0.0, 0.18, 0.30)).with_limits(-2.5, 2.5, 2.0),
            Joint::revolute("shoulder_yaw", z, zero).with_limits(-1.6, 2.0, 2.0),
            Joint::revolute("upper_arm_twist", x, zero)
                .with_limits(-2.5, 2.5, 2.0)
                .with_segment_points(Vector3::new(0.05, 0.0, 0.0), Vector3::new(0.30, 0.0, 0.0), 6),
            Joint::revolute("elbow", y, Vector3::new(0.30, 0.0, 0.0)).with_limits(-2.6, -0.2, 2.0),
            Joint::revolute("forearm_twist", x, zero)
                .with_limits(-2.5, 2.5, 2.0)
                .with_segment_points(Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.28, 0.0, 0.0), 7),
            Joint::revolute("wrist_pitch", y, Vector3::new(0.28, 0.0, 0.0)).with_limits(-1.8, 1.8, 2.5),
            Joint::revolute("wrist_yaw", z, zero)
                .with_limits(-1.8, 1.8, 2.5)
                .with_segment_points(Vector3::new(0.04, 0.0, 0.0), Vector3::new(0.08, 0.0, 0.0), 2),
        ];
        let layout = ChainLayout {
            waist_joints: vec![0, 1, 2],
            torso_links: vec![2],
            arm_links: vec![5, 7, 9],
            shoulder_joint: 3,
            wrist_joint: 8,
        };
        let tip = Isometry3::translation(0.08, 0.0, 0.0);
        KinematicChain::new(joints, tip, layout).expect("preset chain is valid")
    }
}

/// Link frames from base to tip: `T_k = T_{k−1} · offset_k · Rot(axis_k, q_k)`.
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> ChainPose {
    assert_eq!(q.len(), chain.dof(), "joint vector length");
    let mut links = Vec::with_capacity(chain.dof());
    let mut frame = Isometry3::identity();
    for (joint, &angle) in chain.joints.iter().zip(q) {
        frame = frame * joint.offset * UnitQuaternion::from_axis_angle(&joint.axis, angle);
        links.push(frame);
    }
    let tip = frame * chain.tip;
    ChainPose { links, tip }
}

/// World rotation axes of all joints.
fn world_axes(chain: &KinematicChain, pose: &ChainPose) -> Vec<Vector3<f64>> {
    chain
        .joints
        .iter()
        .zip(&pose.links)
        .map(|(j, frame)| frame.rotation * j.axis.into_inner())
        .collect()
}

/// Linear-velocity Jacobian (3 × n) of `local` fixed to `link`.
pub fn point_jacobian(chain: &KinematicChain, q: &[f64], link: usize, local: &Point3<f64>) -> DMatrix<f64> {
    let pose = forward_kinematics(chain, q);
    point_jacobian_at(chain, &pose, link, local)
}

pub(crate) fn point_jacobian_at(
    chain: &KinematicChain,
    pose: &ChainPose,
    link: usize,
    local: &Point3<f64>,
) -> DMatrix<f64> {
    let p = pose.links[link] * local;
    let axes = world_axes(chain, pose);
    let mut jac = DMatrix::zeros(3, chain.dof());
    for (j, axis) in axes.iter().enumerate().take(link + 1) {
        let col = axis.cross(&(p.coords - pose.joint_origin(j)));
        jac.fixed_view_mut::<3, 1>(0, j).copy_from(&col);
    }
    jac
}

/// Angular-velocity Jacobian (3 × n) of `link`.
pub fn orientation_jacobian(chain: &KinematicChain, q: &[f64], link: usize) -> DMatrix<f64> {
    let pose = forward_kinematics(chain, q);
    orientation_jacobian_at(chain, &pose, link)
}

pub(crate) fn orientation_jacobian_at(chain: &KinematicChain, pose: &ChainPose, link: usize) -> DMatrix<f64> {
    let axes = world_axes(chain, pose);
    let mut jac = DMatrix::zeros(3, chain.dof());
    for (j, axis) in axes.iter().enumerate().take(link + 1) {
        jac.fixed_view_mut::<3, 1>(0, j).copy_from(axis);
    }
    jac
}

/// The hand point expressed in the last link frame.
pub fn tip_point(chain: &KinematicChain) -> Point3<f64> {
    Point3::from(chain.tip.translation.vector)
}
