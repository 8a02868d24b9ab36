//! Spherical obstacles and link-point distances.

use nalgebra::{DMatrix, Point3, RowDVector, Vector3};

use super::chain::{forward_kinematics, point_jacobian_at, ChainPose, KinematicChain};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vector3<f64>,
}

/// A sphere moving along a piecewise-linear path. Before the first waypoint
/// and after the last one it rests there.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    pub radius: f64,
    waypoints: Vec<Waypoint>,
}

impl Obstacle {
    pub fn new(radius: f64, waypoints: Vec<Waypoint>) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("obstacle radius must be positive, got {radius}")));
        }
        if waypoints.is_empty() {
            return Err(Error::Config("obstacle path needs at least one waypoint".into()));
        }
        if waypoints.windows(2).any(|w| !(w[0].t < w[1].t)) {
            return Err(Error::Config("obstacle waypoint times must increase".into()));
        }
        Ok(Obstacle { radius, waypoints })
    }

    pub fn fixed(radius: f64, center: Vector3<f64>) -> Result<Self> {
        Obstacle::new(radius, vec![Waypoint { t: 0.0, position: center }])
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn center_at(&self, t: f64) -> Vector3<f64> {
        let w = &self.waypoints;
        let first = &w[0];
        if t <= first.t {
            return first.position;
        }
        for pair in w.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if t <= b.t {
                let s = (t - a.t) / (b.t - a.t);
                return a.position + (b.position - a.position) * s;
            }
        }
        w[w.len() - 1].position
    }

    /// Time after which the obstacle no longer moves.
    pub fn rest_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].t
    }
}

/// Closest link point to an obstacle surface.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceWitness {
    /// Signed distance to the surface (m), negative inside the sphere.
    pub distance: f64,
    pub link: usize,
    pub local: Point3<f64>,
    pub world: Point3<f64>,
    /// `∂d/∂q` (1 × n).
    pub gradient: RowDVector<f64>,
}

/// Minimum of `‖p_k − center‖ − radius` over the points of `links`.
///
/// Links are scanned in ascending order and only a strictly smaller
/// distance replaces the current witness, so ties go to the lowest link.
/// Returns `None` when the links carry no points.
pub fn min_distance(
    chain: &KinematicChain,
    q: &[f64],
    center: &Vector3<f64>,
    radius: f64,
    links: &[usize],
) -> Option<DistanceWitness> {
    let pose = forward_kinematics(chain, q);
    min_distance_at(chain, &pose, center, radius, links)
}

pub(crate) fn min_distance_at(
    chain: &KinematicChain,
    pose: &ChainPose,
    center: &Vector3<f64>,
    radius: f64,
    links: &[usize],
) -> Option<DistanceWitness> {
    let mut sorted = links.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(f64, usize, Point3<f64>, Point3<f64>)> = None;
    for &link in &sorted {
        for local in &chain.joints[link].points {
            let world = pose.links[link] * local;
            let d = (world.coords - center).norm() - radius;
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, link, *local, world));
            }
        }
    }
    let (distance, link, local, world) = best?;
    let offset = world.coords - center;
    let norm = offset.norm();
    let gradient = if norm > 0.0 {
        let jac: DMatrix<f64> = point_jacobian_at(chain, pose, link, &local);
        (offset / norm).transpose() * jac
    } else {
        RowDVector::zeros(chain.dof())
    };
    Some(DistanceWitness {
        distance,
        link,
        local,
        world,
        gradient: RowDVector::from_iterator(chain.dof(), gradient.iter().copied()),
    })
}
