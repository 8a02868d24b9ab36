//! Closed-loop simulation: schedule, tasks, hierarchy solve, integration.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};

use super::config::{Mode, Scenario, TriggerCondition};
use crate::baseline::solve_strict_hierarchy;
use crate::error::{Error, Result};
use crate::hqp::solve_hierarchy;
use crate::robot::{make_tasks, step, RobotState};
use crate::schedule::{blend, step_schedule, ScheduleMode, ScheduleState};
use crate::task_model::TaskLibrary;

/// One control cycle. Everything here is deterministic; wall-clock timing
/// lives in [`CycleTiming`].
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub t: f64,
    pub q: DVector<f64>,
    /// Velocity applied over the previous cycle.
    pub qdot: DVector<f64>,
    /// Command computed this cycle.
    pub x: DVector<f64>,
    /// `(x − qdot) / dt`, the commanded acceleration estimate.
    pub qddot: DVector<f64>,
    pub psi: DMatrix<f64>,
    pub p: Vec<f64>,
    pub transitioning: bool,
    pub d_min: f64,
    pub d_torso: f64,
    pub hand: Vector3<f64>,
    /// RSS hand position error (m).
    pub position_error: f64,
    /// RSS hand orientation error (rad).
    pub orientation_error: f64,
    /// `‖A_j x − b_j‖` per task, library order.
    pub residuals: Vec<f64>,
    pub qp_iterations: usize,
    pub velocity_flag: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleTiming {
    /// Task generation, scheduling and hierarchy solve (s).
    pub total: f64,
    /// Hierarchy solve per level number, including the constraint
    /// pre-level 0 when present (s).
    pub levels: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub scenario: String,
    pub mode: Mode,
    pub dt: f64,
    pub n_joints: usize,
    pub task_ids: Vec<u32>,
    pub candidate_labels: Vec<String>,
    pub n_levels: usize,
    pub records: Vec<CycleRecord>,
    pub timings: Vec<CycleTiming>,
}

impl RunLog {
    pub fn d_min_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d_min).collect()
    }
}

fn fired(condition: TriggerCondition, value: f64, t: f64, d_min: f64, extension: f64) -> bool {
    match condition {
        TriggerCondition::DMinBelow => d_min < value,
        TriggerCondition::DMinAbove => d_min > value,
        TriggerCondition::ElbowExtensionAbove => extension > value,
        TriggerCondition::TimeAfter => t >= value,
    }
}

/// Runs `scenario` for all its cycles.
pub fn run_scenario(scenario: &Scenario) -> Result<RunLog> {
    let chain = &scenario.chain;
    let n = chain.dof();
    let dt = scenario.dt;
    let n_cand = scenario.candidates.len();
    let mut log = RunLog {
        scenario: scenario.name.clone(),
        mode: scenario.mode,
        dt,
        n_joints: n,
        task_ids: scenario.tasks.iter().map(|t| t.id).collect(),
        candidate_labels: scenario.candidates.labels().to_vec(),
        n_levels: scenario.candidates.get(0).n_levels(),
        records: Vec::with_capacity(scenario.cycles()),
        timings: Vec::with_capacity(scenario.cycles()),
    };
    let mut state = RobotState::at_rest(scenario.initial_q.clone());
    let mut schedule = ScheduleState::at(scenario.initial_candidate, n_cand);
    let mut triggered = vec![false; scenario.triggers.len()];

    for cycle in 0..scenario.cycles() {
        let t = cycle as f64 * dt;
        state.t = t;
        let wrap = |e: Error| Error::Cycle {
            cycle,
            time: t,
            source: Box::new(e),
        };
        let start = Instant::now();
        let center = scenario.obstacle.center_at(t);
        let (tasks, constraints, frame) = make_tasks(
            chain,
            &state,
            &scenario.tasks,
            &scenario.constraints,
            &center,
            scenario.obstacle.radius,
            dt,
        )
        .map_err(wrap)?;
        let d_min = frame.d_min();

        let extension = if scenario.triggers.is_empty() {
            0.0
        } else {
            chain.elbow_extension(state.q.as_slice())
        };
        let mut events = Vec::new();
        for (k, trigger) in scenario.triggers.iter().enumerate() {
            if !triggered[k] && fired(trigger.when, trigger.value, t, d_min, extension) {
                triggered[k] = true;
                events.push(trigger.event.as_str());
            }
        }
        schedule = step_schedule(&schedule, d_min, &events, &scenario.policy, &scenario.rules)
            .map_err(wrap)?;
        let psi = blend(&scenario.candidates, &schedule.p).map_err(wrap)?;

        let library = TaskLibrary::new(n, tasks, constraints).map_err(wrap)?;
        let solution = match scenario.mode {
            Mode::RhpHqp => solve_hierarchy(&psi, &library, &scenario.solver),
            Mode::StrictHqpBaseline => solve_strict_hierarchy(&psi, &library, &scenario.solver),
        }
        .map_err(wrap)?;
        let total = start.elapsed().as_secs_f64();

        let x = solution.x.clone();
        let (next, violation) = step(chain, &state, &x, dt, scenario.solver.qp_tolerance).map_err(wrap)?;
        log.records.push(CycleRecord {
            cycle,
            t,
            q: state.q.clone(),
            qdot: state.qdot.clone(),
            qddot: (&x - &state.qdot) / dt,
            x,
            psi: psi.values().clone(),
            p: schedule.p.clone(),
            transitioning: schedule.mode == ScheduleMode::Transitioning,
            d_min,
            d_torso: frame.torso.as_ref().map_or(f64::INFINITY, |w| w.distance),
            hand: frame.pose.tip.translation.vector,
            position_error: frame.position_error.norm(),
            orientation_error: frame.orientation_error.norm(),
            residuals: library.tasks().iter().map(|task| task.residual(&solution.x)).collect(),
            qp_iterations: solution.total_qp_iterations(),
            velocity_flag: violation.is_some(),
        });
        log.timings.push(CycleTiming {
            total,
            levels: solution.levels.iter().map(|l| (l.level, l.solve_time.as_secs_f64())).collect(),
        });
        state = next;
    }
    Ok(log)
}
