//! Priority-matrix scheduling by blending candidate hierarchies.
//!
//! The instantaneous priority matrix is a convex combination of candidate
//! matrices, `Ψ = Σ p_k Ψ_k`. Which vertex of the proportion simplex the
//! schedule heads for is decided by discrete events (e.g. "obstacle near")
//! and, optionally, by a distance-driven ramp toward an avoidance candidate.
//! Proportions move toward their goal at a bounded rate, so consecutive
//! priority matrices never differ by more than the rate limit in any entry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task_model::PriorityMatrix;

/// Proportions closer than this to their goal snap onto it.
const SNAP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    candidates: Vec<PriorityMatrix>,
    labels: Vec<String>,
}

impl CandidateSet {
    pub fn new(candidates: Vec<PriorityMatrix>, labels: Vec<String>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Config("at least one candidate hierarchy is required".into()));
        }
        if labels.len() != candidates.len() {
            return Err(Error::Config(format!(
                "{} labels for {} candidates",
                labels.len(),
                candidates.len()
            )));
        }
        let shape = (candidates[0].n_levels(), candidates[0].n_tasks());
        for (psi, label) in candidates.iter().zip(&labels) {
            if (psi.n_levels(), psi.n_tasks()) != shape {
                return Err(Error::Dimension(format!(
                    "candidate {label} is {}x{}, expected {}x{}",
                    psi.n_levels(),
                    psi.n_tasks(),
                    shape.0,
                    shape.1
                )));
            }
            psi.validate().map_err(Error::Priority)?;
        }
        Ok(CandidateSet { candidates, labels })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, k: usize) -> &PriorityMatrix {
        &self.candidates[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    #[default]
    Linear,
    Smoothstep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendPolicy {
    /// At or below this distance (m) the avoidance candidate takes over.
    pub d_low: f64,
    /// At or above this distance (m) the target candidate holds fully.
    pub d_high: f64,
    pub ramp: Ramp,
    /// Largest change of the priority matrix per control cycle.
    pub rate_limit: f64,
}

impl Default for BlendPolicy {
    fn default() -> Self {
        BlendPolicy {
            d_low: 0.05,
            d_high: 0.2,
            ramp: Ramp::Linear,
            rate_limit: 0.01,
        }
    }
}

impl BlendPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.d_low && self.d_low < self.d_high) {
            return Err(Error::Config(format!(
                "blend distances must satisfy 0 < d_low < d_high (got {}, {})",
                self.d_low, self.d_high
            )));
        }
        if !(self.rate_limit > 0.0) {
            return Err(Error::Config("rate_limit must be positive".into()));
        }
        Ok(())
    }
}

/// Weight of the nominal candidate for the minimum distance `d_min`.
pub fn proportion_from_distance(d_min: f64, policy: &BlendPolicy) -> f64 {
    let t = ((d_min - policy.d_low) / (policy.d_high - policy.d_low)).clamp(0.0, 1.0);
    match policy.ramp {
        Ramp::Linear => t,
        Ramp::Smoothstep => t * t * (3.0 - 2.0 * t),
    }
}

/// `Σ p_k Ψ_k`.
pub fn blend(candidates: &CandidateSet, p: &[f64]) -> Result<PriorityMatrix> {
    if p.len() != candidates.len() {
        return Err(Error::Dimension(format!(
            "{} proportions for {} candidates",
            p.len(),
            candidates.len()
        )));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Proportions { sum });
    }
    let first = candidates.get(0).values();
    let mut values = first.map(|_| 0.0);
    for (k, &w) in p.iter().enumerate() {
        if w == 1.0 {
            // Exact vertex.
            return Ok(candidates.get(k).clone());
        }
        if w != 0.0 {
            values += candidates.get(k).values() * w;
        }
    }
    // Proportions sum to one only up to rounding; every candidate entry is
    // in [0, 1], so the blend is too.
    values.apply(|v| *v = v.clamp(0.0, 1.0));
    Ok(PriorityMatrix::from_matrix(values))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Sitting exactly on the target candidate.
    Nominal,
    /// Between candidates.
    Transitioning,
    /// Sitting exactly on the avoidance candidate.
    Avoidance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleState {
    pub p: Vec<f64>,
    pub target_candidate: usize,
    pub mode: ScheduleMode,
}

impl ScheduleState {
    /// All weight on candidate `k`.
    pub fn at(k: usize, n_candidates: usize) -> Self {
        let mut p = vec![0.0; n_candidates];
        p[k] = 1.0;
        ScheduleState {
            p,
            target_candidate: k,
            mode: ScheduleMode::Nominal,
        }
    }

    /// The candidate holding all the weight, if any.
    pub fn vertex(&self) -> Option<usize> {
        self.p.iter().position(|&w| w == 1.0)
    }
}

/// Event-driven retargeting: on `event`, a schedule whose target is one of
/// `from` (any target when empty) retargets to `to`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventRule {
    pub event: String,
    pub from: Vec<usize>,
    pub to: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScheduleRules {
    /// Candidate blended in as the minimum distance drops below `d_high`.
    pub avoidance: Option<usize>,
    pub events: Vec<EventRule>,
}

impl ScheduleRules {
    pub fn validate(&self, n_candidates: usize) -> Result<()> {
        let bad = |k: usize| k >= n_candidates;
        if self.avoidance.is_some_and(bad)
            || self
                .events
                .iter()
                .any(|r| bad(r.to) || r.from.iter().copied().any(bad))
        {
            return Err(Error::Config("schedule refers to an unknown candidate".into()));
        }
        Ok(())
    }
}

/// Advances the schedule by one control cycle.
///
/// Events are applied in order, then the proportions move toward the goal
/// `w·e_target + (1 − w)·e_avoid` (`w` from [`proportion_from_distance`],
/// or just `e_target` without an avoidance candidate). The step is a convex
/// combination of the current proportions and the goal whose half-L1 length
/// is at most `rate_limit`, which bounds the max-norm change of the blended
/// priority matrix by the same amount.
pub fn step_schedule(
    state: &ScheduleState,
    d_min: f64,
    events: &[&str],
    policy: &BlendPolicy,
    rules: &ScheduleRules,
) -> Result<ScheduleState> {
    let n = state.p.len();
    let mut target = state.target_candidate;
    for &event in events {
        let mut known = false;
        for rule in rules.events.iter().filter(|r| r.event == event) {
            known = true;
            if rule.from.is_empty() || rule.from.contains(&target) {
                target = rule.to;
                break;
            }
        }
        if !known {
            return Err(Error::UnknownEvent(event.to_string()));
        }
    }

    let mut goal = vec![0.0; n];
    match rules.avoidance {
        Some(avoid) if avoid != target => {
            let w = proportion_from_distance(d_min, policy);
            goal[target] = w;
            goal[avoid] = 1.0 - w;
        }
        _ => goal[target] = 1.0,
    }

    let half_l1: f64 = 0.5
        * state
            .p
            .iter()
            .zip(&goal)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    let p = if half_l1 <= policy.rate_limit + SNAP {
        goal
    } else {
        let s = policy.rate_limit / half_l1;
        state
            .p
            .iter()
            .zip(&goal)
            .map(|(&a, &b)| (1.0 - s) * a + s * b)
            .collect()
    };

    let mode = if p[target] == 1.0 && Some(target) != rules.avoidance {
        ScheduleMode::Nominal
    } else if rules.avoidance.is_some_and(|a| p[a] == 1.0) {
        ScheduleMode::Avoidance
    } else {
        ScheduleMode::Transitioning
    };
    Ok(ScheduleState {
        p,
        target_candidate: target,
        mode,
    })
}
