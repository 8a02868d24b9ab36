//! Run outputs.
//!
//! `log.csv` has one row per cycle, columns in this order:
//!
//! | columns | meaning |
//! |---|---|
//! | `cycle`, `t` | index, time (s) |
//! | `q_<j>` | joint positions (rad) |
//! | `qdot_<j>` | velocity applied over the previous cycle (rad/s) |
//! | `x_<j>` | command computed this cycle (rad/s) |
//! | `qddot_<j>` | commanded acceleration estimate (rad/s²) |
//! | `psi_<level>_<task>` | priority matrix, row-major, 1-based |
//! | `p_<label>` | candidate proportions |
//! | `transitioning` | 1 while between candidates |
//! | `d_min`, `d_torso` | arm and torso obstacle distances (m) |
//! | `hand_x`, `hand_y`, `hand_z` | hand position (m) |
//! | `position_error`, `orientation_error` | RSS hand errors (m, rad) |
//! | `residual_<task id>` | `‖A x − b‖` per task |
//! | `qp_iterations`, `velocity_flag` | solver work, limit flag |
//!
//! Reals are written as `{:.16e}` (17 significant digits), which parses
//! back to the identical `f64`. Wall-clock timings are not reproducible, so
//! they go to `timing.csv` instead. The summary is a flat JSON object.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Vector3};

use super::config::Mode;
use super::run::{CycleRecord, RunLog};
use crate::error::{Error, Result};

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(log: &RunLog) -> Vec<String> {
    let n = log.n_joints;
    let mut h = vec!["cycle".to_string(), "t".to_string()];
    for prefix in ["q", "qdot", "x", "qddot"] {
        h.extend((0..n).map(|j| format!("{prefix}_{j}")));
    }
    for level in 1..=log.n_levels {
        h.extend((1..=log.task_ids.len()).map(|task| format!("psi_{level}_{task}")));
    }
    h.extend(log.candidate_labels.iter().map(|l| format!("p_{l}")));
    for name in [
        "transitioning",
        "d_min",
        "d_torso",
        "hand_x",
        "hand_y",
        "hand_z",
        "position_error",
        "orientation_error",
    ] {
        h.push(name.to_string());
    }
    h.extend(log.task_ids.iter().map(|id| format!("residual_{id}")));
    h.push("qp_iterations".into());
    h.push("velocity_flag".into());
    h
}

fn row(r: &CycleRecord) -> Vec<String> {
    let mut out = vec![r.cycle.to_string(), fmt_real(r.t)];
    for v in [&r.q, &r.qdot, &r.x, &r.qddot] {
        out.extend(v.iter().map(|&x| fmt_real(x)));
    }
    for i in 0..r.psi.nrows() {
        out.extend(r.psi.row(i).iter().map(|&x| fmt_real(x)));
    }
    out.extend(r.p.iter().map(|&x| fmt_real(x)));
    out.push(u8::from(r.transitioning).to_string());
    for v in [r.d_min, r.d_torso, r.hand.x, r.hand.y, r.hand.z, r.position_error, r.orientation_error] {
        out.push(fmt_real(v));
    }
    out.extend(r.residuals.iter().map(|&x| fmt_real(x)));
    out.push(r.qp_iterations.to_string());
    out.push(u8::from(r.velocity_flag).to_string());
    out
}

pub fn write_log(log: &RunLog, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header(log)).map_err(|e| Error::csv(path, e))?;
    for r in &log.records {
        w.write_record(row(r)).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A parsed numeric table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| Error::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (k, record) in r.records().enumerate() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let values = record
                .iter()
                .map(|field| {
                    field.parse::<f64>().map_err(|_| {
                        Error::LogShape(format!("{}: row {k}: {field:?} is not a number", path.display()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != header.len() {
                return Err(Error::LogShape(format!(
                    "{}: row {k} has {} fields, header has {}",
                    path.display(),
                    values.len(),
                    header.len()
                )));
            }
            rows.push(values);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Indices of columns named `<prefix>_<suffix>`, in file order.
    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<usize> {
        let p = format!("{prefix}_");
        self.header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.strip_prefix(&p).is_some_and(|rest| !rest.is_empty()))
            .map(|(k, _)| k)
            .collect()
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::LogShape(format!("log has no {name:?} column")))
    }
}

/// Rebuilds the deterministic part of a run log from `log.csv`.
pub fn read_log(path: &Path, scenario: &str, mode: Mode) -> Result<RunLog> {
    let table = Table::read(path)?;
    let q = table.columns_with_prefix("q");
    let qdot = table.columns_with_prefix("qdot");
    let x = table.columns_with_prefix("x");
    let qddot = table.columns_with_prefix("qddot");
    let n = q.len();
    if qdot.len() != n || x.len() != n || qddot.len() != n {
        return Err(Error::LogShape("joint column groups differ in size".into()));
    }
    let psi_cols = table.columns_with_prefix("psi");
    let task_cols = table.columns_with_prefix("residual");
    let task_ids = task_cols
        .iter()
        .map(|&k| {
            table.header[k]["residual_".len()..]
                .parse::<u32>()
                .map_err(|_| Error::LogShape(format!("bad column {}", table.header[k])))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_tasks = task_ids.len();
    if n_tasks == 0 || psi_cols.len() % n_tasks != 0 {
        return Err(Error::LogShape("priority columns do not match the task count".into()));
    }
    let n_levels = psi_cols.len() / n_tasks;
    let p_cols = table.columns_with_prefix("p");
    let labels = p_cols
        .iter()
        .map(|&k| table.header[k]["p_".len()..].to_string())
        .collect();
    let [c_cycle, c_t, c_tr, c_d, c_dt, c_hx, c_hy, c_hz, c_pe, c_oe, c_it, c_vf] = [
        "cycle",
        "t",
        "transitioning",
        "d_min",
        "d_torso",
        "hand_x",
        "hand_y",
        "hand_z",
        "position_error",
        "orientation_error",
        "qp_iterations",
        "velocity_flag",
    ]
    .map(|name| table.require(name));
    let (c_cycle, c_t, c_tr, c_d, c_dt) = (c_cycle?, c_t?, c_tr?, c_d?, c_dt?);
    let (c_hx, c_hy, c_hz, c_pe, c_oe, c_it, c_vf) = (c_hx?, c_hy?, c_hz?, c_pe?, c_oe?, c_it?, c_vf?);

    let pick = |r: &Vec<f64>, cols: &[usize]| DVector::from_iterator(cols.len(), cols.iter().map(|&k| r[k]));
    let records: Vec<CycleRecord> = table
        .rows
        .iter()
        .map(|r| CycleRecord {
            cycle: r[c_cycle] as usize,
            t: r[c_t],
            q: pick(r, &q),
            qdot: pick(r, &qdot),
            x: pick(r, &x),
            qddot: pick(r, &qddot),
            psi: DMatrix::from_row_iterator(n_levels, n_tasks, psi_cols.iter().map(|&k| r[k])),
            p: p_cols.iter().map(|&k| r[k]).collect(),
            transitioning: r[c_tr] != 0.0,
            d_min: r[c_d],
            d_torso: r[c_dt],
            hand: Vector3::new(r[c_hx], r[c_hy], r[c_hz]),
            position_error: r[c_pe],
            orientation_error: r[c_oe],
            residuals: task_cols.iter().map(|&k| r[k]).collect(),
            qp_iterations: r[c_it] as usize,
            velocity_flag: r[c_vf] != 0.0,
        })
        .collect();
    let dt = if records.len() > 1 {
        records[1].t - records[0].t
    } else {
        f64::NAN
    };
    Ok(RunLog {
        scenario: scenario.to_string(),
        mode,
        dt,
        n_joints: n,
        task_ids,
        candidate_labels: labels,
        n_levels,
        records,
        timings: Vec::new(),
    })
}

/// Headline metrics of a run. Quantities undefined for an empty run are
/// `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub mode: Mode,
    pub cycles: usize,
    pub dt: f64,
    pub max_orientation_error: Option<f64>,
    pub max_position_error: Option<f64>,
    /// Trapezoidal integral of the RSS position error (m·s).
    pub integrated_position_error: f64,
    pub final_position_error: Option<f64>,
    pub min_d_min: Option<f64>,
    /// Largest `‖x_k − x_{k−1}‖_∞` (rad/s).
    pub max_velocity_jump: f64,
    /// Largest `‖Ψ_k − Ψ_{k−1}‖_max`.
    pub max_psi_step: f64,
    pub velocity_flags: usize,
    pub transition_cycles: usize,
    pub mean_solve_time: Option<f64>,
    pub max_solve_time: Option<f64>,
    pub mean_solve_time_transition: Option<f64>,
    pub mean_solve_time_steady: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn max_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
}

pub fn summarize(log: &RunLog) -> Summary {
    let r = &log.records;
    let integrated = r
        .windows(2)
        .map(|w| 0.5 * (w[0].position_error + w[1].position_error) * (w[1].t - w[0].t))
        .sum();
    let max_velocity_jump = r
        .windows(2)
        .map(|w| (&w[1].x - &w[0].x).amax())
        .fold(0.0, f64::max);
    let max_psi_step = r
        .windows(2)
        .map(|w| (&w[1].psi - &w[0].psi).amax())
        .fold(0.0, f64::max);
    let timed = log.timings.len() == r.len();
    let times = || log.timings.iter().map(|t| t.total);
    let split = |transition: bool| {
        if !timed {
            return None;
        }
        mean(
            r.iter()
                .zip(&log.timings)
                .filter(|(rec, _)| rec.transitioning == transition)
                .map(|(_, t)| t.total),
        )
    };
    Summary {
        scenario: log.scenario.clone(),
        mode: log.mode,
        cycles: r.len(),
        dt: log.dt,
        max_orientation_error: max_of(r.iter().map(|c| c.orientation_error)),
        max_position_error: max_of(r.iter().map(|c| c.position_error)),
        integrated_position_error: integrated,
        final_position_error: r.last().map(|c| c.position_error),
        min_d_min: r.iter().map(|c| c.d_min).reduce(f64::min),
        max_velocity_jump,
        max_psi_step,
        velocity_flags: r.iter().filter(|c| c.velocity_flag).count(),
        transition_cycles: r.iter().filter(|c| c.transitioning).count(),
        mean_solve_time: if timed { mean(times()) } else { None },
        max_solve_time: if timed { max_of(times()) } else { None },
        mean_solve_time_transition: split(true),
        mean_solve_time_steady: split(false),
    }
}

impl Summary {
    /// Flat JSON object with reals at 17 significant digits; undefined
    /// values are `null`.
    pub fn to_json(&self) -> String {
        let real = |v: f64| if v.is_finite() { fmt_real(v) } else { "null".into() };
        let opt = |v: Option<f64>| v.map_or("null".into(), real);
        let entries: Vec<(&str, String)> = vec![
            ("scenario", format!("{:?}", self.scenario)),
            ("mode", format!("{:?}", self.mode.as_str())),
            ("cycles", self.cycles.to_string()),
            ("dt", real(self.dt)),
            ("max_orientation_error", opt(self.max_orientation_error)),
            ("max_position_error", opt(self.max_position_error)),
            ("integrated_position_error", real(self.integrated_position_error)),
            ("final_position_error", opt(self.final_position_error)),
            ("min_d_min", opt(self.min_d_min)),
            ("max_velocity_jump", real(self.max_velocity_jump)),
            ("max_psi_step", real(self.max_psi_step)),
            ("velocity_flags", self.velocity_flags.to_string()),
            ("transition_cycles", self.transition_cycles.to_string()),
            ("mean_solve_time", opt(self.mean_solve_time)),
            ("max_solve_time", opt(self.max_solve_time)),
            ("mean_solve_time_transition", opt(self.mean_solve_time_transition)),
            ("mean_solve_time_steady", opt(self.mean_solve_time_steady)),
        ];
        let mut out = String::from("{\n");
        for (k, (key, value)) in entries.iter().enumerate() {
            let comma = if k + 1 < entries.len() { "," } else { "" };
            let _ = writeln!(out, "  \"{key}\": {value}{comma}");
        }
        out.push_str("}\n");
        out
    }
}

fn write_series(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    write_rows(path, header, rows.map(|r| r.iter().map(|&v| fmt_real(v)).collect()))
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn names(first: &str, prefix: &str, count: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((0..count).map(|j| format!("{prefix}_{j}")))
        .collect()
}

/// Maps a cycle to one row of a figure series.
type Row = Box<dyn Fn(&CycleRecord) -> Vec<f64>>;

/// Writes `log.csv`, `timing.csv`, `summary.json` and the `fig_*.csv`
/// plot series into `dir`, creating it if needed. Returns the written paths.
pub fn emit_outputs(log: &RunLog, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| dir.join(name);
    let mut written = Vec::new();

    let p = path("log.csv");
    write_log(log, &p)?;
    written.push(p);

    let p = path("summary.json");
    fs::write(&p, summarize(log).to_json()).map_err(|e| Error::io(&p, e))?;
    written.push(p);

    let mut h = vec!["cycle".to_string(), "t".to_string(), "total".to_string()];
    if let Some(first) = log.timings.first() {
        h.extend(first.levels.iter().map(|(level, _)| format!("level_{level}")));
    }
    let p = path("timing.csv");
    write_rows(
        &p,
        &h,
        log.records.iter().zip(&log.timings).map(|(r, t)| {
            let mut v = vec![r.cycle.to_string(), fmt_real(r.t), fmt_real(t.total)];
            v.extend(t.levels.iter().map(|&(_, secs)| fmt_real(secs)));
            v
        }),
    )?;
    written.push(p);

    let n = log.n_joints;
    let recs = &log.records;
    let mut proportion = vec!["t".to_string()];
    proportion.extend(log.candidate_labels.iter().map(|l| format!("p_{l}")));
    let series: Vec<(&str, Vec<String>, Row)> = vec![
        ("fig_proportion.csv", proportion, Box::new(|r| {
            std::iter::once(r.t).chain(r.p.iter().copied()).collect()
        })),
        ("fig_joint_velocity.csv", names("t", "x", n), Box::new(|r| {
            std::iter::once(r.t).chain(r.x.iter().copied()).collect()
        })),
        ("fig_joint_acceleration.csv", names("t", "qddot", n), Box::new(|r| {
            std::iter::once(r.t).chain(r.qddot.iter().copied()).collect()
        })),
        (
            "fig_hand_position.csv",
            ["t", "hand_x", "hand_y", "hand_z", "position_error"].map(String::from).to_vec(),
            Box::new(|r| vec![r.t, r.hand.x, r.hand.y, r.hand.z, r.position_error]),
        ),
        (
            "fig_min_distance.csv",
            ["t", "d_min", "d_torso"].map(String::from).to_vec(),
            Box::new(|r| vec![r.t, r.d_min, r.d_torso]),
        ),
        (
            "fig_orientation_error.csv",
            ["t", "orientation_error"].map(String::from).to_vec(),
            Box::new(|r| vec![r.t, r.orientation_error]),
        ),
    ];
    for (name, header, f) in &series {
        let p = path(name);
        write_series(&p, header, recs.iter().map(f))?;
        written.push(p);
    }
    Ok(written)
}

/// Per-cycle divergence between two logs.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub cycles: usize,
    /// `max(‖x_A − x_B‖_∞, ‖q_A − q_B‖_∞)` per cycle.
    pub per_cycle: Vec<f64>,
    pub max_command: f64,
    pub max_position: f64,
    pub max: f64,
    pub threshold: f64,
    pub first_exceeding: Option<usize>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "cycles: {}", self.cycles)?;
        writeln!(f, "max command divergence: {:.6e}", self.max_command)?;
        writeln!(f, "max position divergence: {:.6e}", self.max_position)?;
        match self.first_exceeding {
            Some(k) => write!(f, "first cycle above {:.3e}: {k}", self.threshold),
            None => write!(f, "no cycle above {:.3e}", self.threshold),
        }
    }
}

pub fn compare_tables(a: &Table, b: &Table, threshold: f64) -> Result<Divergence> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::LogShape(format!(
            "logs have {} and {} cycles",
            a.rows.len(),
            b.rows.len()
        )));
    }
    let (xa, xb) = (a.columns_with_prefix("x"), b.columns_with_prefix("x"));
    let (qa, qb) = (a.columns_with_prefix("q"), b.columns_with_prefix("q"));
    if xa.len() != xb.len() || qa.len() != qb.len() || xa.is_empty() {
        return Err(Error::LogShape("logs have different joint counts".into()));
    }
    let (ta, tb) = (a.require("t")?, b.require("t")?);
    if a.rows.len() > 1 {
        let dt_a = a.rows[1][ta] - a.rows[0][ta];
        let dt_b = b.rows[1][tb] - b.rows[0][tb];
        if (dt_a - dt_b).abs() > 1e-12 * dt_a.abs().max(1.0) {
            return Err(Error::LogShape(format!("logs use time steps {dt_a} and {dt_b}")));
        }
    }
    let diff = |ra: &[f64], rb: &[f64], ca: &[usize], cb: &[usize]| {
        ca.iter().zip(cb).map(|(&i, &j)| (ra[i] - rb[j]).abs()).fold(0.0, f64::max)
    };
    let mut per_cycle = Vec::with_capacity(a.rows.len());
    let (mut max_command, mut max_position) = (0.0f64, 0.0f64);
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let dx = diff(ra, rb, &xa, &xb);
        let dq = diff(ra, rb, &qa, &qb);
        max_command = max_command.max(dx);
        max_position = max_position.max(dq);
        per_cycle.push(dx.max(dq));
    }
    Ok(Divergence {
        cycles: per_cycle.len(),
        first_exceeding: per_cycle.iter().position(|&d| d > threshold),
        max: max_command.max(max_position),
        per_cycle,
        max_command,
        max_position,
        threshold,
    })
}

/// Compares two `log.csv` files.
pub fn compare_runs(a: &Path, b: &Path, threshold: f64) -> Result<Divergence> {
    compare_tables(&Table::read(a)?, &Table::read(b)?, threshold)
}
