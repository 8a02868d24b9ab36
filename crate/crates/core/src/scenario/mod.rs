//! Scenario files, the closed-loop runner and its outputs.

mod config;
mod output;
mod run;

pub use config::{Mode, Scenario, Trigger, TriggerCondition, SCHEMA_VERSION};
pub use output::{
    compare_runs, compare_tables, emit_outputs, fmt_real, read_log, summarize, write_log,
    Divergence, Summary, Table,
};
pub use run::{run_scenario, CycleRecord, CycleTiming, RunLog};
