//! The subgradient run engine: schedules, trajectories, verdicts, exports.

pub mod export;
pub mod schedule;
pub mod trajectory;

pub use export::{summarize, trace_csv, RunSummary, TRACE_SCHEMA};
pub use schedule::{ScheduleError, StepSchedule};
pub use trajectory::{
    critical_point_check, detect_convergence, diameter, run, tail_diameters, window_diameter,
    window_diameter_prefiltered, EngineError, Trajectory, Verdict,
};
