//! Closed-loop collaboration episodes: the robot's safety-scaled motion,
//! the scripted operator, command dispatch and episode metrics.

pub mod events;
pub mod families;
pub mod operator;
pub mod scenario;
pub mod sim;

use serde::{Deserialize, Serialize};

pub use events::{compute_metrics, EpisodeResult, Event, EventKind};
pub use scenario::{Compliance, HumanScript, Mode, Scenario, ScheduledMove, ScriptedInput, Task, WorkspaceMap};
pub use sim::{run_episode, DispatchError, Engine, EngineError, Injection, TickState};

/// Baseline and predictive runs of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub baseline: EpisodeResult,
    pub predictive: EpisodeResult,
    /// Baseline minus predictive.
    pub execution_time_delta: f64,
    pub downtime_delta: f64,
    /// Reduction relative to the baseline, in percent.
    pub execution_time_reduction_pct: f64,
    pub downtime_reduction_pct: f64,
}

fn reduction_pct(base: f64, other: f64) -> f64 {
    if base > 0.0 {
        100.0 * (base - other) / base
    } else {
        0.0
    }
}

/// Runs `scenario` once per mode with everything else identical.
pub fn compare_runs(scenario: &Scenario) -> Result<Comparison, EngineError> {
    let baseline = run_episode(&scenario.with_mode(Mode::Baseline))?;
    let predictive = run_episode(&scenario.with_mode(Mode::Predictive))?;
    Ok(Comparison {
        scenario: scenario.name.clone(),
        execution_time_delta: baseline.execution_time - predictive.execution_time,
        downtime_delta: baseline.downtime - predictive.downtime,
        execution_time_reduction_pct: reduction_pct(baseline.execution_time, predictive.execution_time),
        downtime_reduction_pct: reduction_pct(baseline.downtime, predictive.downtime),
        baseline,
        predictive,
    })
}
