//! Scenario description consumed by the engine.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::fusion::{Channel, Classifier};
use crate::geometry::Vec3;
use crate::human::HumanBody;
use crate::kinematics::KinematicChain;
use crate::predictor::PredictorConfig;
use crate::safety::IsoParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Safety scaling only.
    Baseline,
    /// Safety scaling plus predicted-slowdown warnings.
    #[default]
    Predictive,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Predictive => "predictive",
        }
    }
}

/// Joint-space waypoints visited in order, starting from wherever the robot
/// is when the task begins.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub label: String,
    pub waypoints: Vec<DVector<f64>>,
    pub s_dot_cap: f64,
}

/// How the scripted operator reacts to a slowdown warning.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Compliance {
    #[default]
    Ignore,
    /// After `delay` seconds, step `retreat_distance` metres radially away
    /// from the robot's goal and stay there until the next scheduled move.
    Comply { delay: f64, retreat_distance: f64 },
}

/// From time `t` on, walk towards `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledMove {
    pub t: f64,
    pub target: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanScript {
    pub body: HumanBody,
    pub start: Vec3,
    /// Sorted by time.
    pub schedule: Vec<ScheduledMove>,
    pub max_speed: f64,
    pub compliance: Compliance,
}

impl HumanScript {
    /// Target of the latest scheduled move that has started by `t`.
    pub fn target_at(&self, t: f64) -> Option<Vec3> {
        self.schedule.iter().take_while(|m| m.t <= t).last().map(|m| m.target)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_speed > 0.0 && self.max_speed.is_finite()) {
            return Err("human max_speed must be positive".into());
        }
        if self.body.capsules.is_empty() || !self.body.capsules.iter().all(|c| c.is_valid()) {
            return Err("human body needs at least one valid capsule".into());
        }
        if self.schedule.windows(2).any(|w| w[1].t < w[0].t) {
            return Err("human schedule must be sorted by time".into());
        }
        Ok(())
    }

    /// Start time of the first scheduled move strictly after `t`.
    pub fn next_move_after(&self, t: f64) -> Option<f64> {
        self.schedule.iter().find(|m| m.t > t).map(|m| m.t)
    }
}

/// A voice or gesture token delivered at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedInput {
    pub t: f64,
    pub channel: Channel,
    pub token: usize,
    pub payload: Option<Vec3>,
}

/// Cartesian points paired with joint configurations that reach them.
/// Pointing targets are turned into joint goals by inverse-distance
/// weighting of the anchors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkspaceMap {
    pub anchors: Vec<(Vec3, DVector<f64>)>,
}

impl WorkspaceMap {
    pub fn joint_target(&self, point: &Vec3) -> Option<DVector<f64>> {
        let first = self.anchors.first()?;
        let mut acc = DVector::zeros(first.1.len());
        let mut weight = 0.0;
        for (p, q) in &self.anchors {
            let d2 = (p - point).norm_squared();
            if d2 < 1e-18 {
                return Some(q.clone());
            }
            acc += q / d2;
            weight += 1.0 / d2;
        }
        Some(acc / weight)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub chain: KinematicChain,
    pub iso: IsoParams,
    pub predictor: PredictorConfig,
    pub initial_q: DVector<f64>,
    pub tasks: Vec<Task>,
    pub human: Option<HumanScript>,
    pub mode: Mode,
    pub seed: u64,
    pub timeout_s: f64,
    pub eps_stop: f64,
    pub recognition_time: f64,
    pub classifier: Classifier,
    pub inputs: Vec<ScriptedInput>,
    /// Goals for commands such as "go home" or "pick component 2"
    /// (`home`, `component_1`..`component_3`, `handover`).
    pub named_poses: BTreeMap<String, DVector<f64>>,
    pub workspace_map: WorkspaceMap,
    /// Path speed cap for tasks created by commands.
    pub command_s_dot_cap: f64,
}

pub const DEFAULT_TIMEOUT_S: f64 = 600.0;
pub const DEFAULT_EPS_STOP: f64 = 0.01;

impl Scenario {
    /// Bare scenario: no human, no tasks, predictive mode.
    pub fn new(name: impl Into<String>, chain: KinematicChain, initial_q: DVector<f64>) -> Self {
        Self {
            name: name.into(),
            chain,
            iso: IsoParams::default(),
            predictor: PredictorConfig::default(),
            initial_q,
            tasks: Vec::new(),
            human: None,
            mode: Mode::Predictive,
            seed: 0,
            timeout_s: DEFAULT_TIMEOUT_S,
            eps_stop: DEFAULT_EPS_STOP,
            recognition_time: crate::fusion::window::DEFAULT_RECOGNITION_TIME,
            classifier: Classifier::Lookup,
            inputs: Vec::new(),
            named_poses: BTreeMap::new(),
            workspace_map: WorkspaceMap::default(),
            command_s_dot_cap: 0.5,
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..self.clone() }
    }
}
