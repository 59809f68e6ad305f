//! Scenario and robot description files.
//!
//! A scenario file is one JSON object. Only `robot` is required; every other
//! key has a default. `robot` may hold the chain inline or name a robot file
//! relative to the scenario file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::families::standing_operator;
use crate::engine::scenario::{DEFAULT_EPS_STOP, DEFAULT_TIMEOUT_S};
use crate::engine::{Compliance, HumanScript, Mode, Scenario, ScheduledMove, ScriptedInput, Task, WorkspaceMap};
use crate::fusion::window::DEFAULT_RECOGNITION_TIME;
use crate::fusion::{load_model, ChannelEvent, Channel, Classifier};
use crate::geometry::{Capsule, Vec3};
use crate::human::HumanBody;
use crate::kinematics::{CapsuleAttachment, Joint, JointLimits, KinematicChain};
use crate::predictor::PredictorConfig;
use crate::safety::IsoParams;

/// One schema problem, located by a dotted field path such as
/// `robot.qd_max` or `tasks[2].waypoints[0]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Parse { context: String, source: serde_json::Error },
    #[error("invalid scenario:\n  {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Violation>),
}

impl ScenarioError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ScenarioError::Invalid(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    #[serde(default)]
    pub origin: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
    #[serde(default = "z_axis")]
    pub axis: [f64; 3],
}

fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapsuleSpec {
    pub link: usize,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

/// Robot description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub joints: Vec<JointSpec>,
    pub capsules: Vec<CapsuleSpec>,
    pub qd_min: Vec<f64>,
    pub qd_max: Vec<f64>,
    pub qdd_min: Vec<f64>,
    pub qdd_max: Vec<f64>,
}

impl RobotSpec {
    pub fn from_chain(chain: &KinematicChain) -> Self {
        let joints = chain
            .joints()
            .iter()
            .map(|j| {
                let (r, p, y) = j.origin.rotation.euler_angles();
                JointSpec { origin: j.origin.translation.vector.into(), rpy: [r, p, y], axis: j.axis.into_inner().into() }
            })
            .collect();
        let capsules = chain
            .capsules()
            .iter()
            .map(|c| CapsuleSpec { link: c.link, a: c.local.a.into(), b: c.local.b.into(), radius: c.local.radius })
            .collect();
        let l = chain.limits();
        let v = |d: &DVector<f64>| d.iter().copied().collect();
        Self {
            joints,
            capsules,
            qd_min: v(&l.qd_min),
            qd_max: v(&l.qd_max),
            qdd_min: v(&l.qdd_min),
            qdd_max: v(&l.qdd_max),
        }
    }

    fn check(&self, at: &str, out: &mut Vec<Violation>) {
        let n = self.joints.len();
        if n == 0 {
            push(out, format!("{at}.joints"), "at least one joint is required");
        }
        for (i, j) in self.joints.iter().enumerate() {
            let p = format!("{at}.joints[{i}]");
            if !finite(&j.origin) || !finite(&j.rpy) {
                push(out, format!("{p}.origin"), "must be finite");
            }
            if !finite(&j.axis) || Vec3::from(j.axis).norm() < 1e-9 {
                push(out, format!("{p}.axis"), "must be a non-zero vector");
            }
        }
        for (k, c) in self.capsules.iter().enumerate() {
            let p = format!("{at}.capsules[{k}]");
            if c.link >= n {
                push(out, format!("{p}.link"), format!("references link {} but the robot has {n} joints", c.link));
            }
            if !(c.radius > 0.0 && c.radius.is_finite()) {
                push(out, format!("{p}.radius"), "must be positive");
            }
            if !finite(&c.a) || !finite(&c.b) {
                push(out, p, "endpoints must be finite");
            }
        }
        for (name, v, negative) in [
            ("qd_min", &self.qd_min, true),
            ("qd_max", &self.qd_max, false),
            ("qdd_min", &self.qdd_min, true),
            ("qdd_max", &self.qdd_max, false),
        ] {
            let p = format!("{at}.{name}");
            if v.len() != n {
                push(out, p, format!("expected {n} entries (one per joint), got {}", v.len()));
            } else if let Some(i) = v.iter().position(|x| if negative { !(*x < 0.0) } else { !(*x > 0.0) } || !x.is_finite()) {
                let sign = if negative { "negative" } else { "positive" };
                push(out, format!("{p}[{i}]"), format!("must be {sign}"));
            }
        }
    }

    /// Builds the chain; call only after `check` reported nothing.
    pub fn to_chain(&self) -> Result<KinematicChain, crate::kinematics::KinematicsError> {
        let joints = self.joints.iter().map(|j| Joint::new(j.origin.into(), j.rpy.into(), j.axis.into())).collect();
        let capsules = self
            .capsules
            .iter()
            .map(|c| CapsuleAttachment { link: c.link, local: Capsule::new(c.a.into(), c.b.into(), c.radius) })
            .collect();
        let d = |v: &[f64]| DVector::from_row_slice(v);
        let limits =
            JointLimits { qd_min: d(&self.qd_min), qd_max: d(&self.qd_max), qdd_min: d(&self.qdd_min), qdd_max: d(&self.qdd_max) };
        KinematicChain::new(joints, capsules, limits)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotRef {
    Path(PathBuf),
    Inline(RobotSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub waypoints: Vec<Vec<f64>>,
    #[serde(default = "default_s_dot_cap")]
    pub s_dot_cap: f64,
}

fn default_s_dot_cap() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodyCapsuleSpec {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoveSpec {
    pub t: f64,
    pub target: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumanSpec {
    /// Capsules relative to the operator's reference point; a standing
    /// operator of radius 0.2 m when omitted.
    #[serde(default)]
    pub body: Option<Vec<BodyCapsuleSpec>>,
    pub start: [f64; 3],
    #[serde(default)]
    pub schedule: Vec<MoveSpec>,
    pub max_speed: f64,
    #[serde(default)]
    pub compliance: Compliance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSpec {
    pub t: f64,
    pub channel: Channel,
    pub token: usize,
    #[serde(default)]
    pub payload: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub point: [f64; 3],
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassifierSpec {
    /// `"lookup"`.
    Named(String),
    /// `{"model": "path/to/model.json"}`.
    Model { model: PathBuf },
}

/// Scenario file as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub robot: RobotRef,
    #[serde(default)]
    pub initial_q: Option<Vec<f64>>,
    #[serde(default)]
    pub iso: Option<IsoParams>,
    #[serde(default)]
    pub predictor: Option<PredictorConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub human: Option<HumanSpec>,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub timeout_s: Option<f64>,
    #[serde(default)]
    pub eps_stop: Option<f64>,
    #[serde(default)]
    pub recognition_time: Option<f64>,
    #[serde(default)]
    pub classifier: Option<ClassifierSpec>,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub named_poses: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub workspace_map: Vec<AnchorSpec>,
    #[serde(default)]
    pub command_s_dot_cap: Option<f64>,
}

impl ScenarioSpec {
    /// File form of `sc`. A trained classifier cannot be embedded; the
    /// spec falls back to lookup and the caller may point `classifier` at
    /// a model file.
    pub fn from_scenario(sc: &Scenario, robot: RobotRef) -> Self {
        let v = |q: &DVector<f64>| q.iter().copied().collect::<Vec<f64>>();
        Self {
            name: Some(sc.name.clone()),
            robot,
            initial_q: Some(v(&sc.initial_q)),
            iso: Some(sc.iso),
            predictor: Some(sc.predictor),
            tasks: sc
                .tasks
                .iter()
                .map(|t| TaskSpec { label: Some(t.label.clone()), waypoints: t.waypoints.iter().map(v).collect(), s_dot_cap: t.s_dot_cap })
                .collect(),
            human: sc.human.as_ref().map(|h| HumanSpec {
                body: Some(h.body.capsules.iter().map(|c| BodyCapsuleSpec { a: c.a.into(), b: c.b.into(), radius: c.radius }).collect()),
                start: h.start.into(),
                schedule: h.schedule.iter().map(|m| MoveSpec { t: m.t, target: m.target.into() }).collect(),
                max_speed: h.max_speed,
                compliance: h.compliance,
            }),
            mode: Some(sc.mode.as_str().to_string()),
            seed: sc.seed,
            timeout_s: Some(sc.timeout_s),
            eps_stop: Some(sc.eps_stop),
            recognition_time: Some(sc.recognition_time),
            classifier: None,
            inputs: sc
                .inputs
                .iter()
                .map(|i| InputSpec { t: i.t, channel: i.channel, token: i.token, payload: i.payload.map(Into::into) })
                .collect(),
            named_poses: sc.named_poses.iter().map(|(k, q)| (k.clone(), v(q))).collect(),
            workspace_map: sc.workspace_map.anchors.iter().map(|(p, q)| AnchorSpec { point: (*p).into(), q: v(q) }).collect(),
            command_s_dot_cap: Some(sc.command_s_dot_cap),
        }
    }
}

/// A validated scenario plus the non-fatal remarks made while loading it.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

fn push(out: &mut Vec<Violation>, path: impl Into<String>, message: impl Into<String>) {
    out.push(Violation { path: path.into(), message: message.into() });
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn check_len(out: &mut Vec<Violation>, path: String, v: &[f64], n: usize) {
    if v.len() != n {
        push(out, path, format!("expected {n} entries (one per joint), got {}", v.len()));
    } else if !finite(v) {
        push(out, path, "must be finite");
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

pub fn load_robot(path: &Path) -> Result<RobotSpec, ScenarioError> {
    serde_json::from_str(&read(path)?).map_err(|source| ScenarioError::Parse { context: path.display().to_string(), source })
}

/// Reads and validates a scenario file. Warnings are also sent to the log.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let loaded = parse_scenario(&text, base)?;
    for w in &loaded.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(loaded)
}

/// Parses scenario JSON; relative file references resolve against `base`.
pub fn parse_scenario(text: &str, base: &Path) -> Result<LoadedScenario, ScenarioError> {
    let spec: ScenarioSpec =
        serde_json::from_str(text).map_err(|source| ScenarioError::Parse { context: "scenario".into(), source })?;
    build_scenario(&spec, base)
}

pub fn build_scenario(spec: &ScenarioSpec, base: &Path) -> Result<LoadedScenario, ScenarioError> {
    let mut warnings = Vec::new();
    let mut bad = Vec::new();

    let robot = match &spec.robot {
        RobotRef::Inline(r) => r.clone(),
        RobotRef::Path(p) => load_robot(&base.join(p))?,
    };
    robot.check("robot", &mut bad);
    if !bad.is_empty() {
        // Everything below depends on the joint count.
        return Err(ScenarioError::Invalid(bad));
    }
    let chain = robot.to_chain().map_err(|e| ScenarioError::Invalid(vec![Violation { path: "robot".into(), message: e.to_string() }]))?;
    let n = chain.n_joints();
    let vector = |v: &[f64]| DVector::from_row_slice(v);

    let initial_q = match &spec.initial_q {
        Some(q) => {
            check_len(&mut bad, "initial_q".into(), q, n);
            vector(q)
        }
        None => DVector::zeros(n),
    };

    let iso = spec.iso.unwrap_or_default();
    if let Err(e) = iso.validate() {
        push(&mut bad, "iso", e);
    }

    let mode = match spec.mode.as_deref() {
        None | Some("predictive") => Mode::Predictive,
        Some("baseline") => Mode::Baseline,
        Some(other) => {
            push(&mut bad, "mode", format!("expected \"baseline\" or \"predictive\", got {other:?}"));
            Mode::Predictive
        }
    };
    let predictor = match spec.predictor {
        Some(p) => p,
        None => {
            if mode == Mode::Predictive {
                warnings.push("predictive mode without a \"predictor\" block; using defaults".to_string());
            }
            PredictorConfig::default()
        }
    };
    if let Err(e) = predictor.validate() {
        push(&mut bad, "predictor", e);
    }

    let mut tasks = Vec::with_capacity(spec.tasks.len());
    for (i, t) in spec.tasks.iter().enumerate() {
        if t.waypoints.is_empty() {
            push(&mut bad, format!("tasks[{i}].waypoints"), "at least one waypoint is required");
        }
        for (j, w) in t.waypoints.iter().enumerate() {
            check_len(&mut bad, format!("tasks[{i}].waypoints[{j}]"), w, n);
        }
        if !(t.s_dot_cap > 0.0 && t.s_dot_cap.is_finite()) {
            push(&mut bad, format!("tasks[{i}].s_dot_cap"), "must be positive");
        }
        tasks.push(Task {
            label: t.label.clone().unwrap_or_else(|| format!("task {i}")),
            waypoints: t.waypoints.iter().map(|w| vector(w)).collect(),
            s_dot_cap: t.s_dot_cap,
        });
    }

    let human = spec.human.as_ref().map(|h| build_human(h, &mut bad));

    let positive = |bad: &mut Vec<Violation>, name: &str, v: Option<f64>, default: f64| {
        let v = v.unwrap_or(default);
        if !(v > 0.0 && v.is_finite()) {
            push(bad, name, "must be positive");
        }
        v
    };
    let timeout_s = positive(&mut bad, "timeout_s", spec.timeout_s, DEFAULT_TIMEOUT_S);
    let recognition_time = positive(&mut bad, "recognition_time", spec.recognition_time, DEFAULT_RECOGNITION_TIME);
    let command_s_dot_cap = positive(&mut bad, "command_s_dot_cap", spec.command_s_dot_cap, 0.5);
    let eps_stop = spec.eps_stop.unwrap_or(DEFAULT_EPS_STOP);
    if !(0.0..1.0).contains(&eps_stop) {
        push(&mut bad, "eps_stop", "must lie in [0, 1)");
    }

    let classifier = match &spec.classifier {
        None => Classifier::Lookup,
        Some(ClassifierSpec::Named(s)) if s == "lookup" => Classifier::Lookup,
        Some(ClassifierSpec::Named(s)) => {
            push(&mut bad, "classifier", format!("unknown classifier {s:?}; use \"lookup\" or {{\"model\": path}}"));
            Classifier::Lookup
        }
        Some(ClassifierSpec::Model { model }) => match load_model(&base.join(model)) {
            Ok(m) if m.n_inputs() == crate::fusion::window::WINDOW_SLOTS && m.n_outputs() == crate::fusion::vocab::N_CLASSES => {
                Classifier::Network(m)
            }
            Ok(m) => {
                push(&mut bad, "classifier.model", format!("network maps {} inputs to {} classes", m.n_inputs(), m.n_outputs()));
                Classifier::Lookup
            }
            Err(e) => {
                push(&mut bad, "classifier.model", e.to_string());
                Classifier::Lookup
            }
        },
    };

    let mut inputs = Vec::with_capacity(spec.inputs.len());
    for (i, inp) in spec.inputs.iter().enumerate() {
        let payload = inp.payload.map(Vec3::from);
        if let Err(e) = ChannelEvent::new(inp.channel, inp.token, inp.t, payload) {
            push(&mut bad, format!("inputs[{i}]"), e.to_string());
        }
        if !(inp.t >= 0.0 && inp.t.is_finite()) {
            push(&mut bad, format!("inputs[{i}].t"), "must be non-negative");
        }
        inputs.push(ScriptedInput { t: inp.t, channel: inp.channel, token: inp.token, payload });
    }

    let mut named_poses = BTreeMap::new();
    for (k, q) in &spec.named_poses {
        check_len(&mut bad, format!("named_poses.{k}"), q, n);
        named_poses.insert(k.clone(), vector(q));
    }
    let mut anchors = Vec::with_capacity(spec.workspace_map.len());
    for (i, a) in spec.workspace_map.iter().enumerate() {
        check_len(&mut bad, format!("workspace_map[{i}].q"), &a.q, n);
        anchors.push((Vec3::from(a.point), vector(&a.q)));
    }

    if !bad.is_empty() {
        return Err(ScenarioError::Invalid(bad));
    }
    let mut scenario = Scenario::new(spec.name.clone().unwrap_or_else(|| "scenario".into()), chain, initial_q);
    scenario.iso = iso;
    scenario.predictor = predictor;
    scenario.tasks = tasks;
    scenario.human = human;
    scenario.mode = mode;
    scenario.seed = spec.seed;
    scenario.timeout_s = timeout_s;
    scenario.eps_stop = eps_stop;
    scenario.recognition_time = recognition_time;
    scenario.classifier = classifier;
    scenario.inputs = inputs;
    scenario.named_poses = named_poses;
    scenario.workspace_map = WorkspaceMap { anchors };
    scenario.command_s_dot_cap = command_s_dot_cap;
    Ok(LoadedScenario { scenario, warnings })
}

fn build_human(h: &HumanSpec, bad: &mut Vec<Violation>) -> HumanScript {
    let body = match &h.body {
        None => standing_operator(0.2),
        Some(caps) => {
            if caps.is_empty() {
                push(bad, "human.body", "at least one capsule is required");
            }
            for (k, c) in caps.iter().enumerate() {
                if !(c.radius > 0.0 && c.radius.is_finite()) {
                    push(bad, format!("human.body[{k}].radius"), "must be positive");
                }
                if !finite(&c.a) || !finite(&c.b) {
                    push(bad, format!("human.body[{k}]"), "endpoints must be finite");
                }
            }
            HumanBody { capsules: caps.iter().map(|c| Capsule { a: c.a.into(), b: c.b.into(), radius: c.radius }).collect() }
        }
    };
    if !finite(&h.start) {
        push(bad, "human.start", "must be finite");
    }
    if !(h.max_speed > 0.0 && h.max_speed.is_finite()) {
        push(bad, "human.max_speed", "must be positive");
    }
    let mut last = f64::NEG_INFINITY;
    for (k, m) in h.schedule.iter().enumerate() {
        if !(m.t >= last && m.t.is_finite()) {
            push(bad, format!("human.schedule[{k}].t"), "times must be finite and non-decreasing");
        }
        if !finite(&m.target) {
            push(bad, format!("human.schedule[{k}].target"), "must be finite");
        }
        last = m.t;
    }
    if let Compliance::Comply { delay, retreat_distance } = h.compliance {
        if !(delay >= 0.0 && delay.is_finite()) {
            push(bad, "human.compliance.delay", "must be non-negative");
        }
        if !(retreat_distance > 0.0 && retreat_distance.is_finite()) {
            push(bad, "human.compliance.retreat_distance", "must be positive");
        }
    }
    HumanScript {
        body,
        start: h.start.into(),
        schedule: h.schedule.iter().map(|m| ScheduledMove { t: m.t, target: m.target.into() }).collect(),
        max_speed: h.max_speed,
        compliance: h.compliance,
    }
}
