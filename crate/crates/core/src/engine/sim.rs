//! Closed-loop simulation: one `step` is one control period.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::control::control_step;
use crate::fusion::vocab::Command;
use crate::fusion::{ChannelEvent, ClosedWindow, Fuser, FusionOutput};
use crate::geometry::{capsule_separation, Vec3};
use crate::human::{HumanBody, MovingCapsule};
use crate::kinematics::{forward_kinematics, ChainPose, KinematicsError};
use crate::predictor::{RolloutContext, RolloutSnapshot, Supervisor};
use crate::safety::separation_state;
use crate::trajectory::{ParamTrajectory, TrajectoryError};

use super::events::{compute_metrics, EpisodeResult, Event, EventKind, Speaker};
use super::operator::Operator;
use super::scenario::{Mode, Scenario, ScriptedInput, Task};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("unknown command class {0}")]
    UnknownClass(usize),
    #[error("{0}")]
    Rejected(String),
}

/// Input arriving from outside the scripted scenario, applied at the start
/// of the next period.
#[derive(Debug, Clone, PartialEq)]
pub enum Injection {
    HumanPose { position: Vec3, velocity: Vec3 },
    Input { channel: crate::fusion::Channel, token: usize, payload: Option<Vec3> },
}

/// Telemetry for one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickState {
    pub t: f64,
    pub q: Vec<f64>,
    pub s: Option<f64>,
    pub alpha: f64,
    pub min_separation: Option<f64>,
    pub v_max: Option<f64>,
    pub human: Option<[f64; 3]>,
    pub human_clamped: bool,
    pub paused: bool,
    pub task: Option<usize>,
    pub queued: usize,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
struct ActiveTask {
    id: usize,
    traj: ParamTrajectory,
    goal_tip: Vec3,
}

pub struct Engine {
    scenario: Scenario,
    ctx: RolloutContext,
    tick: u64,
    q: DVector<f64>,
    qd: DVector<f64>,
    active: Option<ActiveTask>,
    queue: VecDeque<Task>,
    tasks_started: usize,
    operator: Option<Operator>,
    fuser: Fuser,
    inputs: VecDeque<ScriptedInput>,
    injections: VecDeque<Injection>,
    paused: bool,
    supervisor: Supervisor,
    events: Vec<Event>,
    keep_alive: bool,
    finished: bool,
    state: TickState,
    /// Largest sum of nominal joint speeds seen, for the integration slack.
    max_speed_sum: f64,
}

impl Engine {
    pub fn new(scenario: Scenario) -> Result<Self, EngineError> {
        let n = scenario.chain.n_joints();
        if scenario.initial_q.len() != n {
            return Err(EngineError::Invalid(format!("initial_q has {} entries, robot has {n} joints", scenario.initial_q.len())));
        }
        for (i, task) in scenario.tasks.iter().enumerate() {
            if let Some(w) = task.waypoints.iter().find(|w| w.len() != n) {
                return Err(EngineError::Invalid(format!("task {i} has a waypoint with {} entries, robot has {n} joints", w.len())));
            }
        }
        scenario.iso.validate().map_err(EngineError::Invalid)?;
        scenario.predictor.validate().map_err(EngineError::Invalid)?;
        if let Some(h) = &scenario.human {
            h.validate().map_err(EngineError::Invalid)?;
        }
        if !(scenario.timeout_s > 0.0) || !(scenario.eps_stop >= 0.0) || !(scenario.recognition_time > 0.0) {
            return Err(EngineError::Invalid("timeout_s and recognition_time must be positive, eps_stop non-negative".into()));
        }
        let body = scenario.human.as_ref().map(|h| h.body.clone()).unwrap_or(HumanBody { capsules: Vec::new() });
        let ctx = RolloutContext {
            chain: scenario.chain.clone(),
            iso: scenario.iso,
            body,
            config: scenario.predictor.clone(),
        };
        let mut inputs: Vec<ScriptedInput> = scenario.inputs.clone();
        inputs.sort_by(|a, b| a.t.total_cmp(&b.t));
        let q = scenario.initial_q.clone();
        let state = TickState {
            t: 0.0,
            q: q.iter().copied().collect(),
            s: None,
            alpha: 0.0,
            min_separation: None,
            v_max: None,
            human: scenario.human.as_ref().map(|h| h.start.into()),
            human_clamped: false,
            paused: false,
            task: None,
            queued: scenario.tasks.len(),
            mode: scenario.mode,
        };
        Ok(Self {
            ctx,
            tick: 0,
            qd: DVector::zeros(n),
            q,
            active: None,
            queue: scenario.tasks.iter().cloned().collect(),
            tasks_started: 0,
            operator: scenario.human.clone().map(Operator::new),
            fuser: Fuser::new(scenario.recognition_time),
            inputs: inputs.into(),
            injections: VecDeque::new(),
            paused: false,
            supervisor: Supervisor::new(),
            events: Vec::new(),
            keep_alive: false,
            finished: false,
            state,
            max_speed_sum: 0.0,
            scenario,
        })
    }

    /// Keeps ticking with an empty task queue, waiting for commands.
    pub fn keep_alive(mut self, on: bool) -> Self {
        self.keep_alive = on;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.iso.t_r
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn state(&self) -> &TickState {
        &self.state
    }

    pub fn queued_tasks(&self) -> usize {
        self.queue.len()
    }

    pub fn active_task(&self) -> Option<usize> {
        self.active.as_ref().map(|a| a.id)
    }

    pub fn active_trajectory(&self) -> Option<&ParamTrajectory> {
        self.active.as_ref().map(|a| &a.traj)
    }

    pub fn warning_latched(&self) -> bool {
        self.supervisor.triggered()
    }

    pub fn human_position(&self) -> Option<Vec3> {
        self.operator.as_ref().map(|o| o.state().position)
    }

    pub fn inject(&mut self, injection: Injection) {
        self.injections.push_back(injection);
    }

    fn log(&mut self, t: f64, kind: EventKind) {
        self.events.push(Event { t, kind });
    }

    fn say(&mut self, t: f64, speaker: Speaker, text: impl Into<String>) {
        self.log(t, EventKind::Dialogue { speaker, text: text.into() });
    }

    /// Advances one control period. Returns `false` once the episode is over.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        if self.finished {
            return Ok(false);
        }
        let t = self.time();
        let dt = self.scenario.iso.t_r;
        if t >= self.scenario.timeout_s - 1e-9 {
            self.end(t, false, true);
            return Ok(false);
        }

        self.apply_injections(t);
        if self.active.is_none() {
            self.start_next_task(t)?;
        }

        let pose = forward_kinematics(&self.scenario.chain, &self.q)?;
        if let Some(op) = self.operator.as_mut() {
            let body = &op.script().body.clone();
            let floor = self.scenario.iso.minimum_separation();
            let current = clearance(&pose, body, &op.state().position);
            op.advance(t, dt, |p| {
                let c = clearance(&pose, body, p);
                c >= floor || c >= current
            });
        }

        self.process_inputs(t)?;
        if self.active.is_none() {
            self.start_next_task(t)?;
        }

        let humans: Vec<MovingCapsule> = match &self.operator {
            Some(op) => op.script().body.place(op.state()),
            None => Vec::new(),
        };
        let human_pos = self.operator.as_ref().map(|o| <[f64; 3]>::from(o.state().position));
        self.state.t = t;
        self.state.human = human_pos;
        self.state.human_clamped = self.operator.as_ref().is_some_and(|o| o.clamped());
        self.state.paused = self.paused;

        if let Some(mut active) = self.active.take() {
            let step = control_step(&self.scenario.chain, &self.scenario.iso, &active.traj, &self.qd, &humans)?;
            let alpha = if self.paused { 0.0 } else { step.scaling.alpha };
            self.max_speed_sum = self.max_speed_sum.max(step.nominal_qd.iter().map(|v| v.abs()).sum());
            let done = active.traj.advance(alpha, dt);
            self.q = active.traj.q();
            self.qd = if done { DVector::zeros(self.q.len()) } else { &step.nominal_qd * alpha };

            self.log(
                t,
                EventKind::Alpha {
                    alpha,
                    dt,
                    s: active.traj.s(),
                    binding: step.scaling.binding,
                    feasible: step.scaling.feasible,
                },
            );
            let min_sep = step.separation.min_distance();
            let v_max = step.worst_v_max();
            if let (Some(min_separation), Some(human)) = (min_sep, human_pos) {
                self.log(t, EventKind::Separation { min_separation, v_max, human });
            }
            self.state.alpha = alpha;
            self.state.min_separation = min_sep;
            self.state.v_max = v_max;
            self.state.s = Some(active.traj.s());

            if done {
                self.log(t + dt, EventKind::TaskDone { task: active.id });
                self.supervisor.reset();
            } else {
                if self.scenario.mode == Mode::Predictive {
                    self.run_predictor(t, &active);
                }
                self.active = Some(active);
            }
        } else {
            self.state.alpha = 0.0;
            self.state.s = None;
            self.state.v_max = None;
            self.state.min_separation = if humans.is_empty() {
                None
            } else {
                separation_state(&pose, &humans)?.min_distance()
            };
            if let (Some(min_separation), Some(human)) = (self.state.min_separation, human_pos) {
                self.log(t, EventKind::Separation { min_separation, v_max: None, human });
            }
        }
        self.state.q = self.q.iter().copied().collect();
        self.state.task = self.active.as_ref().map(|a| a.id);
        self.state.queued = self.queue.len();

        self.tick += 1;
        let idle = self.active.is_none() && self.queue.is_empty() && self.inputs.is_empty() && self.fuser.window().is_none();
        if idle && !self.keep_alive {
            self.end(self.time(), true, false);
            return Ok(false);
        }
        Ok(true)
    }

    fn run_predictor(&mut self, t: f64, active: &ActiveTask) {
        let human = self.operator.as_ref().map(|o| *o.state());
        let snapshot = || RolloutSnapshot { trajectory: active.traj.clone(), qd: self.qd.clone(), human };
        let Some(warning) = self.supervisor.supervise(&self.ctx, snapshot) else {
            return;
        };
        let text = format!(
            "I expect to need at least {:.1} s for a motion that should take {:.1} s. Please step away from my work area.",
            warning.t_virt, warning.t_rem
        );
        self.log(
            t,
            EventKind::Warning { code: "predicted_slowdown".into(), t_virt: warning.t_virt, t_rem: warning.t_rem, text },
        );
        if let Some(op) = self.operator.as_mut() {
            if let Some(start) = op.on_warning(t, active.goal_tip) {
                let text = format!("Moving away at t = {start:.1} s.");
                self.say(t, Speaker::Human, text);
            }
        }
    }

    fn end(&mut self, t: f64, completed: bool, timed_out: bool) {
        self.finished = true;
        self.log(t, EventKind::EpisodeEnd { completed, timed_out });
    }

    fn apply_injections(&mut self, t: f64) {
        let dt = self.scenario.iso.t_r;
        while let Some(inj) = self.injections.pop_front() {
            match inj {
                Injection::HumanPose { position, velocity } => match self.operator.as_mut() {
                    Some(op) => op.inject(position, velocity, dt),
                    None => log::warn!("ignoring human pose: scenario has no human"),
                },
                Injection::Input { channel, token, payload } => match ChannelEvent::new(channel, token, t, payload) {
                    Ok(ev) => self.ingest(ev, t),
                    Err(err) => self.say(t, Speaker::Robot, format!("Ignored input: {err}")),
                },
            }
        }
    }

    fn process_inputs(&mut self, t: f64) -> Result<(), EngineError> {
        while self.inputs.front().is_some_and(|i| i.t <= t + 1e-9) {
            let input = self.inputs.pop_front().unwrap();
            match ChannelEvent::new(input.channel, input.token, input.t, input.payload) {
                Ok(ev) => self.ingest(ev, t),
                Err(err) => self.say(t, Speaker::Robot, format!("Ignored input: {err}")),
            }
        }
        if let Some(window) = self.fuser.poll(t) {
            self.handle_window(t, window);
        }
        Ok(())
    }

    fn ingest(&mut self, ev: ChannelEvent, t: f64) {
        for out in self.fuser.ingest(ev, t) {
            match out {
                FusionOutput::Closed(w) => self.handle_window(t, w),
                FusionOutput::Overflow(e) => self.log(t, EventKind::Overflow { token: e.token }),
            }
        }
    }

    fn handle_window(&mut self, t: f64, window: ClosedWindow) {
        let command = self.scenario.classifier.classify(&window);
        let payload = window.payload.map(<[f64; 3]>::from);
        let (accepted, note) = match command {
            None => (false, "no command recognised".to_string()),
            Some(c) => match self.dispatch_command(c.id(), window.payload) {
                Ok(note) => (true, note),
                Err(err) => (false, err.to_string()),
            },
        };
        self.log(
            t,
            EventKind::Command {
                class: command.map(|c| c.id()),
                command: command.map(|c| c.name().to_string()),
                tokens: window.tokens,
                payload,
                accepted,
                note: note.clone(),
            },
        );
        self.say(t, Speaker::Robot, note);
    }

    /// Applies a fused command to the task queue and robot state. Returns a
    /// short reply for the operator.
    pub fn dispatch_command(&mut self, class: usize, payload: Option<Vec3>) -> Result<String, DispatchError> {
        let command = Command::from_id(class).ok_or(DispatchError::UnknownClass(class))?;
        let reject = |msg: &str| Err(DispatchError::Rejected(msg.to_string()));
        let cap = self.scenario.command_s_dot_cap;
        match command {
            Command::PlaceObjectThere | Command::PickPointed => {
                let Some(target) = payload else {
                    return reject("point at the target area first");
                };
                let Some(q) = self.scenario.workspace_map.joint_target(&target) else {
                    return reject("no workspace map to reach pointed targets");
                };
                let label = format!("{} at ({:.2}, {:.2}, {:.2})", command.name(), target.x, target.y, target.z);
                self.queue.push_back(Task { label: label.clone(), waypoints: vec![q], s_dot_cap: cap });
                Ok(format!("queued: {label}"))
            }
            Command::PickComponent1 | Command::PickComponent2 | Command::PickComponent3 | Command::GoHome | Command::Handover => {
                let key = match command {
                    Command::PickComponent1 => "component_1",
                    Command::PickComponent2 => "component_2",
                    Command::PickComponent3 => "component_3",
                    Command::GoHome => "home",
                    _ => "handover",
                };
                let Some(q) = self.scenario.named_poses.get(key).cloned() else {
                    return Err(DispatchError::Rejected(format!("no pose named {key}")));
                };
                self.queue.push_back(Task { label: command.name().to_string(), waypoints: vec![q], s_dot_cap: cap });
                Ok(format!("queued: {}", command.name()))
            }
            Command::ReplanTrajectory => {
                let Some(active) = self.active.as_mut() else {
                    return reject("no active motion to re-plan");
                };
                let k = active.traj.path.segment_index(active.traj.s());
                let remaining: Vec<DVector<f64>> = active.traj.path.waypoints()[k + 1..].to_vec();
                let traj = plan_from(&self.q, &remaining, &self.scenario.chain, active.traj.profile.cap())
                    .map_err(|e| DispatchError::Rejected(format!("re-plan failed: {e}")))?;
                if let Some(traj) = traj {
                    active.traj = traj;
                }
                self.supervisor.reset();
                Ok("re-planned the current motion".into())
            }
            Command::Pause => {
                if self.paused {
                    return reject("already paused");
                }
                self.paused = true;
                Ok("pausing".into())
            }
            Command::Resume => {
                if !self.paused {
                    return reject("not paused");
                }
                self.paused = false;
                Ok("resuming".into())
            }
            Command::CancelTask => {
                let n = self.queue.len();
                self.queue.clear();
                Ok(format!("cancelled {n} queued task(s)"))
            }
            Command::Confirm => Ok("confirmed".into()),
            Command::Deny => Ok("understood".into()),
            Command::MoveAwayAck => Ok("thank you".into()),
            Command::StatusQuery => Ok(match &self.active {
                Some(a) => format!("task {} at {:.0}%, {} queued", a.id, 100.0 * a.traj.s(), self.queue.len()),
                None => format!("idle, {} queued", self.queue.len()),
            }),
        }
    }

    fn start_next_task(&mut self, t: f64) -> Result<(), EngineError> {
        while let Some(task) = self.queue.pop_front() {
            let id = self.tasks_started;
            self.tasks_started += 1;
            let traj = plan_from(&self.q, &task.waypoints, &self.scenario.chain, task.s_dot_cap)?;
            let nominal_duration = traj.as_ref().map_or(0.0, |tr| tr.remaining_duration(0.0));
            self.log(t, EventKind::TaskStart { task: id, label: task.label.clone(), nominal_duration });
            self.supervisor.reset();
            match traj {
                Some(traj) => {
                    let end = traj.path.end().clone();
                    let goal_tip = forward_kinematics(&self.scenario.chain, &end)?.tip();
                    self.active = Some(ActiveTask { id, traj, goal_tip });
                    return Ok(());
                }
                // Already there.
                None => self.log(t, EventKind::TaskDone { task: id }),
            }
        }
        Ok(())
    }

    /// Ends the episode at the current time, e.g. on an operator request.
    pub fn stop(&mut self) {
        if !self.finished {
            let completed = self.active.is_none() && self.queue.is_empty();
            self.end(self.time(), completed, false);
        }
    }

    /// Runs to completion or timeout.
    pub fn run(mut self) -> Result<EpisodeResult, EngineError> {
        while self.step()? {}
        Ok(self.result())
    }

    pub fn result(&self) -> EpisodeResult {
        let mut r = compute_metrics(&self.events, self.scenario.eps_stop);
        r.mode = self.scenario.mode.as_str().to_string();
        if self.operator.is_some() {
            r.safety_floor = Some(self.scenario.iso.minimum_separation() - self.integration_slack());
            r.max_human_speed = self.operator.as_ref().map(|o| o.max_step_speed());
        }
        r
    }

    /// Distance the discrete loop may lose against the continuous-time
    /// bound: braking within one period plus the curvature of one Euler
    /// step of the arm.
    pub fn integration_slack(&self) -> f64 {
        let iso = &self.scenario.iso;
        let t2 = iso.t_r * iso.t_r;
        0.5 * iso.a_max * t2 + 0.5 * t2 * self.scenario.chain.reach() * self.max_speed_sum * self.max_speed_sum
    }
}

/// Plans from `q` through `waypoints`, skipping waypoints that coincide with
/// their predecessor. `None` when there is nowhere to go.
fn plan_from(
    q: &DVector<f64>,
    waypoints: &[DVector<f64>],
    chain: &crate::kinematics::KinematicChain,
    cap: f64,
) -> Result<Option<ParamTrajectory>, TrajectoryError> {
    let mut path = vec![q.clone()];
    for w in waypoints {
        if (w - path.last().unwrap()).norm() > 1e-9 {
            path.push(w.clone());
        }
    }
    if path.len() < 2 {
        return Ok(None);
    }
    ParamTrajectory::plan(path, chain.limits(), cap).map(Some)
}

/// Smallest surface distance between the arm and the body placed at `at`.
pub fn clearance(pose: &ChainPose, body: &HumanBody, at: &Vec3) -> f64 {
    let mut best = f64::INFINITY;
    for h in &body.capsules {
        let h = h.translated(at);
        for r in &pose.capsules {
            best = best.min(capsule_separation(&r.capsule, &h).distance);
        }
    }
    best
}

/// Runs one episode of `scenario`.
pub fn run_episode(scenario: &Scenario) -> Result<EpisodeResult, EngineError> {
    Engine::new(scenario.clone())?.run()
}
