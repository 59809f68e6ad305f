//! Predictive slowdown simulator.
//!
//! For every planned trajectory a virtual copy of the robot replays the rest
//! of the path, faster than real time, against a prediction of the human.
//! The safety layer runs unchanged inside the rollout. If the virtual robot
//! needs far longer than the nominal remaining time, the operator is warned
//! once, so they can step aside before the real robot stalls.

use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::control_step;
use crate::human::{HumanBody, HumanState};
use crate::kinematics::KinematicChain;
use crate::safety::IsoParams;
use crate::trajectory::ParamTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HumanPredictorKind {
    #[default]
    Frozen,
    ConstantVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Warn when the virtual time exceeds `gamma` times the nominal remaining time.
    pub gamma: f64,
    pub human_predictor: HumanPredictorKind,
    /// Virtual steps computed per real control period.
    pub rollout_rate_multiplier: usize,
    /// Hard bound on the length of one rollout.
    pub max_rollout_steps: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            gamma: 1.5,
            human_predictor: HumanPredictorKind::Frozen,
            rollout_rate_multiplier: 50,
            max_rollout_steps: 20_000,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err("gamma must be greater than 1".into());
        }
        if self.rollout_rate_multiplier == 0 {
            return Err("rollout_rate_multiplier must be at least 1".into());
        }
        if self.max_rollout_steps == 0 {
            return Err("max_rollout_steps must be at least 1".into());
        }
        Ok(())
    }
}

pub fn predict_human(state: &HumanState, kind: HumanPredictorKind, horizon: f64) -> HumanState {
    match kind {
        HumanPredictorKind::Frozen => *state,
        HumanPredictorKind::ConstantVelocity => HumanState {
            position: state.position + state.velocity * horizon,
            velocity: state.velocity,
        },
    }
}

/// True when the rollout is running late by more than `gamma`.
///
/// A trajectory with at most one control period left never triggers.
pub fn check_time(t_virt: f64, t_rem: f64, gamma: f64, t_r: f64) -> bool {
    if t_rem <= t_r {
        return false;
    }
    t_virt > gamma * t_rem
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorOutcome {
    pub triggered: bool,
    pub completed: bool,
    /// Neither triggered nor completed within `max_rollout_steps`.
    pub exhausted: bool,
    pub t_virt: f64,
    pub t_rem: f64,
    pub steps: usize,
    /// `(s, alpha)` for every virtual step.
    pub alpha_trace: Vec<(f64, f64)>,
}

/// Everything a rollout needs besides the state it starts from.
#[derive(Debug, Clone)]
pub struct RolloutContext {
    pub chain: KinematicChain,
    pub iso: IsoParams,
    pub body: HumanBody,
    pub config: PredictorConfig,
}

/// Real robot and human state a rollout starts from.
#[derive(Debug, Clone)]
pub struct RolloutSnapshot {
    pub trajectory: ParamTrajectory,
    pub qd: DVector<f64>,
    /// `None` when no human is present.
    pub human: Option<HumanState>,
}

/// A rollout that can be advanced a few steps at a time.
#[derive(Debug, Clone)]
pub struct Rollout {
    trajectory: ParamTrajectory,
    qd: DVector<f64>,
    human: Option<HumanState>,
    t_rem: f64,
    steps: usize,
    alpha_trace: Vec<(f64, f64)>,
}

impl Rollout {
    pub fn start(snapshot: RolloutSnapshot) -> Self {
        let t_rem = snapshot.trajectory.remaining_duration(snapshot.trajectory.s());
        Self {
            trajectory: snapshot.trajectory,
            qd: snapshot.qd,
            human: snapshot.human,
            t_rem,
            steps: 0,
            alpha_trace: Vec::new(),
        }
    }

    pub fn t_virt(&self, t_r: f64) -> f64 {
        self.steps as f64 * t_r
    }

    /// Runs at most `budget` virtual steps. Returns the outcome once the
    /// rollout has terminated.
    pub fn step(&mut self, ctx: &RolloutContext, budget: usize) -> Option<PredictorOutcome> {
        let t_r = ctx.iso.t_r;
        if self.trajectory.is_finished() {
            return Some(self.finish(t_r, false, true));
        }
        for _ in 0..budget {
            if self.steps >= ctx.config.max_rollout_steps {
                return Some(self.finish(t_r, false, false));
            }
            let humans = match &self.human {
                Some(h) => ctx.body.place(&predict_human(h, ctx.config.human_predictor, self.t_virt(t_r))),
                None => Vec::new(),
            };
            let alpha = match control_step(&ctx.chain, &ctx.iso, &self.trajectory, &self.qd, &humans) {
                Ok(step) => {
                    self.qd = step.commanded_qd();
                    step.scaling.alpha
                }
                Err(err) => {
                    log::error!("rollout aborted: {err}");
                    return Some(self.finish(t_r, false, false));
                }
            };
            self.alpha_trace.push((self.trajectory.s(), alpha));
            let done = self.trajectory.advance(alpha, t_r);
            self.steps += 1;
            if done {
                return Some(self.finish(t_r, false, true));
            }
            if check_time(self.t_virt(t_r), self.t_rem, ctx.config.gamma, t_r) {
                return Some(self.finish(t_r, true, false));
            }
        }
        None
    }

    fn finish(&mut self, t_r: f64, triggered: bool, completed: bool) -> PredictorOutcome {
        PredictorOutcome {
            triggered,
            completed,
            exhausted: !triggered && !completed,
            t_virt: self.t_virt(t_r),
            t_rem: self.t_rem,
            steps: self.steps,
            alpha_trace: std::mem::take(&mut self.alpha_trace),
        }
    }
}

/// Runs one rollout to termination.
pub fn run_rollout(ctx: &RolloutContext, snapshot: RolloutSnapshot) -> PredictorOutcome {
    let mut rollout = Rollout::start(snapshot);
    loop {
        if let Some(outcome) = rollout.step(ctx, ctx.config.max_rollout_steps) {
            return outcome;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowdownWarning {
    pub t_virt: f64,
    pub t_rem: f64,
}

/// Drives rollouts across real control periods and enforces the
/// one-warning-per-trajectory latch.
#[derive(Debug, Clone, Default)]
pub struct Supervisor {
    triggered: bool,
    active: Option<Rollout>,
    rollouts_started: usize,
}

impl Supervisor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Call whenever a new trajectory becomes active.
    pub fn reset(&mut self) {
        self.triggered = false;
        self.active = None;
    }

    pub fn triggered(&self) -> bool {
        self.triggered
    }

    pub fn rollouts_started(&self) -> usize {
        self.rollouts_started
    }

    /// Advances the predictor by one real period. `snapshot` is only invoked
    /// when a new rollout has to start from the current real state.
    pub fn supervise(
        &mut self,
        ctx: &RolloutContext,
        snapshot: impl FnOnce() -> RolloutSnapshot,
    ) -> Option<SlowdownWarning> {
        if self.triggered {
            return None;
        }
        let rollout = self.active.get_or_insert_with(|| {
            self.rollouts_started += 1;
            Rollout::start(snapshot())
        });
        let outcome = rollout.step(ctx, ctx.config.rollout_rate_multiplier)?;
        self.active = None;
        if outcome.triggered {
            self.triggered = true;
            Some(SlowdownWarning { t_virt: outcome.t_virt, t_rem: outcome.t_rem })
        } else {
            None
        }
    }
}

/// Runs rollouts on a background thread. Jobs are answered in submission
/// order.
pub struct RolloutWorker {
    jobs: Option<Sender<(u64, RolloutSnapshot)>>,
    results: Receiver<(u64, PredictorOutcome)>,
    handle: Option<JoinHandle<()>>,
}

impl RolloutWorker {
    pub fn spawn(ctx: Arc<RolloutContext>) -> Self {
        let (job_tx, job_rx) = mpsc::channel::<(u64, RolloutSnapshot)>();
        let (res_tx, res_rx) = mpsc::channel();
        let handle = thread::spawn(move || {
            for (id, snapshot) in job_rx {
                if res_tx.send((id, run_rollout(&ctx, snapshot))).is_err() {
                    break;
                }
            }
        });
        Self { jobs: Some(job_tx), results: res_rx, handle: Some(handle) }
    }

    pub fn submit(&self, id: u64, snapshot: RolloutSnapshot) {
        if let Some(tx) = &self.jobs {
            // The worker only exits after the sender is dropped.
            let _ = tx.send((id, snapshot));
        }
    }

    pub fn try_recv(&self) -> Option<(u64, PredictorOutcome)> {
        self.results.try_recv().ok()
    }

    pub fn recv(&self) -> Option<(u64, PredictorOutcome)> {
        self.results.recv().ok()
    }
}

impl Drop for RolloutWorker {
    fn drop(&mut self) {
        self.jobs.take();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}
