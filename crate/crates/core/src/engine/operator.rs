//! Executes the scripted operator: walking at bounded speed, retreating on
//! warnings, and accepting live poses.

use std::f64::consts::FRAC_PI_4;

use nalgebra::Rotation3;

use crate::geometry::Vec3;
use crate::human::HumanState;

use super::scenario::{Compliance, HumanScript};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Retreat {
    /// When the operator starts moving away.
    start: f64,
    goal: Vec3,
    /// Fixed once the retreat starts.
    target: Option<Vec3>,
}

#[derive(Debug, Clone)]
pub struct Operator {
    script: HumanScript,
    state: HumanState,
    retreat: Option<Retreat>,
    /// Set once a live pose has been applied; the script no longer drives
    /// the operator afterwards.
    manual: bool,
    clamped: bool,
    max_step_speed: f64,
    /// Side (+1 left, -1 right) of the last walk-around, kept so the
    /// operator does not dither between sides.
    detour: f64,
}

impl Operator {
    pub fn new(script: HumanScript) -> Self {
        let state = HumanState::at_rest(script.start);
        Self { script, state, retreat: None, manual: false, clamped: false, max_step_speed: 0.0, detour: 1.0 }
    }

    pub fn script(&self) -> &HumanScript {
        &self.script
    }

    pub fn state(&self) -> &HumanState {
        &self.state
    }

    /// Whether the last live pose had to be clamped to the speed bound.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Fastest displacement per unit time seen so far.
    pub fn max_step_speed(&self) -> f64 {
        self.max_step_speed
    }

    /// Reacts to a slowdown warning issued at `t` for a goal at `goal`.
    /// Returns the time the operator will start moving away, if at all.
    pub fn on_warning(&mut self, t: f64, goal: Vec3) -> Option<f64> {
        match self.script.compliance {
            Compliance::Ignore => None,
            Compliance::Comply { delay, .. } => {
                let start = t + delay;
                self.retreat = Some(Retreat { start, goal, target: None });
                Some(start)
            }
        }
    }

    fn target(&mut self, t: f64) -> Option<Vec3> {
        if let Some(r) = self.retreat.as_mut() {
            if t >= r.start {
                let Compliance::Comply { retreat_distance, .. } = self.script.compliance else {
                    unreachable!("retreats are only scheduled when complying")
                };
                // Held until the next scheduled move; after the last one,
                // only for as long as the retreat walk takes plus a second.
                let superseded = match self.script.next_move_after(r.start) {
                    Some(next) => next <= t,
                    None => t >= r.start + retreat_distance / self.script.max_speed + 1.0,
                };
                if !superseded {
                    let pos = self.state.position;
                    let goal = r.goal;
                    return Some(*r.target.get_or_insert_with(|| pos + retreat_direction(&pos, &goal) * retreat_distance));
                }
                self.retreat = None;
            }
        }
        self.script.target_at(t)
    }

    /// Moves for one period starting at `t`. `allowed` vetoes positions the
    /// operator would not step into; the step is then shortened.
    pub fn advance(&mut self, t: f64, dt: f64, allowed: impl Fn(&Vec3) -> bool) {
        if self.manual {
            return;
        }
        let from = self.state.position;
        let Some(target) = self.target(t) else {
            self.state.velocity = Vec3::zeros();
            return;
        };
        let delta = target - from;
        let max_step = self.script.max_speed * dt;
        let step = if delta.norm() > max_step { delta * (max_step / delta.norm()) } else { delta };
        let mut to = from + step;
        if !allowed(&to) {
            // Walk around the arm when the direct step is refused.
            let side = self.detour;
            let sidestep = [1.0, 2.0, 3.0, 4.0]
                .into_iter()
                .flat_map(|k| [side * k, -side * k])
                .map(|k| (k, from + Rotation3::from_axis_angle(&Vec3::z_axis(), k * FRAC_PI_4) * step))
                .find(|(_, p)| allowed(p));
            if let Some((k, p)) = sidestep {
                self.detour = k.signum();
                self.set(p, (p - from) / dt, dt);
                return;
            }
            // Largest allowed fraction of the step, by bisection.
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..12 {
                let mid = 0.5 * (lo + hi);
                if allowed(&(from + step * mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            to = from + step * lo;
        }
        self.set(to, (to - from) / dt, dt);
    }

    /// Applies a live pose, limiting the displacement to what `max_speed`
    /// allows in one period.
    pub fn inject(&mut self, position: Vec3, velocity: Vec3, dt: f64) {
        self.manual = true;
        self.retreat = None;
        let from = self.state.position;
        let delta = position - from;
        let max_step = self.script.max_speed * dt;
        let mut clamped = false;
        let to = if delta.norm() > max_step + 1e-12 {
            clamped = true;
            from + delta * (max_step / delta.norm())
        } else {
            position
        };
        let velocity = if velocity.norm() > self.script.max_speed {
            clamped = true;
            velocity * (self.script.max_speed / velocity.norm())
        } else {
            velocity
        };
        self.clamped = clamped;
        self.state = HumanState { position: to, velocity };
        self.max_step_speed = self.max_step_speed.max((to - from).norm() / dt);
    }

    fn set(&mut self, to: Vec3, velocity: Vec3, dt: f64) {
        self.max_step_speed = self.max_step_speed.max((to - self.state.position).norm() / dt);
        self.state = HumanState { position: to, velocity };
    }
}

/// Horizontal unit vector pointing from `goal` to `pos`. When the operator
/// stands right on the goal, step away from the robot base instead.
pub fn retreat_direction(pos: &Vec3, goal: &Vec3) -> Vec3 {
    let away = Vec3::new(pos.x - goal.x, pos.y - goal.y, 0.0);
    if away.norm() > 1e-6 {
        return away.normalize();
    }
    let outward = Vec3::new(goal.x, goal.y, 0.0);
    if outward.norm() > 1e-6 {
        outward.normalize()
    } else {
        Vec3::x()
    }
}
