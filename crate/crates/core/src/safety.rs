//! Speed-and-separation monitoring.
//!
//! [`iso_speed_limit`] gives the largest admissible approach speed of a robot
//! link toward the operator for a measured separation and human approach
//! speed. [`solve_scaling`] then picks the largest path-speed scaling factor
//! that keeps every link under its limit while respecting joint velocity and
//! acceleration bounds.

use nalgebra::{DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{capsule_separation, SeparationGeometry};
use crate::human::MovingCapsule;
use crate::kinematics::{modified_jacobian_row_at, ChainPose, JointLimits, KinematicsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsoParams {
    /// Maximum robot deceleration (m/s^2).
    pub a_max: f64,
    /// Reaction time, also used as the control period (s).
    #[serde(rename = "T_r")]
    pub t_r: f64,
    /// Intrusion distance (m).
    #[serde(rename = "C")]
    pub c: f64,
    /// Human position uncertainty (m).
    #[serde(rename = "Z_d")]
    pub z_d: f64,
    /// Robot position uncertainty (m).
    #[serde(rename = "Z_r")]
    pub z_r: f64,
}

impl Default for IsoParams {
    fn default() -> Self {
        Self { a_max: 2.5, t_r: 0.1, c: 0.1, z_d: 0.05, z_r: 0.05 }
    }
}

impl IsoParams {
    /// `C + Z_d + Z_r`: separation at which the admissible speed reaches zero
    /// for a static human.
    pub fn minimum_separation(&self) -> f64 {
        self.c + self.z_d + self.z_r
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err("a_max must be positive".into());
        }
        if !(self.t_r > 0.0 && self.t_r.is_finite()) {
            return Err("T_r must be positive".into());
        }
        for (name, v) in [("C", self.c), ("Z_d", self.z_d), ("Z_r", self.z_r)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Maximum robot speed toward the human.
///
/// `separation` is clamped at zero and a receding human (`v_h < 0`) counts as
/// static. When the square-root argument turns negative the limit is zero.
pub fn iso_speed_limit(iso: &IsoParams, separation: f64, v_h: f64) -> f64 {
    let v_h = v_h.max(0.0);
    let k = iso.minimum_separation() - separation.max(0.0);
    let reaction = iso.a_max * iso.t_r;
    let arg = v_h * v_h + reaction * reaction - 2.0 * iso.a_max * k;
    if arg <= 0.0 {
        return 0.0;
    }
    (arg.sqrt() - reaction - v_h).max(0.0)
}

/// Closest human contact of one robot link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSeparation {
    pub link: usize,
    /// Signed surface distance (negative on penetration).
    pub distance: f64,
    /// Separation used by the speed limit, clamped at zero.
    pub s_p: f64,
    /// Human speed toward the robot along the separation axis, clamped at zero.
    pub v_h: f64,
    /// Robot approach speed per unit joint velocity.
    pub j_row: RowDVector<f64>,
    pub geometry: SeparationGeometry,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeparationState {
    pub links: Vec<LinkSeparation>,
    /// Index into `links` of the closest link, if any.
    pub worst: Option<usize>,
}

impl SeparationState {
    pub fn min_distance(&self) -> Option<f64> {
        self.worst.map(|w| self.links[w].distance)
    }
}

/// Per-link minimum separation against every human capsule.
///
/// Links without capsules are skipped. An empty human list yields an empty
/// state.
pub fn separation_state(pose: &ChainPose, human: &[MovingCapsule]) -> Result<SeparationState, KinematicsError> {
    let mut best: Vec<Option<(SeparationGeometry, usize)>> = vec![None; pose.frames.len()];
    for rc in &pose.capsules {
        for (h, hc) in human.iter().enumerate() {
            let g = capsule_separation(&rc.capsule, &hc.capsule);
            let slot = &mut best[rc.link];
            if slot.as_ref().is_none_or(|(b, _)| g.distance < b.distance) {
                *slot = Some((g, h));
            }
        }
    }
    let mut links = Vec::new();
    for (link, entry) in best.into_iter().enumerate() {
        let Some((geometry, h)) = entry else { continue };
        let v_h = (-geometry.direction.dot(&human[h].velocity)).max(0.0);
        let j_row = modified_jacobian_row_at(pose, link, &geometry)?;
        links.push(LinkSeparation {
            link,
            distance: geometry.distance,
            s_p: geometry.distance.max(0.0),
            v_h,
            j_row,
            geometry,
        });
    }
    let worst = links
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance))
        .map(|(i, _)| i);
    Ok(SeparationState { links, worst })
}

/// One link's row of the scaling problem: `approach * alpha <= v_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub link: usize,
    /// Approach speed at `alpha = 1`, i.e. `J_r q'(s) s_dot`.
    pub approach: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Binding {
    VelocityLimit(usize),
    JointVelocity(usize),
    JointAcceleration(usize),
    UnitCap,
    InfeasibleBrake,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingResult {
    pub alpha: f64,
    pub binding: Binding,
    pub feasible: bool,
}

/// Builds the per-link rows for a separation state and nominal joint velocity.
pub fn scaling_rows(iso: &IsoParams, sep: &SeparationState, nominal_qd: &DVector<f64>) -> Vec<ScalingRow> {
    sep.links
        .iter()
        .map(|l| ScalingRow {
            link: l.link,
            approach: (&l.j_row * nominal_qd)[0],
            v_max: iso_speed_limit(iso, l.s_p, l.v_h),
        })
        .collect()
}

/// Largest `alpha in [0, 1]` with
///
/// * `approach_i * alpha <= v_max_i` for every row,
/// * `qd_min <= nominal_qd * alpha <= qd_max`,
/// * `qdd_min <= (nominal_qd * alpha - qd_actual) / t_r <= qdd_max`.
///
/// Each constraint bounds `alpha` by a half-line, so the feasible set is an
/// interval. If it is empty the acceleration bounds are dropped and the
/// result is the tightest speed-limit/joint-velocity bound, flagged
/// infeasible.
pub fn solve_scaling(
    rows: &[ScalingRow],
    nominal_qd: &DVector<f64>,
    qd_actual: &DVector<f64>,
    limits: &JointLimits,
    t_r: f64,
) -> ScalingResult {
    let mut upper = 1.0;
    let mut binding = Binding::UnitCap;
    for row in rows {
        if row.approach > 0.0 {
            let u = row.v_max / row.approach;
            if u < upper {
                upper = u;
                binding = Binding::VelocityLimit(row.link);
            }
        }
    }
    for (j, &p) in nominal_qd.iter().enumerate() {
        let u = if p > 0.0 {
            limits.qd_max[j] / p
        } else if p < 0.0 {
            limits.qd_min[j] / p
        } else {
            continue;
        };
        if u < upper {
            upper = u;
            binding = Binding::JointVelocity(j);
        }
    }
    let speed_upper = upper;

    let mut lower: f64 = 0.0;
    let mut accel_consistent = true;
    for (j, &p) in nominal_qd.iter().enumerate() {
        let lo = limits.qdd_min[j] * t_r + qd_actual[j];
        let hi = limits.qdd_max[j] * t_r + qd_actual[j];
        let (u, l) = if p > 0.0 {
            (hi / p, lo / p)
        } else if p < 0.0 {
            (lo / p, hi / p)
        } else {
            if lo > 0.0 || hi < 0.0 {
                accel_consistent = false;
            }
            continue;
        };
        if u < upper {
            upper = u;
            binding = Binding::JointAcceleration(j);
        }
        lower = lower.max(l);
    }

    if accel_consistent && lower <= upper && upper >= 0.0 {
        ScalingResult { alpha: upper, binding, feasible: true }
    } else {
        ScalingResult {
            alpha: speed_upper.clamp(0.0, 1.0),
            binding: Binding::InfeasibleBrake,
            feasible: false,
        }
    }
}
