//! Path-velocity decomposition of joint-space trajectories.
//!
//! A trajectory is a geometric path `q(s)`, `s in [0, 1]`, plus a nominal
//! path speed `s_dot(s)`. The safety layer scales that speed by a factor
//! `alpha in [0, 1]` every control period, so geometry is never altered.

use nalgebra::DVector;
use thiserror::Error;

use crate::kinematics::JointLimits;

/// Path positions within this distance of the end snap to `s = 1`.
const END_SNAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("a path needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint {index} has {got} joints, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("waypoint {0} coincides with its successor")]
    DuplicateWaypoint(usize),
    #[error("path parameter {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("speed cap must be positive, got {0}")]
    InvalidCap(f64),
    #[error("joint limits cover {got} joints, path has {expected}")]
    LimitsMismatch { expected: usize, got: usize },
}

/// Piecewise-linear joint-space path parameterized by normalized arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPath {
    waypoints: Vec<DVector<f64>>,
    knots: Vec<f64>,
}

impl GeometricPath {
    pub fn new(waypoints: Vec<DVector<f64>>) -> Result<Self, TrajectoryError> {
        if waypoints.len() < 2 {
            return Err(TrajectoryError::TooFewWaypoints(waypoints.len()));
        }
        let n = waypoints[0].len();
        for (index, w) in waypoints.iter().enumerate() {
            if w.len() != n {
                return Err(TrajectoryError::DimensionMismatch { index, expected: n, got: w.len() });
            }
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for (k, pair) in waypoints.windows(2).enumerate() {
            let len = (&pair[1] - &pair[0]).norm();
            if len == 0.0 {
                return Err(TrajectoryError::DuplicateWaypoint(k));
            }
            cumulative.push(cumulative[k] + len);
        }
        let total = *cumulative.last().unwrap();
        let mut knots: Vec<f64> = cumulative.iter().map(|c| c / total).collect();
        *knots.last_mut().unwrap() = 1.0;
        Ok(Self { waypoints, knots })
    }

    pub fn waypoints(&self) -> &[DVector<f64>] {
        &self.waypoints
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_joints(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn n_segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        self.waypoints.last().unwrap()
    }

    /// Segment containing `s`; interior knots belong to the segment they start.
    pub fn segment_index(&self, s: f64) -> usize {
        let last = self.n_segments() - 1;
        // partition_point gives the first knot strictly greater than s
        let k = self.knots.partition_point(|&knot| knot <= s);
        k.saturating_sub(1).min(last)
    }

    /// Constant `dq/ds` on segment `k`.
    pub fn segment_tangent(&self, k: usize) -> DVector<f64> {
        (&self.waypoints[k + 1] - &self.waypoints[k]) / (self.knots[k + 1] - self.knots[k])
    }

    /// `q(s)` and `dq/ds` (right-hand derivative at interior knots,
    /// left-hand at `s = 1`).
    pub fn eval(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>), TrajectoryError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(TrajectoryError::OutOfRange(s));
        }
        let k = self.segment_index(s);
        let (s0, s1) = (self.knots[k], self.knots[k + 1]);
        let f = (s - s0) / (s1 - s0);
        // (1 - f) a + f b reproduces the waypoints exactly at f = 0 and f = 1.
        let q = &self.waypoints[k] * (1.0 - f) + &self.waypoints[k + 1] * f;
        Ok((q, self.segment_tangent(k)))
    }
}

/// Convenience wrapper mirroring [`GeometricPath::new`].
pub fn build_path(waypoints: Vec<DVector<f64>>) -> Result<GeometricPath, TrajectoryError> {
    GeometricPath::new(waypoints)
}

/// Nominal path speed, constant on each path segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    segment_speeds: Vec<f64>,
    cap: f64,
}

impl SpeedProfile {
    /// Profile with the same path speed on every segment.
    pub fn constant(path: &GeometricPath, s_dot: f64) -> Self {
        Self { segment_speeds: vec![s_dot; path.n_segments()], cap: s_dot }
    }

    pub fn segment_speeds(&self) -> &[f64] {
        &self.segment_speeds
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

/// Fastest path speed on each segment that keeps every joint within its
/// velocity bounds, capped at `s_dot_cap`.
pub fn nominal_profile(path: &GeometricPath, limits: &JointLimits, s_dot_cap: f64) -> Result<SpeedProfile, TrajectoryError> {
    if !(s_dot_cap > 0.0 && s_dot_cap.is_finite()) {
        return Err(TrajectoryError::InvalidCap(s_dot_cap));
    }
    if limits.qd_max.len() != path.n_joints() {
        return Err(TrajectoryError::LimitsMismatch { expected: path.n_joints(), got: limits.qd_max.len() });
    }
    let segment_speeds = (0..path.n_segments())
        .map(|k| {
            let tangent = path.segment_tangent(k);
            tangent.iter().enumerate().fold(s_dot_cap, |acc, (j, &d)| {
                if d > 0.0 {
                    acc.min(limits.qd_max[j] / d)
                } else if d < 0.0 {
                    acc.min(limits.qd_min[j] / d)
                } else {
                    acc
                }
            })
        })
        .collect();
    Ok(SpeedProfile { segment_speeds, cap: s_dot_cap })
}

/// A path, its nominal profile and the current progress along it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrajectory {
    pub path: GeometricPath,
    pub profile: SpeedProfile,
    s: f64,
}

impl ParamTrajectory {
    pub fn new(path: GeometricPath, profile: SpeedProfile) -> Self {
        Self { path, profile, s: 0.0 }
    }

    pub fn plan(waypoints: Vec<DVector<f64>>, limits: &JointLimits, s_dot_cap: f64) -> Result<Self, TrajectoryError> {
        let path = GeometricPath::new(waypoints)?;
        let profile = nominal_profile(&path, limits, s_dot_cap)?;
        Ok(Self::new(path, profile))
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn is_finished(&self) -> bool {
        self.s >= 1.0
    }

    /// Nominal path speed at `s`.
    pub fn s_dot(&self, s: f64) -> f64 {
        self.profile.segment_speeds[self.path.segment_index(s)]
    }

    /// Desired configuration at the current progress.
    pub fn q(&self) -> DVector<f64> {
        self.path.eval(self.s).expect("progress stays in [0, 1]").0
    }

    /// `q'(s) * s_dot(s)` at the current progress: the joint velocity the
    /// trajectory asks for when `alpha = 1`.
    pub fn nominal_joint_velocity(&self) -> DVector<f64> {
        let k = self.path.segment_index(self.s);
        self.path.segment_tangent(k) * self.profile.segment_speeds[k]
    }

    /// Time needed to reach the end from `s` at nominal speed.
    pub fn remaining_duration(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let knots = self.path.knots();
        let mut total = 0.0;
        for k in self.path.segment_index(s)..self.path.n_segments() {
            let from = s.max(knots[k]);
            let span = knots[k + 1] - from;
            if span > 0.0 {
                total += span / self.profile.segment_speeds[k];
            }
        }
        total
    }

    /// Advances the path parameter by `dt` at `alpha` times the nominal
    /// speed. A step that crosses a knot continues at the next segment's
    /// speed for the rest of the period. Returns `true` once the end of the
    /// path is reached.
    pub fn advance(&mut self, alpha: f64, dt: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&alpha));
        let knots = self.path.knots();
        let mut budget = alpha * dt;
        let mut s = self.s;
        while budget > 0.0 && s < 1.0 {
            let k = self.path.segment_index(s);
            let speed = self.profile.segment_speeds[k];
            let next = s + speed * budget;
            if next < knots[k + 1] || k + 1 == self.path.n_segments() {
                s = next;
                break;
            }
            budget -= (knots[k + 1] - s) / speed;
            s = knots[k + 1];
        }
        self.s = if s >= 1.0 - END_SNAP { 1.0 } else { s.max(self.s) };
        self.is_finished()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn three_point() -> GeometricPath {
        GeometricPath::new(vec![dv(&[0., 0.]), dv(&[3., 0.]), dv(&[3., 1.])]).unwrap()
    }

    #[test]
    fn knots_follow_arc_length() {
        assert_eq!(GeometricPath::new(vec![dv(&[0., 0.]), dv(&[1., 0.])]).unwrap().knots(), &[0.0, 1.0]);
        let equal = GeometricPath::new(vec![dv(&[0., 0.]), dv(&[1., 0.]), dv(&[1., 1.])]).unwrap();
        assert_eq!(equal.knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(three_point().knots(), &[0.0, 0.75, 1.0]);
    }

    #[test]
    fn rejects_bad_waypoints() {
        assert_eq!(GeometricPath::new(vec![dv(&[0.])]).unwrap_err(), TrajectoryError::TooFewWaypoints(1));
        assert_eq!(
            GeometricPath::new(vec![dv(&[0., 1.]), dv(&[0., 1.])]).unwrap_err(),
            TrajectoryError::DuplicateWaypoint(0)
        );
        assert!(matches!(
            GeometricPath::new(vec![dv(&[0., 1.]), dv(&[0.])]).unwrap_err(),
            TrajectoryError::DimensionMismatch { index: 1, .. }
        ));
    }

    #[test]
    fn eval_single_segment() {
        let path = GeometricPath::new(vec![dv(&[0., 0.]), dv(&[1., 0.])]).unwrap();
        let (q, dq) = path.eval(0.5).unwrap();
        assert_eq!(q, dv(&[0.5, 0.]));
        assert_eq!(dq, dv(&[1., 0.]));
        assert_eq!(path.eval(0.0).unwrap().0, dv(&[0., 0.]));
        assert!(matches!(path.eval(1.5), Err(TrajectoryError::OutOfRange(_))));
    }

    #[test]
    fn eval_uses_right_hand_derivative_at_knots() {
        let (q, dq) = three_point().eval(0.75).unwrap();
        assert_eq!(q, dv(&[3., 0.]));
        assert_eq!(dq, dv(&[0., 4.]));
        let (q_end, dq_end) = three_point().eval(1.0).unwrap();
        assert_eq!(q_end, dv(&[3., 1.]));
        assert_eq!(dq_end, dv(&[0., 4.]));
    }

    #[test]
    fn profile_examples() {
        let single = GeometricPath::new(vec![dv(&[0., 0.]), dv(&[1., 0.])]).unwrap();
        let lim = JointLimits::symmetric(2, 2.0, 5.0);
        assert_eq!(nominal_profile(&single, &lim, 10.0).unwrap().segment_speeds(), &[2.0]);
        assert_eq!(nominal_profile(&single, &lim, 0.5).unwrap().segment_speeds(), &[0.5]);
        let lim1 = JointLimits::symmetric(2, 1.0, 5.0);
        assert_eq!(nominal_profile(&three_point(), &lim1, 10.0).unwrap().segment_speeds(), &[0.25, 0.25]);
    }

    #[test]
    fn negative_tangent_uses_lower_bound() {
        let path = GeometricPath::new(vec![dv(&[1.]), dv(&[0.])]).unwrap();
        let mut lim = JointLimits::symmetric(1, 2.0, 5.0);
        lim.qd_min[0] = -0.5;
        assert_eq!(nominal_profile(&path, &lim, 10.0).unwrap().segment_speeds(), &[0.5]);
    }

    #[test]
    fn remaining_duration_examples() {
        let single = GeometricPath::new(vec![dv(&[0.]), dv(&[1.])]).unwrap();
        let traj = ParamTrajectory::new(single.clone(), SpeedProfile::constant(&single, 0.5));
        assert_eq!(traj.remaining_duration(0.0), 2.0);
        assert_eq!(traj.remaining_duration(1.0), 0.0);
        let lim1 = JointLimits::symmetric(2, 1.0, 5.0);
        let path = three_point();
        let profile = nominal_profile(&path, &lim1, 10.0).unwrap();
        let traj = ParamTrajectory::new(path, profile);
        assert_eq!(traj.remaining_duration(0.0), 4.0);
        assert!((traj.remaining_duration(0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn advance_examples() {
        let single = GeometricPath::new(vec![dv(&[0.]), dv(&[1.])]).unwrap();
        let mut traj = ParamTrajectory::new(single.clone(), SpeedProfile::constant(&single, 0.5));
        assert!(!traj.advance(0.0, 0.1));
        assert_eq!(traj.s(), 0.0);
        traj.advance(1.0, 0.1);
        assert_eq!(traj.s(), 0.05);
    }

    #[test]
    fn step_count_matches_remaining_duration() {
        let path = three_point();
        let dt = 0.1;
        for &s_dot in &[0.5, 0.3, 0.07, 0.123] {
            let mut traj = ParamTrajectory::new(path.clone(), SpeedProfile::constant(&path, s_dot));
            let expected = (traj.remaining_duration(0.0) / dt).ceil() as usize;
            let mut steps = 0;
            while !traj.advance(1.0, dt) {
                steps += 1;
            }
            assert_eq!(steps + 1, expected, "s_dot = {s_dot}");
        }
    }
}
