//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use coact::engine::{Compliance, HumanScript, Mode, Scenario, ScheduledMove, Task};
use coact::geometry::{Capsule, Vec3};
use coact::human::HumanBody;
use coact::kinematics::{CapsuleAttachment, Joint, JointLimits, KinematicChain};
use coact::safety::{IsoParams, ScalingRow};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

pub fn random_vec3(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

/// Chain of 1..=6 revolute joints with random offsets, tilts and axes.
pub fn random_chain(rng: &mut ChaCha8Rng) -> KinematicChain {
    let n = rng.random_range(1..=6);
    let joints = (0..n)
        .map(|_| {
            let axis = loop {
                let a = random_vec3(rng, 1.0);
                if a.norm() > 0.1 {
                    break a;
                }
            };
            Joint::new(random_vec3(rng, 0.5), random_vec3(rng, 3.0), axis)
        })
        .collect();
    let capsules = (0..n)
        .map(|link| CapsuleAttachment { link, local: Capsule::new(Vec3::zeros(), random_vec3(rng, 0.5), 0.05) })
        .collect();
    KinematicChain::new(joints, capsules, JointLimits::symmetric(n, 2.0, 10.0)).expect("valid random chain")
}

pub fn random_q(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0))
}

/// Segment distance by exhaustive search over `steps x steps` parameter
/// pairs along both segments.
pub fn grid_segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3, steps: usize) -> f64 {
    let inv = 1.0 / (steps - 1) as f64;
    let pb: Vec<Vec3> = (0..steps).map(|j| p2 + (q2 - p2) * (j as f64 * inv)).collect();
    let mut best = f64::INFINITY;
    for i in 0..steps {
        let pa = p1 + (q1 - p1) * (i as f64 * inv);
        for p in &pb {
            best = best.min((pa - p).norm_squared());
        }
    }
    best.sqrt()
}

pub fn grid_capsule_distance(a: &Capsule, b: &Capsule, steps: usize) -> f64 {
    grid_segment_distance(&a.a, &a.b, &b.a, &b.b, steps) - a.radius - b.radius
}

/// A randomly drawn scaling problem.
#[derive(Debug, Clone)]
pub struct ScalingInstance {
    pub rows: Vec<ScalingRow>,
    pub nominal_qd: DVector<f64>,
    pub qd_actual: DVector<f64>,
    pub limits: JointLimits,
    pub t_r: f64,
}

pub fn random_scaling_instance(rng: &mut ChaCha8Rng) -> ScalingInstance {
    let n = rng.random_range(1..=7);
    let n_rows = rng.random_range(0..=4);
    let nominal_qd = DVector::from_fn(n, |_, _| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-2.0..2.0) });
    let qd_max = DVector::from_fn(n, |_, _| rng.random_range(0.5..3.0));
    let qd_min = DVector::from_fn(n, |j, _| -qd_max[j] * rng.random_range(0.5..1.5));
    let qdd_max = DVector::from_fn(n, |_, _| rng.random_range(1.0..10.0));
    let qdd_min = DVector::from_fn(n, |_, _| -rng.random_range(1.0..10.0));
    let qd_actual = if rng.random_bool(0.5) {
        let a: f64 = rng.random_range(0.0..1.0);
        DVector::from_fn(n, |j, _| nominal_qd[j] * a + rng.random_range(-0.2..0.2))
    } else {
        DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0))
    };
    let rows = (0..n_rows)
        .map(|link| ScalingRow {
            link,
            approach: rng.random_range(-2.0..2.0),
            v_max: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..2.0) },
        })
        .collect();
    ScalingInstance {
        rows,
        nominal_qd,
        qd_actual,
        limits: JointLimits { qd_min, qd_max, qdd_min, qdd_max },
        t_r: rng.random_range(0.01..0.2),
    }
}

pub const GRID_STEP: f64 = 1e-4;

/// Largest grid value of alpha satisfying every constraint up to the
/// change one grid step can make in it. `speed_only` drops the
/// acceleration constraints.
pub fn grid_alpha(inst: &ScalingInstance, speed_only: bool) -> Option<f64> {
    let steps = (1.0 / GRID_STEP).round() as usize;
    let ok = |alpha: f64| {
        for r in &inst.rows {
            if r.approach * alpha - r.v_max > r.approach.abs() * GRID_STEP {
                return false;
            }
        }
        for j in 0..inst.nominal_qd.len() {
            let p = inst.nominal_qd[j];
            let v = p * alpha;
            let tol = p.abs() * GRID_STEP;
            if v - inst.limits.qd_max[j] > tol || inst.limits.qd_min[j] - v > tol {
                return false;
            }
            if speed_only {
                continue;
            }
            let acc = (v - inst.qd_actual[j]) / inst.t_r;
            let tol = tol / inst.t_r;
            if acc - inst.limits.qdd_max[j] > tol || inst.limits.qdd_min[j] - acc > tol {
                return false;
            }
        }
        true
    };
    (0..=steps).rev().map(|k| k as f64 * GRID_STEP).find(|&a| ok(a))
}

/// Separation left when the robot, heading straight at the human with
/// speed `v`, keeps going for the reaction time and then brakes at
/// `a_max`, while the human closes at `v_h` the whole time. Integrated
/// in steps of at most 1e-4 s that land on the end of the reaction time
/// and on the stop.
pub fn braking_final_separation(iso: &IsoParams, s_p: f64, v_h: f64, v: f64) -> f64 {
    let max_dt: f64 = 1e-4;
    let (mut t, mut sep, mut speed) = (0.0, s_p, v);
    while t < iso.t_r {
        let dt = max_dt.min(iso.t_r - t);
        sep -= (speed + v_h) * dt;
        t += dt;
    }
    while speed > 0.0 {
        let dt = max_dt.min(speed / iso.a_max);
        let next = if dt < max_dt { 0.0 } else { speed - iso.a_max * dt };
        sep -= (0.5 * (speed + next) + v_h) * dt;
        speed = next;
    }
    sep
}

/// Two-link planar arm sweeping a quarter turn with an operator parked
/// just beyond the goal, so the arm stalls before arriving.
pub fn stall_scenario(mode: Mode, gamma: f64) -> Scenario {
    let limits = JointLimits::symmetric(2, 2.0, 20.0);
    let chain = KinematicChain::planar(&[1.0, 1.0], 0.05, limits).expect("valid planar chain");
    let mut sc = Scenario::new("stall", chain, dv(&[0.0, 0.0]));
    sc.tasks = vec![Task { label: "sweep".into(), waypoints: vec![dv(&[std::f64::consts::FRAC_PI_2, 0.0])], s_dot_cap: 0.5 }];
    let park = Vec3::new(-0.3, 2.0, 0.0);
    sc.human = Some(HumanScript {
        body: HumanBody::column(1.0, 0.2),
        start: park,
        schedule: vec![ScheduledMove { t: 0.0, target: park }],
        max_speed: 1.0,
        compliance: Compliance::Ignore,
    });
    sc.predictor.gamma = gamma;
    sc.timeout_s = 30.0;
    sc.mode = mode;
    sc
}

/// Number of warnings issued during each task, in start order.
pub fn warnings_per_task(events: &[coact::engine::Event]) -> Vec<usize> {
    use coact::engine::EventKind;
    let mut counts = Vec::new();
    for e in events {
        match e.kind {
            EventKind::TaskStart { .. } => counts.push(0),
            EventKind::Warning { .. } => {
                if let Some(c) = counts.last_mut() {
                    *c += 1;
                }
            }
            _ => {}
        }
    }
    counts
}
