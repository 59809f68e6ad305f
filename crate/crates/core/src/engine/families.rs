//! Parametric scenario families used by the examples and test suites.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Capsule, Vec3};
use crate::human::HumanBody;
use crate::kinematics::{forward_kinematics, CapsuleAttachment, Joint, JointLimits, KinematicChain};

use super::scenario::{Compliance, HumanScript, Mode, Scenario, ScheduledMove, Task};

/// Standard DH parameters `(d, a, alpha)` of a 10 kg class six-axis arm.
pub const UR10E_DH: [(f64, f64, f64); 6] = [
    (0.1807, 0.0, FRAC_PI_2),
    (0.0, -0.6127, 0.0),
    (0.0, -0.57155, 0.0),
    (0.17415, 0.0, FRAC_PI_2),
    (0.11985, 0.0, -FRAC_PI_2),
    (0.11655, 0.0, 0.0),
];

const UR10E_RADII: [f64; 6] = [0.08, 0.06, 0.05, 0.045, 0.045, 0.045];

/// Chain from standard DH rows, one capsule per link from the joint to the
/// next joint's origin.
pub fn dh_chain(dh: &[(f64, f64, f64)], radii: &[f64], limits: JointLimits) -> Result<KinematicChain, crate::kinematics::KinematicsError> {
    let mut joints = Vec::with_capacity(dh.len());
    let mut capsules = Vec::with_capacity(dh.len());
    let mut prev = (0.0, 0.0, 0.0);
    for (i, &(d, a, alpha)) in dh.iter().enumerate() {
        joints.push(Joint::new(Vec3::new(prev.1, 0.0, prev.0), Vec3::new(prev.2, 0.0, 0.0), Vec3::z()));
        capsules.push(CapsuleAttachment {
            link: i,
            local: Capsule::new(Vec3::zeros(), Vec3::new(a, 0.0, d), radii[i]),
        });
        prev = (d, a, alpha);
    }
    KinematicChain::new(joints, capsules, limits)
}

pub fn ur10e_limits() -> JointLimits {
    let qd = DVector::from_row_slice(&[2.094, 2.094, 3.14, 3.14, 3.14, 3.14]);
    let qdd = DVector::from_element(6, 8.0);
    JointLimits { qd_min: -&qd, qd_max: qd, qdd_min: -&qdd, qdd_max: qdd }
}

pub fn ur10e_like() -> KinematicChain {
    dh_chain(&UR10E_DH, &UR10E_RADII, ur10e_limits()).expect("built-in chain is valid")
}

/// Tool pointing down with the tip about 0.76 m from the base axis, turned
/// to `base` radians.
pub fn ur10e_table_pose(base: f64) -> DVector<f64> {
    DVector::from_row_slice(&[base, -1.2, 2.0, -FRAC_PI_2 + 1.2 - 2.0, -FRAC_PI_2, 0.0])
}

/// Operator as one upright capsule from the floor (0.8 m below the work
/// surface) to head height.
pub fn standing_operator(radius: f64) -> HumanBody {
    HumanBody {
        capsules: vec![Capsule::new(Vec3::new(0.0, 0.0, -0.8), Vec3::new(0.0, 0.0, 0.9), radius)],
    }
}

/// Knobs of one blocking-scenario variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingParams {
    /// Base angle of the pick, place and home poses.
    pub pick: f64,
    pub place: f64,
    pub home: f64,
    pub s_dot_cap: f64,
    /// How far beyond the place pose's tip (radially) the operator stands.
    pub park_offset: f64,
    /// When the operator starts walking to the parking spot.
    pub arrive_at: f64,
    /// When the operator walks off.
    pub leave_at: f64,
    pub operator_speed: f64,
    pub compliance: Compliance,
}

impl Default for BlockingParams {
    fn default() -> Self {
        Self {
            pick: -0.4,
            place: 1.0,
            home: -1.2,
            s_dot_cap: 0.3,
            park_offset: 0.3,
            arrive_at: 0.0,
            leave_at: 20.0,
            operator_speed: 1.0,
            compliance: Compliance::Comply { delay: 1.0, retreat_distance: 0.6 },
        }
    }
}

impl BlockingParams {
    /// Seeded variant around the defaults.
    pub fn variant(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = rng.random_range(-0.6..-0.2);
        Self {
            pick,
            place: pick + rng.random_range(1.2..1.8),
            home: rng.random_range(-1.4..-1.0),
            s_dot_cap: rng.random_range(0.25..0.35),
            park_offset: rng.random_range(0.25..0.35),
            arrive_at: rng.random_range(0.0..3.0),
            leave_at: rng.random_range(14.0..24.0),
            operator_speed: rng.random_range(0.8..1.2),
            ..Self::default()
        }
    }
}

/// Pick, place and return home, with the operator parked where the part
/// has to go until `leave_at`.
pub fn blocking_scenario(p: &BlockingParams, mode: Mode) -> Scenario {
    let chain = ur10e_like();
    let start = ur10e_table_pose(p.home);
    let place_q = ur10e_table_pose(p.place);
    let tip = forward_kinematics(&chain, &place_q).expect("pose matches chain").tip();
    let radial = Vec3::new(tip.x, tip.y, 0.0).normalize();
    let park = Vec3::new(tip.x, tip.y, 0.0) + radial * p.park_offset;
    let approach_from = park + radial * 1.5;
    let exit = park + radial * 3.0;

    let task = |label: &str, q: DVector<f64>| Task { label: label.into(), waypoints: vec![q], s_dot_cap: p.s_dot_cap };
    let mut sc = Scenario::new("blocking", chain, start);
    sc.tasks = vec![
        task("pick component", ur10e_table_pose(p.pick)),
        task("place component", place_q),
        task("return home", ur10e_table_pose(p.home)),
    ];
    sc.human = Some(HumanScript {
        body: standing_operator(0.2),
        start: approach_from,
        schedule: vec![
            ScheduledMove { t: p.arrive_at, target: park },
            ScheduledMove { t: p.leave_at, target: exit },
        ],
        max_speed: p.operator_speed,
        compliance: p.compliance,
    });
    sc.mode = mode;
    sc.named_poses.insert("home".into(), ur10e_table_pose(p.home));
    sc
}

pub fn planar3() -> KinematicChain {
    let limits = JointLimits::symmetric(3, 1.5, 6.0);
    KinematicChain::planar(&[0.5, 0.4, 0.3], 0.05, limits).expect("valid planar chain")
}

/// Random tasks for either robot with an operator wandering through the
/// workspace at a random speed.
pub fn random_safety_scenario(seed: u64, mode: Mode) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let use_ur = rng.random_bool(0.5);
    let (chain, reach) = if use_ur { (ur10e_like(), 1.3) } else { (planar3(), 1.2) };
    let n = chain.n_joints();
    let random_q = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        if use_ur {
            let mut q = ur10e_table_pose(rng.random_range(-3.0..3.0));
            q[1] += rng.random_range(-0.3..0.3);
            q[2] += rng.random_range(-0.4..0.4);
            q
        } else {
            DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0))
        }
    };
    let start = random_q(&mut rng);
    let n_tasks = rng.random_range(2..=4);
    let tasks = (0..n_tasks)
        .map(|k| Task {
            label: format!("move {k}"),
            waypoints: (0..rng.random_range(1..=2)).map(|_| random_q(&mut rng)).collect(),
            s_dot_cap: rng.random_range(0.2..0.6),
        })
        .collect();

    let ring = |rng: &mut ChaCha8Rng, r: f64| {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        Vec3::new(r * a.cos(), r * a.sin(), 0.0)
    };
    let human_start = ring(&mut rng, reach + 0.8);
    let mut schedule = Vec::new();
    let mut t = 0.0;
    for _ in 0..rng.random_range(2..=5) {
        let r = rng.random_range(0.0..reach + 0.5);
        let target = ring(&mut rng, r);
        schedule.push(ScheduledMove { t, target });
        t += rng.random_range(1.0..5.0);
    }
    let exit = ring(&mut rng, reach + 1.0);
    schedule.push(ScheduledMove { t, target: exit });
    let compliance = if rng.random_bool(0.5) {
        Compliance::Ignore
    } else {
        Compliance::Comply { delay: rng.random_range(0.0..2.0), retreat_distance: rng.random_range(0.2..1.0) }
    };
    let mut sc = Scenario::new(format!("random-{seed}"), chain, start);
    sc.tasks = tasks;
    sc.human = Some(HumanScript {
        body: standing_operator(rng.random_range(0.1..0.25)),
        start: human_start,
        schedule,
        max_speed: rng.random_range(0.3..1.6),
        compliance,
    });
    sc.mode = mode;
    sc.seed = seed;
    sc.timeout_s = 120.0;
    sc
}
