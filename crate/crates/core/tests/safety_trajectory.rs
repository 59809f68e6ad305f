mod common;

use coact::geometry::Vec3;
use coact::human::{HumanBody, HumanState};
use coact::kinematics::{JointLimits, KinematicChain};
use coact::predictor::{run_rollout, HumanPredictorKind, PredictorConfig, RolloutContext, RolloutSnapshot};
use coact::safety::{iso_speed_limit, solve_scaling, Binding, IsoParams, ScalingRow};
use coact::trajectory::ParamTrajectory;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn iso() -> impl Strategy<Value = IsoParams> {
    (0.5..5.0f64, 0.01..0.3f64, 0.0..0.2f64, 0.0..0.1f64, 0.0..0.1f64)
        .prop_map(|(a_max, t_r, c, z_d, z_r)| IsoParams { a_max, t_r, c, z_d, z_r })
}

proptest! {
    #[test]
    fn speed_limit_grows_with_separation(iso in iso(), s in 0.0..3.0f64, ds in 0.0..1.0f64, v_h in -1.0..2.0f64) {
        prop_assert!(iso_speed_limit(&iso, s + ds, v_h) >= iso_speed_limit(&iso, s, v_h));
    }

    #[test]
    fn speed_limit_shrinks_with_human_speed(iso in iso(), s in 0.0..3.0f64, v_h in -1.0..2.0f64, dv in 0.0..1.0f64) {
        prop_assert!(iso_speed_limit(&iso, s, v_h + dv) <= iso_speed_limit(&iso, s, v_h));
    }

    #[test]
    fn speed_limit_is_zero_at_contact(iso in iso()) {
        prop_assert_eq!(iso_speed_limit(&iso, iso.minimum_separation(), 0.0), 0.0);
    }
}

#[test]
fn solver_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..2000 {
        let inst = random_scaling_instance(&mut rng);
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let rows: Vec<ScalingRow> =
            inst.rows.iter().map(|r| ScalingRow { link: r.link, approach: r.approach * c, v_max: r.v_max * c }).collect();
        // Joint velocity bounds are velocities too and must scale with the rest.
        let limits = JointLimits {
            qd_min: &inst.limits.qd_min * c,
            qd_max: &inst.limits.qd_max * c,
            qdd_min: &inst.limits.qdd_min * c,
            qdd_max: &inst.limits.qdd_max * c,
        };
        let a = solve_scaling(&inst.rows, &inst.nominal_qd, &inst.qd_actual, &inst.limits, inst.t_r);
        let b = solve_scaling(&rows, &(&inst.nominal_qd * c), &(&inst.qd_actual * c), &limits, inst.t_r);
        assert!((a.alpha - b.alpha).abs() <= 1e-12, "{a:?} vs {b:?} at scale {c}");
        assert_eq!(a.feasible, b.feasible);
    }
}

#[test]
fn solver_examples() {
    let loose = JointLimits::symmetric(1, 100.0, 1e6);
    let row = |approach, v_max| ScalingRow { link: 0, approach, v_max };
    let r = solve_scaling(&[row(0.1, 10.0)], &dv(&[0.1]), &dv(&[0.1]), &loose, 0.1);
    assert_eq!((r.alpha, r.binding, r.feasible), (1.0, Binding::UnitCap, true));

    let r = solve_scaling(&[row(1.0, 0.5)], &dv(&[1.0]), &dv(&[0.5]), &loose, 0.1);
    assert_eq!((r.alpha, r.binding), (0.5, Binding::VelocityLimit(0)));

    // Decelerating from 1.0 at no more than 7 rad/s^2 needs alpha >= 0.3.
    let tight = JointLimits::symmetric(1, 100.0, 7.0);
    let r = solve_scaling(&[row(1.0, 0.0)], &dv(&[1.0]), &dv(&[1.0]), &tight, 0.1);
    assert_eq!((r.alpha, r.binding, r.feasible), (0.0, Binding::InfeasibleBrake, false));
}

fn random_trajectory(rng: &mut ChaCha8Rng) -> (ParamTrajectory, JointLimits) {
    let n = rng.random_range(1..=6);
    let limits = JointLimits::symmetric(n, rng.random_range(0.2..2.0), 5.0);
    let points = (0..rng.random_range(2..=5)).map(|_| random_q(rng, n)).collect();
    (ParamTrajectory::plan(points, &limits, rng.random_range(0.05..1.0)).unwrap(), limits)
}

#[test]
fn commanded_velocity_respects_scaled_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..500 {
        let (mut traj, limits) = random_trajectory(&mut rng);
        let alpha = rng.random_range(0.0..=1.0);
        while !traj.is_finished() {
            let qd = traj.nominal_joint_velocity() * alpha;
            for j in 0..qd.len() {
                assert!(qd[j] <= limits.qd_max[j] * alpha + 1e-12 && qd[j] >= limits.qd_min[j] * alpha - 1e-12);
            }
            traj.advance(alpha.max(0.2), 0.05);
        }
    }
}

#[test]
fn remaining_duration_matches_nominal_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..300 {
        let (mut traj, _) = random_trajectory(&mut rng);
        let dt = 0.02;
        let planned = traj.remaining_duration(0.0);
        let mut last = planned;
        let mut steps = 0;
        while !traj.is_finished() {
            traj.advance(1.0, dt);
            steps += 1;
            let rem = traj.remaining_duration(traj.s());
            assert!(rem <= last + 1e-12);
            last = rem;
        }
        assert!((steps as f64 * dt - planned).abs() <= dt + 1e-9, "{steps} steps for {planned} s");
    }
}

#[test]
fn knots_reproduce_waypoints_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..300 {
        let (traj, _) = random_trajectory(&mut rng);
        for (k, &s) in traj.path.knots().iter().enumerate() {
            assert_eq!(traj.path.eval(s).unwrap().0, traj.path.waypoints()[k]);
        }
    }
}

#[test]
fn rollouts_are_deterministic_and_bounded() {
    let limits = JointLimits::symmetric(2, 2.0, 20.0);
    let chain = KinematicChain::planar(&[1.0, 1.0], 0.05, limits.clone()).unwrap();
    let traj = ParamTrajectory::plan(vec![dv(&[0.0, 0.0]), dv(&[1.5, 0.3])], &limits, 0.5).unwrap();
    for kind in [HumanPredictorKind::Frozen, HumanPredictorKind::ConstantVelocity] {
        for max_rollout_steps in [5, 50, 5000] {
            let ctx = RolloutContext {
                chain: chain.clone(),
                iso: IsoParams::default(),
                body: HumanBody::column(1.0, 0.2),
                config: PredictorConfig { human_predictor: kind, max_rollout_steps, ..PredictorConfig::default() },
            };
            let snap = RolloutSnapshot {
                trajectory: traj.clone(),
                qd: DVector::zeros(2),
                human: Some(HumanState { position: Vec3::new(0.5, 2.0, 0.0), velocity: Vec3::new(0.0, -0.2, 0.0) }),
            };
            let a = run_rollout(&ctx, snap.clone());
            let b = run_rollout(&ctx, snap);
            assert_eq!(a, b);
            assert!(a.steps <= max_rollout_steps);
            assert_eq!(a.exhausted, !a.triggered && !a.completed);
        }
    }
}

#[test]
fn higher_threshold_triggers_later() {
    let limits = JointLimits::symmetric(2, 2.0, 20.0);
    let chain = KinematicChain::planar(&[1.0, 1.0], 0.05, limits.clone()).unwrap();
    let run = |gamma| {
        let ctx = RolloutContext {
            chain: chain.clone(),
            iso: IsoParams::default(),
            body: HumanBody::column(1.0, 0.2),
            config: PredictorConfig { gamma, ..PredictorConfig::default() },
        };
        let trajectory =
            ParamTrajectory::plan(vec![dv(&[0.0, 0.0]), dv(&[std::f64::consts::FRAC_PI_2, 0.0])], &limits, 0.5).unwrap();
        let human = Some(HumanState::at_rest(Vec3::new(-0.3, 2.0, 0.0)));
        run_rollout(&ctx, RolloutSnapshot { trajectory, qd: DVector::zeros(2), human })
    };
    let (a, b) = (run(1.5), run(2.0));
    assert!(a.triggered && b.triggered);
    assert!(b.t_virt > a.t_virt);
    assert!((b.t_virt / a.t_virt - 2.0 / 1.5).abs() <= 0.1 / a.t_virt * 2.0);
}
