mod common;

use coact::geometry::{capsule_separation, segment_closest_points, Capsule, Vec3};
use coact::kinematics::{forward_kinematics, modified_jacobian_row, JointLimits, KinematicChain};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn capsule() -> impl Strategy<Value = Capsule> {
    (vec3(), vec3(), 0.01..0.5f64).prop_map(|(a, b, r)| Capsule::new(a, b, r))
}

#[test]
fn segment_distance_matches_parameter_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let (p1, q1) = (random_vec3(&mut rng, 1.0), random_vec3(&mut rng, 1.0));
        let (p2, q2) = (random_vec3(&mut rng, 1.0), random_vec3(&mut rng, 1.0));
        let (_, _, d) = segment_closest_points(&p1, &q1, &p2, &q2);
        let grid = grid_segment_distance(&p1, &q1, &p2, &q2, 1000);
        let res = 0.5 * ((q1 - p1).norm() + (q2 - p2).norm()) / 999.0;
        assert!(d <= grid + 1e-12, "{d} > grid {grid}");
        assert!(grid - d <= res + 1e-12, "{d} vs grid {grid}");
    }
}

#[test]
fn degenerate_segments_are_points() {
    let p = Vec3::new(0.2, -0.1, 0.4);
    let (a, b, d) = segment_closest_points(&p, &p, &Vec3::new(-1.0, 0.0, 0.0), &Vec3::new(1.0, 0.0, 0.0));
    assert_eq!(a, p);
    assert!((b - Vec3::new(0.2, 0.0, 0.0)).norm() < 1e-15);
    assert!((d - (0.01f64 + 0.16).sqrt()).abs() < 1e-15);
}

proptest! {
    #[test]
    fn separation_is_symmetric(a in capsule(), b in capsule()) {
        let ab = capsule_separation(&a, &b);
        let ba = capsule_separation(&b, &a);
        prop_assert!((ab.distance - ba.distance).abs() <= 1e-12);
        if !ab.degenerate {
            prop_assert!((ab.direction + ba.direction).norm() <= 1e-9);
        }
    }

    #[test]
    fn witnesses_realise_the_distance(a in capsule(), b in capsule()) {
        let g = capsule_separation(&a, &b);
        let gap = (g.point_b - g.point_a).norm() - a.radius - b.radius;
        prop_assert!((gap - g.distance).abs() <= 1e-12);
        prop_assert!((g.direction.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn translation_leaves_distance_unchanged(a in capsule(), b in capsule(), t in vec3()) {
        let d0 = capsule_separation(&a, &b).distance;
        let d1 = capsule_separation(&a.translated(&t), &b.translated(&t)).distance;
        prop_assert!((d0 - d1).abs() <= 1e-9);
    }
}

#[test]
fn jacobian_row_is_the_rate_of_closing_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 300 {
        let chain = random_chain(&mut rng);
        let n = chain.n_joints();
        let q = random_q(&mut rng, n);
        let qd = random_q(&mut rng, n) * 0.3;
        let human = Capsule::new(random_vec3(&mut rng, 1.5), random_vec3(&mut rng, 1.5), 0.1);
        let pose = forward_kinematics(&chain, &q).unwrap();
        let att = &pose.capsules[rng.random_range(0..n)];
        let sep = capsule_separation(&att.capsule, &human);
        if sep.distance <= 0.01 || sep.degenerate {
            continue;
        }
        let row = modified_jacobian_row(&chain, &q, att.link, &sep).unwrap();
        let approach = (&row * &qd)[0];
        let local = chain.capsules().iter().find(|c| c.link == att.link).unwrap().local;
        let distance_at = |dt: f64| {
            let p = forward_kinematics(&chain, &(&q + &qd * dt)).unwrap();
            let f = p.frames[att.link];
            let cap = Capsule::new(f.transform_point(&local.a.into()).coords, f.transform_point(&local.b.into()).coords, local.radius);
            capsule_separation(&cap, &human).distance
        };
        let h = 1e-6;
        let rate = (distance_at(h) - distance_at(-h)) / (2.0 * h);
        assert!((approach + rate).abs() <= 1e-5 * rate.abs().max(1.0), "{approach} vs -{rate}");
        checked += 1;
    }
}

#[test]
fn planar_two_link_approach_example() {
    let chain = KinematicChain::planar(&[1.0, 1.0], 0.05, JointLimits::symmetric(2, 1.0, 1.0)).unwrap();
    let q = dv(&[0.0, 0.0]);
    let human = Capsule::sphere(Vec3::new(2.0, 1.0, 0.0), 0.1);
    let pose = forward_kinematics(&chain, &q).unwrap();
    let sep = capsule_separation(&pose.capsules[1].capsule, &human);
    let row = modified_jacobian_row(&chain, &q, 1, &sep).unwrap();
    let approach = (row * dv(&[1.0, 0.0]))[0];
    let dist = |t: f64| {
        let p = forward_kinematics(&chain, &dv(&[t, 0.0])).unwrap();
        capsule_separation(&p.capsules[1].capsule, &human).distance
    };
    let fd = -(dist(1e-6) - dist(-1e-6)) / 2e-6;
    assert!((approach - fd).abs() <= 1e-5 * fd.abs());
    // Tip at (2, 0) moving along +y toward the point at (2, 1).
    assert!((approach - 2.0).abs() < 1e-9);
}
