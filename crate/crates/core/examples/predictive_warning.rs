//! A two-link arm sweeps toward an operator who does not move. The baseline
//! run stalls; the predictive run warns ahead of the stall and, with an
//! operator who steps aside on request, finishes sooner.
//!
//!     cargo run --example predictive_warning

use coact::engine::{compare_runs, Compliance, EventKind, HumanScript, Mode, Scenario, ScheduledMove, Task};
use coact::geometry::Vec3;
use coact::human::HumanBody;
use coact::kinematics::{JointLimits, KinematicChain};
use nalgebra::DVector;

fn scenario() -> Scenario {
    let chain = KinematicChain::planar(&[1.0, 1.0], 0.05, JointLimits::symmetric(2, 2.0, 20.0)).unwrap();
    let mut sc = Scenario::new("sweep", chain, DVector::zeros(2));
    sc.mode = Mode::Predictive;
    sc.tasks = vec![Task {
        label: "sweep".into(),
        waypoints: vec![DVector::from_row_slice(&[std::f64::consts::FRAC_PI_2, 0.0])],
        s_dot_cap: 0.5,
    }];
    let park = Vec3::new(-0.3, 2.0, 0.0);
    sc.human = Some(HumanScript {
        body: HumanBody::column(1.0, 0.2),
        start: park,
        schedule: vec![ScheduledMove { t: 15.0, target: Vec3::new(-3.0, 3.0, 0.0) }],
        max_speed: 1.6,
        compliance: Compliance::Comply { delay: 1.0, retreat_distance: 0.6 },
    });
    sc
}

fn main() {
    let cmp = compare_runs(&scenario()).unwrap();
    for (name, r) in [("baseline", &cmp.baseline), ("predictive", &cmp.predictive)] {
        println!("{name}: execution {:.1} s, downtime {:.1} s, {} warning(s)", r.execution_time, r.downtime, r.warnings);
        for e in &r.events {
            match &e.kind {
                EventKind::Warning { t_virt, t_rem, text, .. } => {
                    println!("  t={:.1}: {text} (rollout {t_virt:.2} s vs nominal {t_rem:.2} s)", e.t)
                }
                EventKind::Dialogue { speaker, text } => println!("  t={:.1}: {speaker:?}: {text}", e.t),
                _ => {}
            }
        }
        if let Some(stop) = r.events.iter().find(|e| matches!(e.kind, EventKind::Alpha { alpha, .. } if alpha <= 0.01)) {
            println!("  first stop at t={:.1}", stop.t);
        }
    }
    println!("execution time -{:.1}%, downtime -{:.1}%", cmp.execution_time_reduction_pct, cmp.downtime_reduction_pct);
}
