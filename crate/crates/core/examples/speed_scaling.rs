//! Admissible speed against separation, then the scaling factor that a
//! single closing link receives as the operator gets nearer.
//!
//!     cargo run --example speed_scaling

use coact::kinematics::JointLimits;
use coact::safety::{iso_speed_limit, solve_scaling, IsoParams, ScalingRow};
use nalgebra::DVector;

fn main() {
    let iso = IsoParams::default();
    println!("minimum separation {:.3} m", iso.minimum_separation());
    println!("{:>6} {:>10} {:>10}", "S_p", "v_max(0)", "v_max(1.6)");
    for k in 0..=10 {
        let s = 0.1 * k as f64;
        println!("{s:>6.2} {:>10.4} {:>10.4}", iso_speed_limit(&iso, s, 0.0), iso_speed_limit(&iso, s, 1.6));
    }

    let limits = JointLimits::symmetric(2, 2.0, 8.0);
    let nominal = DVector::from_row_slice(&[1.2, -0.4]);
    let mut qd = nominal.clone();
    println!("\n{:>6} {:>8} {:>8}  binding", "S_p", "v_max", "alpha");
    for k in (0..=12).rev() {
        let s = 0.05 * k as f64;
        let row = ScalingRow { link: 1, approach: 1.1, v_max: iso_speed_limit(&iso, s, 0.0) };
        let r = solve_scaling(&[row], &nominal, &qd, &limits, iso.t_r);
        println!("{s:>6.2} {:>8.4} {:>8.4}  {:?}{}", row.v_max, r.alpha, r.binding, if r.feasible { "" } else { " (braking)" });
        qd = &nominal * r.alpha;
    }
}
