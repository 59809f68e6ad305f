//! Per-link separation, approach-speed row and admissible speed for the
//! six-axis arm with an operator standing at a few distances.
//!
//!     cargo run --example separation_field

use coact::engine::families::{standing_operator, ur10e_like, ur10e_table_pose};
use coact::geometry::Vec3;
use coact::human::HumanState;
use coact::kinematics::forward_kinematics;
use coact::safety::{iso_speed_limit, separation_state, IsoParams};
use nalgebra::DVector;

fn main() {
    let chain = ur10e_like();
    let iso = IsoParams::default();
    let q = ur10e_table_pose(0.0);
    let qd = DVector::from_row_slice(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let pose = forward_kinematics(&chain, &q).unwrap();
    let tip = pose.tip();
    println!("tip at ({:.3}, {:.3}, {:.3}), base turning at {} rad/s", tip.x, tip.y, tip.z, qd[0]);

    let body = standing_operator(0.2);
    for y in [1.5, 1.0, 0.6] {
        // Operator walking toward the arm at 0.3 m/s.
        let human = HumanState { position: Vec3::new(tip.x, y, 0.0), velocity: Vec3::new(0.0, -0.3, 0.0) };
        let sep = separation_state(&pose, &body.place(&human)).unwrap();
        println!("\noperator at y = {y}");
        println!("{:>4} {:>9} {:>8} {:>9} {:>8}", "link", "distance", "v_h", "approach", "v_max");
        for l in &sep.links {
            let approach = (&l.j_row * &qd)[0];
            println!(
                "{:>4} {:>9.3} {:>8.3} {:>9.3} {:>8.3}",
                l.link,
                l.distance,
                l.v_h,
                approach,
                iso_speed_limit(&iso, l.s_p, l.v_h)
            );
        }
    }
}
