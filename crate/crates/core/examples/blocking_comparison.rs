//! Paired baseline/predictive runs over seeded variants of the blocking
//! scenario: the operator stands where the robot must place a part.
//!
//!     cargo run --release --example blocking_comparison -- [variants]

use coact::engine::families::{blocking_scenario, BlockingParams};
use coact::engine::{compare_runs, Mode};

fn main() {
    let variants: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    println!("{:>7} {:>9} {:>9} {:>7} {:>9} {:>9} {:>7} {:>5}", "variant", "exec base", "exec pred", "Δ%", "down base", "down pred", "Δ%", "warn");
    let (mut exec, mut down) = (Vec::new(), Vec::new());
    for v in 0..variants {
        let params = BlockingParams::variant(v);
        let cmp = compare_runs(&blocking_scenario(&params, Mode::Predictive)).expect("scenario is valid");
        println!(
            "{:>7} {:>9.1} {:>9.1} {:>7.1} {:>9.1} {:>9.1} {:>7.1} {:>5}",
            v,
            cmp.baseline.execution_time,
            cmp.predictive.execution_time,
            cmp.execution_time_reduction_pct,
            cmp.baseline.downtime,
            cmp.predictive.downtime,
            cmp.downtime_reduction_pct,
            cmp.predictive.warnings
        );
        exec.push(cmp.execution_time_reduction_pct);
        down.push(cmp.downtime_reduction_pct);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean reduction: execution time {:.1}%, downtime {:.1}%", mean(&exec), mean(&down));
}
