//! Loads a scenario file (or every bundled one), runs it and prints the
//! episode metrics.
//!
//!     cargo run --release --example scenario_file -- [path.json]

use std::path::{Path, PathBuf};

use coact::engine::run_episode;
use coact::interface::load_scenario;

fn main() {
    let paths: Vec<PathBuf> = match std::env::args().nth(1) {
        Some(p) => vec![p.into()],
        None => {
            let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/scenarios");
            let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
            v.sort();
            v
        }
    };
    for path in paths {
        let loaded = match load_scenario(&path) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                std::process::exit(2);
            }
        };
        let sc = &loaded.scenario;
        let r = run_episode(sc).unwrap();
        println!(
            "{:<16} {:?}: {} joints, {} tasks; done {} in {:.1} s, downtime {:.1} s, warnings {}, min separation {}",
            sc.name,
            sc.mode,
            sc.chain.n_joints(),
            sc.tasks.len(),
            r.tasks_completed,
            r.execution_time,
            r.downtime,
            r.warnings,
            r.min_separation.map_or("-".into(), |d| format!("{d:.3} m"))
        );
    }
}
