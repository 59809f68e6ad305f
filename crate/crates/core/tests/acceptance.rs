//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use coact::engine::families::{blocking_scenario, random_safety_scenario, BlockingParams};
use coact::engine::{compare_runs, run_episode, EventKind, Mode};
use coact::fusion::mlp::{softmax_cross_entropy, ForwardCache};
use coact::fusion::{evaluate, synthetic_dataset, train, Mlp, TrainingConfig, COMMAND_NET};
use coact::geometry::{capsule_separation, Capsule};
use coact::interface::{load_groups, load_scenario};
use coact::kinematics::{forward_kinematics, link_position_jacobian};
use coact::safety::{iso_speed_limit, solve_scaling, IsoParams};
use coact::stats::one_way_anova;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Check {
    Check { ok, detail: detail.into() }
}

fn within(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn assets() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/assets"))
}

fn anova() -> Check {
    let start = Instant::now();
    // (file, F, p, optional F crit)
    let cases = [
        ("execution_times", 17.065, 0.00044, Some(4.30095)),
        ("downtime", 10.164, 0.00425, None),
        ("questionnaire", 46.452, 0.00014, Some(5.31765)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, f, p, f_crit) in cases {
        let file = load_groups(&assets().join(format!("anova/{name}.json"))).expect("asset loads");
        let groups: Vec<_> = file.groups.iter().map(|g| g.summary()).collect();
        let r = one_way_anova(&groups).expect("valid groups");
        ok &= within(r.f, f, 0.01) && within(r.p_value, p, 5e-5);
        if let Some(c) = f_crit {
            ok &= within(r.f_crit, c, 1e-3);
        }
        parts.push(format!("{name}: F={:.4} p={:.6} Fcrit={:.5}", r.f, r.p_value, r.f_crit));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    check(ok, format!("{} ({elapsed:.2?})", parts.join("; ")))
}

fn scaling_solver() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut flag_mismatch, mut worst, mut infeasible) = (0, 0.0f64, 0);
    for _ in 0..10_000 {
        let inst = random_scaling_instance(&mut rng);
        let r = solve_scaling(&inst.rows, &inst.nominal_qd, &inst.qd_actual, &inst.limits, inst.t_r);
        let grid = grid_alpha(&inst, false);
        if grid.is_some() != r.feasible {
            flag_mismatch += 1;
            continue;
        }
        let reference = match grid {
            Some(a) => a,
            None => {
                infeasible += 1;
                grid_alpha(&inst, true).expect("alpha = 0 always meets the speed constraints")
            }
        };
        worst = worst.max((r.alpha - reference).abs());
    }
    let elapsed = start.elapsed();
    let ok = flag_mismatch == 0 && worst <= GRID_STEP + 1e-12 && elapsed < Duration::from_secs(30);
    check(
        ok,
        format!("10000 instances, {infeasible} infeasible, {flag_mismatch} flag mismatches, max |alpha - grid| = {worst:.2e} ({elapsed:.2?})"),
    )
}

fn speed_limit() -> Check {
    let a = iso_speed_limit(&IsoParams { a_max: 1.0, t_r: 0.1, c: 0.2, z_d: 0.0, z_r: 0.0 }, 1.2, 0.0);
    let b = iso_speed_limit(&IsoParams { a_max: 2.0, t_r: 0.1, c: 0.3, z_d: 0.0, z_r: 0.0 }, 1.0, 0.5);
    let mut ok = within(a, 1.317745, 1e-6) && within(b, 1.057839, 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_margin, mut loose, mut stopped, mut bad_stop) = (f64::INFINITY, 0, 0, 0);
    for _ in 0..1000 {
        let iso = IsoParams {
            a_max: rng.random_range(0.5..5.0),
            t_r: rng.random_range(0.01..0.3),
            c: rng.random_range(0.0..0.2),
            z_d: rng.random_range(0.0..0.1),
            z_r: rng.random_range(0.0..0.1),
        };
        let floor = iso.minimum_separation();
        let s_p = floor + rng.random_range(0.0..2.0);
        let v_h = rng.random_range(0.0..2.0);
        let v = iso_speed_limit(&iso, s_p, v_h);
        let margin = |v: f64| braking_final_separation(&iso, s_p, v_h, v) - floor;
        if v > 0.0 {
            worst_margin = worst_margin.min(margin(v));
            // Tight: a slightly faster robot would end up inside the margin.
            if v > 1e-3 && margin(v * 1.001) >= 0.0 {
                loose += 1;
            }
        } else {
            // Only zero when the human alone closes the gap during the reaction time.
            stopped += 1;
            if margin(0.0) > 1e-9 {
                bad_stop += 1;
            }
        }
    }
    ok &= worst_margin >= -1e-9 && loose == 0 && bad_stop == 0;
    check(
        ok,
        format!(
            "v_max = {a:.6}, {b:.6}; 1000 braking draws: worst final margin {worst_margin:.1e} m, {loose} not tight, {stopped} with no safe speed ({bad_stop} wrongly)"
        ),
    )
}

fn closed_loop_safety() -> Check {
    let start = Instant::now();
    let (mut violations, mut timeouts, mut worst) = (0, 0, f64::INFINITY);
    for seed in 0..100 {
        for mode in [Mode::Baseline, Mode::Predictive] {
            let sc = random_safety_scenario(seed, mode);
            let bound = sc.human.as_ref().map_or(0.0, |h| h.max_speed);
            let r = run_episode(&sc).expect("scenario runs");
            let (Some(min), Some(floor)) = (r.min_separation, r.safety_floor) else { continue };
            worst = worst.min(min - floor);
            if min < floor || r.max_human_speed.unwrap_or(0.0) > bound + 1e-9 {
                violations += 1;
            }
            timeouts += r.timed_out as usize;
        }
    }
    let elapsed = start.elapsed();
    let ok = violations == 0 && elapsed < Duration::from_secs(120);
    check(ok, format!("200 runs, {violations} violations, {timeouts} timeouts, worst margin over floor {worst:+.4} m ({elapsed:.2?})"))
}

fn predictor_efficacy() -> Check {
    let start = Instant::now();
    let (mut base_exec, mut pred_exec, mut base_down, mut pred_down) = (0.0, 0.0, 0.0, 0.0);
    let mut min_exec = f64::INFINITY;
    let mut latch_ok = true;
    for seed in 0..20 {
        let sc = blocking_scenario(&BlockingParams::variant(seed), Mode::Predictive);
        let c = compare_runs(&sc).expect("scenario runs");
        base_exec += c.baseline.execution_time;
        pred_exec += c.predictive.execution_time;
        base_down += c.baseline.downtime;
        pred_down += c.predictive.downtime;
        min_exec = min_exec.min(c.execution_time_reduction_pct);
        latch_ok &= warnings_per_task(&c.predictive.events).iter().all(|&n| n <= 1);
    }
    let exec = 100.0 * (base_exec - pred_exec) / base_exec;
    let down = 100.0 * (base_down - pred_down) / base_down;
    let elapsed = start.elapsed();
    let ok = down >= 30.0 && exec >= 10.0 && latch_ok && elapsed < Duration::from_secs(120);
    check(
        ok,
        format!("20 variants: execution time -{exec:.1}% (smallest per variant -{min_exec:.1}%), downtime -{down:.1}% ({elapsed:.2?})"),
    )
}

fn latch_and_trigger() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();

    // Every acceptance-style run: at most one warning per trajectory.
    let mut most = 0;
    for seed in 0..100 {
        let r = run_episode(&random_safety_scenario(seed, Mode::Predictive)).expect("scenario runs");
        most = most.max(warnings_per_task(&r.events).into_iter().max().unwrap_or(0));
    }
    for name in ["blocking", "dialogue", "planar_minimal"] {
        let sc = load_scenario(&assets().join(format!("scenarios/{name}.json"))).expect("asset loads").scenario;
        let r = run_episode(&sc.with_mode(Mode::Predictive)).expect("scenario runs");
        most = most.max(warnings_per_task(&r.events).into_iter().max().unwrap_or(0));
    }
    ok &= most <= 1;
    parts.push(format!("most warnings in one trajectory {most}"));

    // Stall: the warning's virtual time is the first step past gamma * T_rem.
    for gamma in [1.5, 2.0] {
        let r = run_episode(&stall_scenario(Mode::Predictive, gamma)).expect("scenario runs");
        let t_r = 0.1;
        let warnings: Vec<_> = r
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Warning { t_virt, t_rem, .. } => Some((e.t, t_virt, t_rem)),
                _ => None,
            })
            .collect();
        let Some(&(_, t_virt, t_rem)) = warnings.first() else {
            ok = false;
            parts.push(format!("gamma {gamma}: no warning"));
            continue;
        };
        let expected = (1..).find(|&k| k as f64 * t_r > gamma * t_rem).unwrap();
        let got = (t_virt / t_r).round() as i64;
        ok &= warnings.len() == 1 && (got - expected).abs() <= 1;
        parts.push(format!("gamma {gamma}: step {got} vs {expected}"));
    }

    // One virtual step per period makes the virtual step count a tick count.
    let mut sc = stall_scenario(Mode::Predictive, 1.5);
    sc.predictor.rollout_rate_multiplier = 1;
    let r = run_episode(&sc).expect("scenario runs");
    let start = r.events.iter().find(|e| matches!(e.kind, EventKind::TaskStart { .. })).map(|e| e.t);
    let warn = r.events.iter().find_map(|e| match e.kind {
        EventKind::Warning { t_rem, .. } => Some((e.t, t_rem)),
        _ => None,
    });
    match (start, warn) {
        (Some(t0), Some((tw, t_rem))) => {
            let expected = (1..).find(|&k| k as f64 * 0.1 > 1.5 * t_rem).unwrap();
            let ticks = ((tw - t0) / 0.1).round() as i64;
            ok &= (ticks - expected).abs() <= 1;
            parts.push(format!("real-time trigger after {ticks} ticks vs {expected}"));
        }
        _ => {
            ok = false;
            parts.push("real-time trigger missing".into());
        }
    }
    check(ok, parts.join("; "))
}

fn fusion_training() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Mlp::random(&COMMAND_NET, &mut rng);
    let mut worst_rel = 0.0f64;
    let h = 1e-6;
    for x in [[0.1, 0.35, 0.6, 0.0], [0.85, 0.05, 0.0, 0.0], [0.3, 0.3, 0.9, 0.65]] {
        for label in [0, 7, 14] {
            let mut grad = Mlp::zeros(&COMMAND_NET);
            net.backprop(&x, label, &mut grad, &mut ForwardCache::default()).unwrap();
            let loss = |m: &Mlp| softmax_cross_entropy(&m.logits(&x).unwrap(), label).0;
            let analytic: Vec<f64> = grad.params().copied().collect();
            for i in (0..analytic.len()).step_by(37) {
                let mut plus = net.clone();
                *plus.params_mut().nth(i).unwrap() += h;
                let mut minus = net.clone();
                *minus.params_mut().nth(i).unwrap() -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-3);
                worst_rel = worst_rel.max(err);
            }
        }
    }

    let data = synthetic_dataset(3000, 11);
    let (fit, test) = coact::fusion::dataset::split(&data, 0.2, 11);
    let fit: Vec<_> = fit.iter().map(|d| d.sample()).collect();
    let test: Vec<_> = test.iter().map(|d| d.sample()).collect();
    let cfg = TrainingConfig { rng_seed: 11, ..TrainingConfig::default() };
    let (model, history) = train(&fit, &cfg).expect("training runs");
    let acc = evaluate(&model, &test).unwrap().accuracy;
    let elapsed = start.elapsed();
    let ok = worst_rel <= 1e-5
        && acc >= 0.95
        && history.stopped_early
        && history.epochs_run() < cfg.max_epochs
        && elapsed < Duration::from_secs(120);
    check(
        ok,
        format!(
            "gradient rel error {worst_rel:.1e}; held-out accuracy {acc:.4}; stopped after {} of {} epochs ({elapsed:.2?})",
            history.epochs_run(),
            cfg.max_epochs
        ),
    )
}

fn kinematics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut jac_fail = 0;
    let h = 1e-6;
    for _ in 0..1000 {
        let chain = random_chain(&mut rng);
        let n = chain.n_joints();
        let q = random_q(&mut rng, n);
        let link = rng.random_range(0..n);
        let pose = forward_kinematics(&chain, &q).unwrap();
        let point = pose.frames[link].transform_point(&random_vec3(&mut rng, 0.5).into()).coords;
        let local = pose.frames[link].inverse_transform_point(&point.into());
        let jac = link_position_jacobian(&chain, &q, link, &point).unwrap();
        for j in 0..n {
            let mut qp = q.clone();
            qp[j] += h;
            let mut qm = q.clone();
            qm[j] -= h;
            let pp = forward_kinematics(&chain, &qp).unwrap().frames[link].transform_point(&local).coords;
            let pm = forward_kinematics(&chain, &qm).unwrap().frames[link].transform_point(&local).coords;
            let fd = (pp - pm) / (2.0 * h);
            for r in 0..3 {
                let (a, b) = (jac[(r, j)], fd[r]);
                if (a - b).abs() > 1e-9f64.max(1e-6 * b.abs()) {
                    jac_fail += 1;
                }
            }
        }
    }

    let mut cap_fail = 0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut cap = || {
            let a = random_vec3(&mut rng, 1.0);
            let b = a + random_vec3(&mut rng, 0.5);
            Capsule::new(a, b, rng.random_range(0.01..0.2))
        };
        let (x, y) = (cap(), cap());
        let exact = capsule_separation(&x, &y).distance;
        let grid = grid_capsule_distance(&x, &y, 1000);
        // The grid misses the true closest pair by at most half a cell on each axis.
        let res = 0.5 * ((x.b - x.a).norm() + (y.b - y.a).norm()) / 999.0;
        let gap = grid - exact;
        worst = worst.max(gap.abs());
        if gap < -1e-12 || gap > res + 1e-12 {
            cap_fail += 1;
        }
    }
    check(
        jac_fail == 0 && cap_fail == 0,
        format!("1000 Jacobians, {jac_fail} entries off; 1000 capsule pairs, {cap_fail} off grid (max gap {worst:.1e} m)"),
    )
}

fn determinism() -> Check {
    let mut ok = true;
    let mut runs = 0;
    let mut scenarios = vec![
        blocking_scenario(&BlockingParams::default(), Mode::Predictive),
        random_safety_scenario(5, Mode::Predictive),
        random_safety_scenario(6, Mode::Baseline),
    ];
    scenarios.push(load_scenario(&assets().join("scenarios/dialogue.json")).expect("asset loads").scenario);
    for sc in &scenarios {
        let a = run_episode(sc).expect("scenario runs").ndjson();
        let b = run_episode(sc).expect("scenario runs").ndjson();
        ok &= a == b && !a.is_empty();
        runs += 1;
    }
    check(ok, format!("{runs} scenarios run twice, event logs byte-identical: {ok}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("anova", anova),
        ("scaling solver matches grid search", scaling_solver),
        ("speed limit values and braking", speed_limit),
        ("closed-loop separation", closed_loop_safety),
        ("predictive warnings pay off", predictor_efficacy),
        ("warning latch and trigger timing", latch_and_trigger),
        ("command classifier training", fusion_training),
        ("kinematics and capsule distance", kinematics),
        ("deterministic event logs", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let c = f();
        println!("{} {name}: {}", if c.ok { "PASS" } else { "FAIL" }, c.detail);
        failed += !c.ok as usize;
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
