//! Cross-module audits of the run loop: the learning interface carries
//! spikes and a scalar reward only, and the aggregates block of a metrics
//! stream must agree with the raw records it summarizes.

use sporesim::config::presets;
use sporesim::harness::{run, RunMode, RunOptions, Sim};
use sporesim::metrics::parse_stream;

/// An environment reset must not leak into the network. The plastic state
/// advances only through spikes and reward, so a window in which the
/// vehicle is put back on the track must leave the latent parameters
/// bitwise untouched (they move only at slow-grid boundaries) and must not
/// clear the synaptic traces.
#[test]
fn env_reset_leaves_plastic_state_alone() {
    let mut cfg = presets::lane();
    cfg.seed = 2;
    cfg.duration_s = 120.0;
    let window_ticks = (cfg.grid.window_ms / cfg.grid.fine_dt_ms).round() as u64;
    let coarse_ticks = (cfg.grid.coarse_dt_ms / cfg.grid.fine_dt_ms).round() as u64;
    let windows_total = (cfg.duration_s * 1000.0 / cfg.grid.window_ms).round() as u64;

    let mut sim = Sim::new(&cfg, RunMode::Learning).unwrap();
    let mut checked = 0u32;
    let mut theta_ever_moved = false;
    while sim.windows_done() < windows_total {
        let table = sim.network().unwrap().plastic();
        let theta_before = table.theta.clone();
        let e_before: f64 = table.e.iter().map(|v| v.abs()).sum();
        let tick_before = sim.windows_done() * window_ticks;

        let out = sim.step_window().unwrap();

        let crossed_coarse =
            (tick_before + window_ticks) / coarse_ticks > tick_before / coarse_ticks;
        let table = sim.network().unwrap().plastic();
        if crossed_coarse {
            theta_ever_moved |= table.theta != theta_before;
        } else {
            assert_eq!(
                table.theta, theta_before,
                "theta moved between slow-grid boundaries (window {})",
                sim.windows_done()
            );
        }
        if out.reset {
            let e_after: f64 = table.e.iter().map(|v| v.abs()).sum();
            assert!(
                e_before == 0.0 || e_after > 0.0,
                "eligibility traces were cleared by the reset at t={:.3}",
                out.record.t
            );
            checked += 1;
        }
    }
    assert!(checked > 0, "no reset happened in {} s", cfg.duration_s);
    assert!(theta_ever_moved, "latent parameters never moved at all");
}

/// Recompute every whole-run aggregate from the raw stream (written with
/// `metrics_every = 1` so no window is dropped) and compare against the
/// stored aggregates block.
#[test]
fn aggregates_match_raw_lane_records() {
    let mut cfg = presets::lane();
    cfg.seed = 3;
    cfg.duration_s = 90.0;
    cfg.metrics_every = 1;
    let mut buf = Vec::new();
    run(
        &cfg,
        RunMode::Learning,
        RunOptions {
            metrics: Some(&mut buf),
            ..RunOptions::default()
        },
    )
    .unwrap();
    let parsed = parse_stream(std::str::from_utf8(&buf).unwrap()).unwrap();
    let agg = parsed.aggregates.as_ref().unwrap();

    assert_eq!(agg.windows as usize, parsed.windows.len());
    let events: u64 = parsed.windows.iter().map(|w| w.e as u64).sum();
    assert_eq!(agg.events_total, events);

    let reward_raw: f64 = parsed.windows.iter().map(|w| w.r).sum();
    let reward_stored: f64 = agg.reward_sum.iter().sum();
    assert!(
        (reward_raw - reward_stored).abs() <= 1e-9 * reward_raw.abs().max(1.0),
        "reward sum {reward_stored} != recomputed {reward_raw}"
    );
    assert_eq!(agg.reward_windows.iter().sum::<u64>(), agg.windows);

    let window_s = cfg.grid.window_ms / 1000.0;
    let half_lane = cfg.lane_env.lane_width_m / 2.0;
    let on_lane_raw: f64 = parsed
        .windows
        .iter()
        .filter(|w| w.d.unwrap().abs() <= half_lane)
        .count() as f64
        * window_s;
    let on_lane_stored: f64 = agg.on_lane_s.iter().sum();
    assert!(
        (on_lane_raw - on_lane_stored).abs() <= 1e-6,
        "time on lane {on_lane_stored} != recomputed {on_lane_raw}"
    );

    let reset_marks: Vec<f64> = parsed
        .marks
        .iter()
        .filter(|m| m.v == "reset")
        .map(|m| m.t)
        .collect();
    assert!(!reset_marks.is_empty(), "expected at least one reset in 90 s");
    assert_eq!(agg.reset_times_s, reset_marks);
    assert!(agg.reach_times_s.is_empty());
}

/// Same check on the reaching side, with the goal widened so a fresh policy
/// scores several reaches inside a short run.
#[test]
fn aggregates_match_raw_reaching_records() {
    let mut cfg = presets::reaching_small();
    cfg.seed = 5;
    cfg.duration_s = 120.0;
    cfg.metrics_every = 1;
    // Widen the goal and speed the ball up so the run scores reaches
    // without having to learn anything.
    cfg.reaching_env.goal_radius_m = 5.0;
    cfg.control.velocity_gain = 0.75;
    let mut buf = Vec::new();
    run(
        &cfg,
        RunMode::Learning,
        RunOptions {
            metrics: Some(&mut buf),
            ..RunOptions::default()
        },
    )
    .unwrap();
    let parsed = parse_stream(std::str::from_utf8(&buf).unwrap()).unwrap();
    let agg = parsed.aggregates.as_ref().unwrap();

    assert_eq!(agg.windows as usize, parsed.windows.len());
    assert_eq!(
        agg.events_total,
        parsed.windows.iter().map(|w| w.e as u64).sum::<u64>()
    );
    let reach_marks: Vec<f64> = parsed
        .marks
        .iter()
        .filter(|m| m.v == "reach")
        .map(|m| m.t)
        .collect();
    assert!(
        !reach_marks.is_empty(),
        "expected at least one reach with a {} m goal",
        cfg.reaching_env.goal_radius_m
    );
    assert_eq!(agg.reach_times_s, reach_marks);
    assert!(agg.on_lane_s.iter().all(|&s| s == 0.0));
}
