//! The closed loop: render, sense, tick the network, decode, move, reward.
//!
//! `Sim` owns all mutable run state and advances one decision window at a
//! time, so callers can stream metrics, take checkpoints at window
//! boundaries, or stop early. `run` is the convenience loop over it.
//!
//! In baseline mode there is no network, camera, or plasticity: the agent
//! holds a random command for a fixed time, redraws it from the policy
//! stream, and the environment and bookkeeping behave exactly as in a
//! learning run. This isolates the environment statistics that learning
//! runs are compared against.

use crate::builder::{self, TopologySummary};
use crate::checkpoint::Checkpoint;
use crate::config::{ConfigError, ExperimentConfig, Task};
use crate::decode::{decode_velocity, steering_command, steering_value, ActivityTrace};
use crate::env::lane::LaneEnv;
use crate::env::reaching::ReachingEnv;
use crate::metrics::{
    default_weight_edges, Aggregates, Header, MetricsWriter, PlasticitySnap, WindowRecord, SCHEMA,
};
use crate::network::Network;
use crate::plasticity::beta_at;
use crate::render::{LaneRenderer, ReachingRenderer, RoadShading};
use crate::rngs::RngSet;
use crate::time::TimeGrid;
use crate::vision::{pool_counts, DvsCamera, VisionError};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Weights below this count as weak in snapshots and summaries.
pub const WEAK_WEIGHT_THRESHOLD: f64 = 0.07;

/// Reaching scene intensities: bright ground, dark ball.
pub const REACH_GROUND: f64 = 0.9;
pub const REACH_BALL: f64 = 0.15;

/// Lane camera geometry: each pooled cell covers this many pixels per side.
pub const LANE_POOL_WIN: usize = 8;
pub const LANE_LATERAL_SPAN_M: f64 = 1.6;
pub const LANE_FORWARD_NEAR_M: f64 = 0.1;
pub const LANE_FORWARD_FAR_M: f64 = 3.3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error("non-finite state at t = {t_s} s")]
    NonFinite { t_s: f64 },
    #[error("checkpoint does not match: {0}")]
    CheckpointMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Learning,
    Baseline,
}

/// Exponential low-pass over window-sampled rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardFilter {
    pub smoothed: f64,
    tau_s: f64,
}

impl RewardFilter {
    pub fn new(tau_s: f64) -> Self {
        RewardFilter {
            smoothed: 0.0,
            tau_s,
        }
    }

    pub fn update(&mut self, raw: f64, dt_s: f64) -> f64 {
        let decay = (-dt_s / self.tau_s).exp();
        self.smoothed = raw + (self.smoothed - raw) * decay;
        self.smoothed
    }
}

/// The command a baseline agent is currently holding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeldCommand {
    Velocity { vx: f64, vy: f64 },
    Steer { deg: f64 },
}

/// Task-specific environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvState {
    Reaching(ReachingEnv),
    Lane(LaneEnv),
}

enum TaskRig {
    Reaching {
        renderer: ReachingRenderer,
    },
    Lane {
        renderer: LaneRenderer,
        pooled: Vec<u32>,
        injected: Vec<u16>,
    },
}

/// What one decision window produced.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    pub record: WindowRecord,
    pub reached: bool,
    pub reset: bool,
    pub snap: Option<PlasticitySnap>,
}

pub struct Sim {
    cfg: ExperimentConfig,
    grid: TimeGrid,
    mode: RunMode,
    tick: u64,
    windows_done: u64,
    windows_total: u64,
    beta: f64,
    pending_reward: f64,
    filter: RewardFilter,
    rngs: RngSet,
    net: Option<Network>,
    camera: Option<DvsCamera>,
    trace: ActivityTrace,
    env: EnvState,
    held: HeldCommand,
    hold_left: u64,
    next_snap_tick: u64,
    agg: Aggregates,
    rig: TaskRig,
    // Scratch buffers.
    frame: Vec<f64>,
    counts: Vec<u16>,
    input: Vec<u16>,
    zero_input: Vec<u16>,
    motor_counts: Vec<u16>,
}

impl Sim {
    pub fn new(cfg: &ExperimentConfig, mode: RunMode) -> Result<Self, RunError> {
        cfg.validate()?;
        let grid = cfg.grid.grid().expect("validated grid");
        let windows_total = grid.windows_in(cfg.duration_s);
        let mut rngs = RngSet::new(cfg.seed);
        let learning = mode == RunMode::Learning;

        let (net, camera, trace, env, rig, n_input, cam_px) = match cfg.task {
            Task::Reaching => {
                let top = &cfg.reaching_net;
                let (w, h) = (top.camera_w, top.camera_h);
                let net = if learning {
                    let neurons = cfg.reaching_neurons()?;
                    Some(builder::build_reaching(
                        top,
                        &neurons,
                        &cfg.plasticity,
                        grid.fine_dt_s,
                        &mut rngs.build,
                    ))
                } else {
                    None
                };
                let camera = learning
                    .then(|| DvsCamera::new(w, h, cfg.camera.threshold, cfg.camera.eps));
                let env = ReachingEnv::new(cfg.reaching_env, &mut rngs.env);
                let renderer = ReachingRenderer::new(
                    w,
                    h,
                    cfg.reaching_env.half_extent_m,
                    cfg.reaching_env.ball_radius_m,
                    REACH_GROUND,
                    REACH_BALL,
                );
                (
                    net,
                    camera,
                    ActivityTrace::new(top.n_motors, cfg.control.decode_tau_s),
                    EnvState::Reaching(env),
                    TaskRig::Reaching { renderer },
                    w * h,
                    w * h,
                )
            }
            Task::Lane => {
                let top = &cfg.lane_net;
                let (cw, ch) = (top.pooled_w * LANE_POOL_WIN, top.pooled_h * LANE_POOL_WIN);
                let net = if learning {
                    let motor = cfg
                        .neurons
                        .motor
                        .params()
                        .map_err(|e| ConfigError::Invalid(vec![e]))?;
                    Some(builder::build_lane(
                        top,
                        motor,
                        &cfg.plasticity,
                        grid.fine_dt_s,
                        &mut rngs.build,
                    ))
                } else {
                    None
                };
                let camera = learning
                    .then(|| DvsCamera::new(cw, ch, cfg.camera.threshold, cfg.camera.eps));
                let env = LaneEnv::new(cfg.lane_env);
                let renderer = LaneRenderer::new(
                    cw,
                    ch,
                    LANE_LATERAL_SPAN_M,
                    LANE_FORWARD_NEAR_M,
                    LANE_FORWARD_FAR_M,
                    RoadShading::default(),
                );
                let n_cells = top.pooled_w * top.pooled_h;
                (
                    net,
                    camera,
                    ActivityTrace::new(top.n_motors, cfg.control.decode_tau_s),
                    EnvState::Lane(env),
                    TaskRig::Lane {
                        renderer,
                        pooled: vec![0; n_cells],
                        injected: vec![0; n_cells],
                    },
                    n_cells,
                    cw * ch,
                )
            }
        };

        let n_motors = trace.a.len();
        let agg = Aggregates::new(50.0, cfg.duration_s, default_weight_edges());
        let mut sim = Sim {
            cfg: cfg.clone(),
            grid,
            mode,
            tick: 0,
            windows_done: 0,
            windows_total,
            beta: cfg.plasticity.beta0,
            pending_reward: 0.0,
            filter: RewardFilter::new(cfg.control.reward_tau_s),
            rngs,
            net,
            camera,
            trace,
            env,
            held: HeldCommand::Velocity { vx: 0.0, vy: 0.0 },
            hold_left: 0,
            next_snap_tick: grid.anneal_every,
            agg,
            rig,
            frame: vec![0.0; cam_px],
            counts: vec![0; cam_px],
            input: vec![0; n_input],
            zero_input: vec![0; n_input],
            motor_counts: vec![0; n_motors],
        };
        if let Some(snap) = sim.plasticity_snap() {
            sim.agg.push_snap(snap);
        }
        Ok(sim)
    }

    /// Rebuild a sim from a checkpoint taken with the same config and mode.
    pub fn resume(
        cfg: &ExperimentConfig,
        mode: RunMode,
        ck: &Checkpoint,
    ) -> Result<Self, RunError> {
        if ck.config_hash != cfg.hash_hex() {
            return Err(RunError::CheckpointMismatch(format!(
                "config hash {} in checkpoint, {} in config",
                ck.config_hash,
                cfg.hash_hex()
            )));
        }
        if ck.mode != mode {
            return Err(RunError::CheckpointMismatch(format!(
                "checkpoint was taken in {:?} mode",
                ck.mode
            )));
        }
        let mut sim = Sim::new(cfg, mode)?;
        match (&sim.env, &ck.env) {
            (EnvState::Reaching(_), EnvState::Reaching(_)) => {}
            (EnvState::Lane(_), EnvState::Lane(_)) => {}
            _ => {
                return Err(RunError::CheckpointMismatch(
                    "checkpoint task does not match config task".into(),
                ))
            }
        }
        sim.tick = ck.tick;
        sim.windows_done = ck.windows_done;
        sim.beta = ck.beta;
        sim.pending_reward = ck.pending_reward;
        sim.filter = ck.filter;
        sim.rngs = RngSet::restore(&ck.rngs);
        sim.net = ck.net.clone();
        sim.camera = ck.camera.clone();
        sim.trace = ck.trace.clone();
        sim.env = ck.env.clone();
        sim.held = ck.held;
        sim.hold_left = ck.hold_left;
        sim.next_snap_tick = ck.next_snap_tick;
        sim.agg = ck.aggregates.clone();
        Ok(sim)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: crate::checkpoint::VERSION,
            config_hash: self.cfg.hash_hex(),
            mode: self.mode,
            tick: self.tick,
            windows_done: self.windows_done,
            beta: self.beta,
            pending_reward: self.pending_reward,
            filter: self.filter,
            rngs: self.rngs.snapshot(),
            net: self.net.clone(),
            camera: self.camera.clone(),
            trace: self.trace.clone(),
            env: self.env.clone(),
            held: self.held,
            hold_left: self.hold_left,
            next_snap_tick: self.next_snap_tick,
            aggregates: self.agg.clone(),
        }
    }

    pub fn header(&self) -> Header {
        let topology = match &self.net {
            Some(net) => builder::summarize(net),
            None => TopologySummary {
                n_visual: 0,
                n_axis: 0,
                n_motors: self.motor_counts.len(),
                has_exploration: false,
                has_noise: false,
                n_static: 0,
                n_plastic: 0,
                theta_sum: 0.0,
            },
        };
        Header {
            schema: SCHEMA.to_string(),
            config_hash: self.cfg.hash_hex(),
            task: self.cfg.task.to_string(),
            seed: self.cfg.seed,
            window_ms: self.grid.window_s() * 1e3,
            metrics_every: self.cfg.metrics_every,
            topology,
        }
    }

    pub fn windows_total(&self) -> u64 {
        self.windows_total
    }

    pub fn windows_done(&self) -> u64 {
        self.windows_done
    }

    pub fn time_s(&self) -> f64 {
        self.grid.time_s(self.tick)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn aggregates(&self) -> &Aggregates {
        &self.agg
    }

    pub fn network(&self) -> Option<&Network> {
        self.net.as_ref()
    }

    pub fn mode(&self) -> RunMode {
        self.mode
    }

    fn plasticity_snap(&self) -> Option<PlasticitySnap> {
        let net = self.net.as_ref()?;
        let table = net.plastic();
        let theta_mean = if table.is_empty() {
            0.0
        } else {
            table.theta.iter().sum::<f64>() / table.len() as f64
        };
        Some(PlasticitySnap {
            t: self.time_s(),
            beta: self.beta,
            weak_frac: table.weak_fraction(WEAK_WEIGHT_THRESHOLD),
            theta_mean,
            w_hist: table.weight_histogram(&self.agg.hist_edges),
        })
    }

    /// Run the fine grid across one window. The network sees `self.input`
    /// on the window's first tick and silence after, with slow updates at
    /// their boundaries.
    fn tick_window(&mut self) -> Result<(), RunError> {
        let net = self.net.as_mut().expect("learning mode has a network");
        for k in 0..self.grid.window_ticks {
            let input: &[u16] = if k == 0 { &self.input } else { &self.zero_input };
            net.step_tick(input, self.pending_reward, &mut self.rngs.neurons);
            self.tick += 1;
            if self.grid.is_coarse_boundary(self.tick) {
                let probe = net.coarse_update(
                    &self.cfg.plasticity,
                    self.beta,
                    self.grid.coarse_dt_s(),
                    &mut self.rngs.plasticity,
                );
                if !probe.is_finite() {
                    return Err(RunError::NonFinite {
                        t_s: self.grid.time_s(self.tick),
                    });
                }
                if self.grid.is_anneal_boundary(self.tick) {
                    self.beta = beta_at(
                        self.cfg.plasticity.beta0,
                        self.cfg.plasticity.lambda,
                        self.grid.time_s(self.tick),
                    );
                }
            }
        }
        Ok(())
    }

    fn redraw_baseline_command(&mut self) {
        let hold_s = self.cfg.control.baseline_hold_s;
        self.hold_left = (hold_s / self.grid.window_s()).round().max(1.0) as u64;
        self.held = match self.cfg.task {
            Task::Reaching => {
                // Area-uniform draw from the speed disk.
                let cap = self.cfg.control.baseline_v_cap_mps;
                let r = cap * self.rngs.policy.gen::<f64>().sqrt();
                let ang = std::f64::consts::TAU * self.rngs.policy.gen::<f64>();
                HeldCommand::Velocity {
                    vx: r * ang.cos(),
                    vy: r * ang.sin(),
                }
            }
            Task::Lane => {
                let cmds = crate::decode::SteeringCmd::ALL;
                let idx = self.rngs.policy.gen_range(0..cmds.len());
                HeldCommand::Steer {
                    deg: cmds[idx].angle_deg(),
                }
            }
        };
    }

    pub fn step_window(&mut self) -> Result<WindowOutcome, RunError> {
        let window_s = self.grid.window_s();
        let learning = self.mode == RunMode::Learning;
        let mut events = 0u32;

        if learning {
            // Sense: render the scene, convert it to events, and stage the
            // network input for this window.
            match &mut self.rig {
                TaskRig::Reaching { renderer } => {
                    if let EnvState::Reaching(env) = &self.env {
                        renderer.render(env.ball_x, env.ball_y, &mut self.frame);
                    }
                    let camera = self.camera.as_mut().expect("learning mode has a camera");
                    events = camera.process(&self.frame, &mut self.counts)?;
                    self.input.copy_from_slice(&self.counts);
                }
                TaskRig::Lane {
                    renderer,
                    pooled,
                    injected,
                } => {
                    if let EnvState::Lane(env) = &self.env {
                        renderer.render(&env.pose, env.track(), &mut self.frame);
                    }
                    let camera = self.camera.as_mut().expect("learning mode has a camera");
                    events = camera.process(&self.frame, &mut self.counts)?;
                    let (cw, ch) = (
                        self.cfg.lane_net.pooled_w * LANE_POOL_WIN,
                        self.cfg.lane_net.pooled_h * LANE_POOL_WIN,
                    );
                    pool_counts(&self.counts, cw, ch, LANE_POOL_WIN, pooled)?;
                    injected.fill(0);
                    let gain = self.cfg.camera.injection_gain;
                    for (inj, &cell) in injected.iter_mut().zip(pooled.iter()) {
                        if cell > 0 {
                            let lam = gain * cell as f64;
                            let n = Poisson::new(lam)
                                .expect("positive mean")
                                .sample(&mut self.rngs.vision);
                            *inj = (n as u64).min(u16::MAX as u64) as u16;
                        }
                    }
                    self.input.copy_from_slice(injected);
                }
            }
            self.tick_window()?;
            self.net
                .as_mut()
                .unwrap()
                .take_motor_counts(&mut self.motor_counts);
            self.trace.update(&self.motor_counts, window_s);
        } else {
            if self.hold_left == 0 {
                self.redraw_baseline_command();
            }
            self.hold_left -= 1;
            self.tick += self.grid.window_ticks;
        }

        // Act.
        let (record, reached, reset) = match (&mut self.env, &self.rig) {
            (EnvState::Reaching(env), _) => {
                let (vx, vy) = if learning {
                    decode_velocity(&self.trace.a, self.cfg.control.velocity_gain)
                } else {
                    match self.held {
                        HeldCommand::Velocity { vx, vy } => (vx, vy),
                        HeldCommand::Steer { .. } => (0.0, 0.0),
                    }
                };
                let out = env.step(vx, vy, window_s, &mut self.rngs.env);
                let t = self.grid.time_s(self.tick);
                let smoothed = self.filter.update(out.reward, window_s);
                self.pending_reward = smoothed;
                self.agg.record_window(t, out.reward, window_s, events, None);
                if out.reached {
                    self.agg.record_reach(t);
                }
                (
                    WindowRecord {
                        t,
                        r: out.reward,
                        s: smoothed,
                        e: events,
                        x: Some(env.ball_x),
                        y: Some(env.ball_y),
                        ..WindowRecord::default()
                    },
                    out.reached,
                    false,
                )
            }
            (EnvState::Lane(env), _) => {
                let steer_deg = if learning {
                    let value = steering_value(
                        &self.trace.a,
                        self.cfg.control.steer_scale,
                        self.cfg.control.steer_eps,
                    );
                    steering_command(value, self.cfg.control.left_pool_steers_left).angle_deg()
                } else {
                    match self.held {
                        HeldCommand::Steer { deg } => deg,
                        HeldCommand::Velocity { .. } => 0.0,
                    }
                };
                let out = env.step(steer_deg, window_s);
                let t = self.grid.time_s(self.tick);
                let smoothed = self.filter.update(out.reward, window_s);
                self.pending_reward = smoothed;
                let on_lane = out.errors.d_err_m.abs() <= self.cfg.lane_env.lane_width_m / 2.0;
                self.agg
                    .record_window(t, out.reward, window_s, events, Some(on_lane));
                if out.off_track {
                    self.agg.record_reset(t);
                }
                (
                    WindowRecord {
                        t,
                        r: out.reward,
                        s: smoothed,
                        e: events,
                        d: Some(out.errors.d_err_m),
                        b: Some(out.errors.beta_err_deg),
                        ..WindowRecord::default()
                    },
                    false,
                    out.off_track,
                )
            }
        };

        if !record.r.is_finite() || !record.s.is_finite() {
            return Err(RunError::NonFinite { t_s: record.t });
        }

        let mut snap = None;
        if learning && self.tick >= self.next_snap_tick {
            self.next_snap_tick += self.grid.anneal_every;
            if let Some(s) = self.plasticity_snap() {
                self.agg.push_snap(s.clone());
                snap = Some(s);
            }
        }

        self.windows_done += 1;
        Ok(WindowOutcome {
            record,
            reached,
            reset,
            snap,
        })
    }
}

/// Where a run sends its outputs.
pub struct RunOptions<'a> {
    pub metrics: Option<&'a mut dyn Write>,
    pub checkpoint_dir: Option<&'a Path>,
    pub resume_from: Option<&'a Checkpoint>,
}

impl<'a> Default for RunOptions<'a> {
    fn default() -> Self {
        RunOptions {
            metrics: None,
            checkpoint_dir: None,
            resume_from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config_hash: String,
    pub windows: u64,
    pub duration_s: f64,
    pub final_beta: f64,
    pub reaches: usize,
    pub resets: usize,
    pub final_weak_frac: Option<f64>,
    pub aggregates: Aggregates,
    pub checkpoints: Vec<PathBuf>,
}

pub fn run(
    cfg: &ExperimentConfig,
    mode: RunMode,
    opts: RunOptions<'_>,
) -> Result<RunResult, RunError> {
    let mut sim = match opts.resume_from {
        Some(ck) => Sim::resume(cfg, mode, ck)?,
        None => Sim::new(cfg, mode)?,
    };
    let mut writer = match opts.metrics {
        Some(w) => Some(MetricsWriter::new(w, &sim.header(), cfg.metrics_every)?),
        None => None,
    };
    if let (Some(w), true) = (writer.as_mut(), sim.windows_done() == 0) {
        if let Some(first) = sim.aggregates().snaps.first().cloned() {
            w.snapshot(&first)?;
        }
    }

    let every_s = cfg.checkpoint_every_s;
    let mut next_ckpt_s = if every_s > 0.0 {
        (sim.time_s() / every_s).floor() * every_s + every_s
    } else {
        f64::INFINITY
    };
    let mut checkpoints = Vec::new();

    while sim.windows_done() < sim.windows_total() {
        let out = sim.step_window()?;
        if let Some(w) = writer.as_mut() {
            w.window(&out.record)?;
            if out.reached {
                w.mark("reach", out.record.t)?;
            }
            if out.reset {
                w.mark("reset", out.record.t)?;
            }
            if let Some(s) = &out.snap {
                w.snapshot(s)?;
            }
        }
        if let Some(dir) = opts.checkpoint_dir {
            if sim.time_s() >= next_ckpt_s {
                next_ckpt_s += every_s;
                let path = dir.join(format!("ckpt_{:012}.json", sim.tick));
                crate::checkpoint::save(&path, &sim.checkpoint())?;
                checkpoints.push(path);
            }
        }
    }

    if let Some(w) = writer.as_mut() {
        w.finish(sim.aggregates())?;
    }

    let final_weak_frac = sim
        .network()
        .map(|n| n.plastic().weak_fraction(WEAK_WEIGHT_THRESHOLD));
    Ok(RunResult {
        config_hash: sim.cfg.hash_hex(),
        windows: sim.windows_done(),
        duration_s: sim.time_s(),
        final_beta: sim.beta(),
        reaches: sim.aggregates().reach_times_s.len(),
        resets: sim.aggregates().reset_times_s.len(),
        final_weak_frac,
        aggregates: sim.aggregates().clone(),
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::metrics::parse_stream;

    fn short(mut cfg: ExperimentConfig, duration_s: f64, seed: u64) -> ExperimentConfig {
        cfg.duration_s = duration_s;
        cfg.seed = seed;
        cfg.metrics_every = 1;
        cfg
    }

    #[test]
    fn reaching_learning_run_completes_and_streams() {
        let cfg = short(presets::reaching_small(), 2.0, 3);
        let mut buf = Vec::new();
        let res = run(
            &cfg,
            RunMode::Learning,
            RunOptions {
                metrics: Some(&mut buf),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(res.windows, 1000);
        assert!(res.final_weak_frac.is_some());
        let parsed = parse_stream(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed.header.task, "reaching");
        assert_eq!(parsed.windows.len(), 1000);
        assert!(parsed.windows.iter().all(|w| w.r.is_finite()));
        assert!(parsed.windows.iter().all(|w| w.x.is_some() && w.d.is_none()));
        // The ball starts somewhere and the first processed frame only
        // primes the camera.
        assert_eq!(parsed.windows[0].e, 0);
        let agg = parsed.aggregates.unwrap();
        assert_eq!(agg.windows, 1000);
        assert_eq!(agg.snaps.len(), 1, "initial plasticity snapshot only");
    }

    #[test]
    fn lane_learning_run_completes_and_streams() {
        let cfg = short(presets::lane(), 1.5, 4);
        let mut buf = Vec::new();
        let res = run(
            &cfg,
            RunMode::Learning,
            RunOptions {
                metrics: Some(&mut buf),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(res.windows, 500);
        let parsed = parse_stream(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed.header.task, "lane");
        assert!(parsed.windows.iter().all(|w| w.d.is_some() && w.x.is_none()));
        // The car drives forward from the start line, so the camera sees
        // motion only when it turns; whatever happens must stay finite.
        assert!(parsed
            .windows
            .iter()
            .all(|w| w.d.unwrap().is_finite() && w.b.unwrap().is_finite()));
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let cfg = short(presets::reaching_small(), 1.0, 11);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for buf in [&mut a, &mut b] {
            run(
                &cfg,
                RunMode::Learning,
                RunOptions {
                    metrics: Some(buf),
                    ..RunOptions::default()
                },
            )
            .unwrap();
        }
        assert_eq!(a, b);
        let mut c = Vec::new();
        let cfg2 = short(presets::reaching_small(), 1.0, 12);
        run(
            &cfg2,
            RunMode::Learning,
            RunOptions {
                metrics: Some(&mut c),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn baseline_mode_skips_network_and_draws_held_commands() {
        let cfg = short(presets::reaching_small(), 30.0, 5);
        let res = run(&cfg, RunMode::Baseline, RunOptions::default()).unwrap();
        assert!(res.final_weak_frac.is_none());
        assert_eq!(res.windows, 15_000);
        // The random policy moves the ball around; rewards show up
        // whenever it drifts toward the goal above the speed gate.
        assert!(res.aggregates.reward_sum.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn baseline_is_deterministic_per_seed() {
        let cfg = short(presets::reaching_small(), 5.0, 21);
        let a = run(&cfg, RunMode::Baseline, RunOptions::default()).unwrap();
        let b = run(&cfg, RunMode::Baseline, RunOptions::default()).unwrap();
        assert_eq!(a.aggregates, b.aggregates);
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let cfg = short(presets::reaching_small(), 2.0, 8);
        // Uninterrupted reference.
        let mut full = Vec::new();
        run(
            &cfg,
            RunMode::Learning,
            RunOptions {
                metrics: Some(&mut full),
                ..RunOptions::default()
            },
        )
        .unwrap();

        // Stop at half time, checkpoint, resume.
        let mut sim = Sim::new(&cfg, RunMode::Learning).unwrap();
        while sim.windows_done() < 500 {
            sim.step_window().unwrap();
        }
        let ck = sim.checkpoint();
        let mut second = Vec::new();
        let res = run(
            &cfg,
            RunMode::Learning,
            RunOptions {
                metrics: Some(&mut second),
                resume_from: Some(&ck),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(res.windows, 1000);

        let full_parsed = parse_stream(std::str::from_utf8(&full).unwrap()).unwrap();
        let tail_parsed = parse_stream(std::str::from_utf8(&second).unwrap()).unwrap();
        assert_eq!(tail_parsed.windows.len(), 500);
        assert_eq!(&full_parsed.windows[500..], &tail_parsed.windows[..]);
        assert_eq!(full_parsed.aggregates, tail_parsed.aggregates);
    }

    #[test]
    fn resume_rejects_other_configs_and_modes() {
        let cfg = short(presets::reaching_small(), 1.0, 8);
        let sim = Sim::new(&cfg, RunMode::Learning).unwrap();
        let ck = sim.checkpoint();
        let other = short(presets::reaching_small(), 1.0, 9);
        assert!(matches!(
            Sim::resume(&other, RunMode::Learning, &ck),
            Err(RunError::CheckpointMismatch(_))
        ));
        assert!(matches!(
            Sim::resume(&cfg, RunMode::Baseline, &ck),
            Err(RunError::CheckpointMismatch(_))
        ));
    }

    #[test]
    fn checkpoints_land_on_schedule() {
        let mut cfg = short(presets::reaching_small(), 2.0, 8);
        cfg.checkpoint_every_s = 1.0;
        let dir = tempfile::tempdir().unwrap();
        let res = run(
            &cfg,
            RunMode::Learning,
            RunOptions {
                checkpoint_dir: Some(dir.path()),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(res.checkpoints.len(), 2);
        for p in &res.checkpoints {
            let ck = crate::checkpoint::load(p).unwrap();
            assert_eq!(ck.config_hash, cfg.hash_hex());
        }
    }

    #[test]
    fn reward_filter_tracks_step_input() {
        let mut f = RewardFilter::new(0.5);
        // Constant input converges to it.
        for _ in 0..10_000 {
            f.update(2.0, 0.002);
        }
        assert!((f.smoothed - 2.0).abs() < 1e-6);
        // One window of zero decays by exp(-dt/tau).
        let s = f.update(0.0, 0.002);
        assert!((s - 2.0 * (-0.002f64 / 0.5).exp()).abs() < 1e-12);
    }

    #[test]
    fn annealing_updates_beta_on_schedule() {
        let mut cfg = short(presets::reaching_small(), 2.0, 8);
        // Shrink the annealing interval to make the boundary observable.
        cfg.grid.anneal_interval_s = 1.0;
        cfg.plasticity.lambda = 0.1;
        let mut sim = Sim::new(&cfg, RunMode::Learning).unwrap();
        while sim.windows_done() < 500 {
            sim.step_window().unwrap();
        }
        let expect = cfg.plasticity.beta0 * (-0.1f64 * 1.0).exp();
        assert!((sim.beta() - expect).abs() < 1e-15);
        while sim.windows_done() < 1000 {
            sim.step_window().unwrap();
        }
        let expect = cfg.plasticity.beta0 * (-0.1f64 * 2.0).exp();
        assert!((sim.beta() - expect).abs() < 1e-15);
    }
}
