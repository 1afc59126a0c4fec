//! Experiment configuration: one TOML document describes a complete run.
//!
//! Every field has a default, so a config file only states what it changes.
//! Unknown keys are rejected. `validate` collects every problem it finds
//! rather than stopping at the first, and `hash_hex` gives a digest of the
//! fully resolved config that metrics and checkpoints embed so outputs can
//! be traced back to their exact settings.

use crate::builder::{LaneTopology, ReachingNeurons, ReachingTopology};
use crate::env::lane::LaneConfig;
use crate::env::reaching::ReachingConfig;
use crate::neuron::{NeuronParams, PspKernel};
use crate::plasticity::PlasticityConfig;
use crate::time::TimeGrid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Reaching,
    Lane,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Reaching => write!(f, "reaching"),
            Task::Lane => write!(f, "lane"),
        }
    }
}

/// Simulation clock settings, in the units people write them in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub fine_dt_ms: f64,
    pub coarse_dt_ms: f64,
    pub window_ms: f64,
    pub anneal_interval_s: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            fine_dt_ms: 1.0,
            coarse_dt_ms: 100.0,
            window_ms: 2.0,
            anneal_interval_s: 600.0,
        }
    }
}

impl GridSettings {
    pub fn grid(&self) -> Result<TimeGrid, crate::time::GridError> {
        TimeGrid::new(
            self.fine_dt_ms,
            self.coarse_dt_ms,
            self.window_ms,
            self.anneal_interval_s,
        )
    }
}

/// One neuron population's parameters, with times in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronSettings {
    pub rate_scale_hz: f64,
    pub sensitivity: f64,
    pub rate_max_hz: f64,
    pub refractory_ticks: u32,
    pub psp_rise_ms: f64,
    pub psp_fall_ms: f64,
}

impl Default for NeuronSettings {
    fn default() -> Self {
        NeuronSettings {
            rate_scale_hz: 10.0,
            sensitivity: 1.0,
            rate_max_hz: 1000.0,
            refractory_ticks: 2,
            psp_rise_ms: 2.0,
            psp_fall_ms: 20.0,
        }
    }
}

impl NeuronSettings {
    fn axis_default() -> Self {
        NeuronSettings {
            rate_scale_hz: 0.1,
            sensitivity: 1.0,
            rate_max_hz: 10_000.0,
            refractory_ticks: 2,
            psp_rise_ms: 0.5,
            psp_fall_ms: 2.0,
        }
    }

    pub fn params(&self) -> Result<NeuronParams, String> {
        let kernel = PspKernel::new(self.psp_rise_ms * 1e-3, self.psp_fall_ms * 1e-3)
            .map_err(|e| e.to_string())?;
        Ok(NeuronParams {
            rate_scale_hz: self.rate_scale_hz,
            sensitivity: self.sensitivity,
            rate_max_hz: self.rate_max_hz,
            refractory_ticks: self.refractory_ticks,
            kernel,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronGroups {
    pub motor: NeuronSettings,
    pub exploration: NeuronSettings,
    pub axis: NeuronSettings,
}

impl Default for NeuronGroups {
    fn default() -> Self {
        NeuronGroups {
            motor: NeuronSettings::default(),
            exploration: NeuronSettings::default(),
            axis: NeuronSettings::axis_default(),
        }
    }
}

/// Event camera settings shared by both tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSettings {
    pub threshold: f64,
    pub eps: f64,
    /// Lane task only: mean injected spikes per pooled event per window.
    pub injection_gain: f64,
}

impl Default for CameraSettings {
    fn default() -> Self {
        CameraSettings {
            threshold: 0.15,
            eps: 1e-3,
            injection_gain: 1.0,
        }
    }
}

/// Readout and reward smoothing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSettings {
    pub decode_tau_s: f64,
    pub velocity_gain: f64,
    pub steer_scale: f64,
    pub steer_eps: f64,
    /// Whether the first motor pool steers left.
    pub left_pool_steers_left: bool,
    pub reward_tau_s: f64,
    /// Baseline mode: how long each random command is held.
    pub baseline_hold_s: f64,
    /// Baseline mode, reaching: speed cap of the random velocity disk.
    pub baseline_v_cap_mps: f64,
}

impl Default for ControlSettings {
    fn default() -> Self {
        ControlSettings {
            decode_tau_s: 0.1,
            velocity_gain: 1.0,
            steer_scale: 20.0,
            steer_eps: 1e-6,
            left_pool_steers_left: true,
            reward_tau_s: 0.5,
            baseline_hold_s: 0.1,
            baseline_v_cap_mps: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub duration_s: f64,
    /// Emit one metrics record every this many decision windows.
    pub metrics_every: u32,
    /// Seconds between checkpoints; zero disables them.
    pub checkpoint_every_s: f64,
    pub grid: GridSettings,
    pub plasticity: PlasticityConfig,
    pub neurons: NeuronGroups,
    pub camera: CameraSettings,
    pub control: ControlSettings,
    pub reaching_net: ReachingTopology,
    pub reaching_env: ReachingConfig,
    pub lane_net: LaneTopology,
    pub lane_env: LaneConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Reaching,
            seed: 1,
            duration_s: 60.0,
            metrics_every: 1,
            checkpoint_every_s: 0.0,
            grid: GridSettings::default(),
            plasticity: PlasticityConfig::default(),
            neurons: NeuronGroups::default(),
            camera: CameraSettings::default(),
            control: ControlSettings::default(),
            reaching_net: ReachingTopology::default(),
            reaching_env: ReachingConfig::default(),
            lane_net: LaneTopology::default(),
            lane_env: LaneConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Digest of the fully resolved config, for provenance lines in outputs.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            use fmt::Write;
            write!(out, "{b:02x}").unwrap();
        }
        out
    }

    pub fn reaching_neurons(&self) -> Result<ReachingNeurons, ConfigError> {
        let mut errs = Vec::new();
        let motor = self.neurons.motor.params();
        let exploration = self.neurons.exploration.params();
        let axis = self.neurons.axis.params();
        for (name, r) in [
            ("neurons.motor", &motor),
            ("neurons.exploration", &exploration),
            ("neurons.axis", &axis),
        ] {
            if let Err(e) = r {
                errs.push(format!("{name}: {e}"));
            }
        }
        if !errs.is_empty() {
            return Err(ConfigError::Invalid(errs));
        }
        Ok(ReachingNeurons {
            motor: motor.unwrap(),
            exploration: exploration.unwrap(),
            axis: axis.unwrap(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };

        check(
            self.duration_s.is_finite() && self.duration_s > 0.0,
            "duration_s must be positive",
        );
        check(self.metrics_every >= 1, "metrics_every must be at least 1");
        check(
            self.checkpoint_every_s.is_finite() && self.checkpoint_every_s >= 0.0,
            "checkpoint_every_s must be zero or positive",
        );
        if let Err(e) = self.grid.grid() {
            errs.push(format!("grid: {e}"));
        }

        let p = &self.plasticity;
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        check(p.beta0 > 0.0, "plasticity.beta0 must be positive");
        check(p.lambda >= 0.0, "plasticity.lambda must be nonnegative");
        check(
            p.temperature >= 0.0,
            "plasticity.temperature must be nonnegative",
        );
        check(p.c_p >= 0.0, "plasticity.c_p must be nonnegative");
        check(p.tau_e_s > 0.0, "plasticity.tau_e_s must be positive");
        check(p.tau_g_s > 0.0, "plasticity.tau_g_s must be positive");
        check(
            p.theta_min < p.theta_max,
            "plasticity.theta_min must be below theta_max",
        );
        check(p.dtheta_max > 0.0, "plasticity.dtheta_max must be positive");
        check(p.w0 > 0.0, "plasticity.w0 must be positive");
        check(
            p.weight_mult > 0.0,
            "plasticity.weight_mult must be positive",
        );

        for (name, n) in [
            ("neurons.motor", &self.neurons.motor),
            ("neurons.exploration", &self.neurons.exploration),
            ("neurons.axis", &self.neurons.axis),
        ] {
            let mut check = |ok: bool, msg: &str| {
                if !ok {
                    errs.push(format!("{name}.{msg}"));
                }
            };
            check(n.rate_scale_hz > 0.0, "rate_scale_hz must be positive");
            check(n.sensitivity > 0.0, "sensitivity must be positive");
            check(n.rate_max_hz > 0.0, "rate_max_hz must be positive");
            check(
                n.psp_rise_ms > 0.0 && n.psp_fall_ms > n.psp_rise_ms,
                "psp_rise_ms must be positive and below psp_fall_ms",
            );
        }

        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        check(self.camera.threshold > 0.0, "camera.threshold must be positive");
        check(self.camera.eps > 0.0, "camera.eps must be positive");
        check(
            self.camera.injection_gain > 0.0,
            "camera.injection_gain must be positive",
        );

        let c = &self.control;
        check(c.decode_tau_s > 0.0, "control.decode_tau_s must be positive");
        check(
            c.velocity_gain > 0.0,
            "control.velocity_gain must be positive",
        );
        check(c.steer_scale > 0.0, "control.steer_scale must be positive");
        check(c.steer_eps > 0.0, "control.steer_eps must be positive");
        check(c.reward_tau_s > 0.0, "control.reward_tau_s must be positive");
        check(
            c.baseline_hold_s > 0.0,
            "control.baseline_hold_s must be positive",
        );
        check(
            c.baseline_v_cap_mps > 0.0,
            "control.baseline_v_cap_mps must be positive",
        );

        let rn = &self.reaching_net;
        check(
            rn.camera_w >= 1 && rn.camera_h >= 1,
            "reaching_net camera must be at least 1x1",
        );
        check(rn.n_motors >= 2, "reaching_net.n_motors must be at least 2");
        check(
            rn.multiplicity >= 1,
            "reaching_net.multiplicity must be at least 1",
        );
        check(rn.theta_sd >= 0.0, "reaching_net.theta_sd must be nonnegative");
        check(rn.delay_ticks >= 1, "reaching_net.delay_ticks must be at least 1");

        let ln = &self.lane_net;
        check(
            ln.pooled_w >= 1 && ln.pooled_h >= 1,
            "lane_net pooled grid must be at least 1x1",
        );
        check(
            ln.n_motors >= 2 && ln.n_motors % 2 == 0,
            "lane_net.n_motors must be even and at least 2",
        );
        check(
            ln.multiplicity >= 1,
            "lane_net.multiplicity must be at least 1",
        );
        check(ln.theta_sd >= 0.0, "lane_net.theta_sd must be nonnegative");
        check(ln.delay_ticks >= 1, "lane_net.delay_ticks must be at least 1");

        let re = &self.reaching_env;
        check(
            re.half_extent_m > 0.0,
            "reaching_env.half_extent_m must be positive",
        );
        check(
            re.ball_radius_m > 0.0 && re.ball_radius_m < re.half_extent_m,
            "reaching_env.ball_radius_m must be positive and inside the arena",
        );
        check(
            re.goal_radius_m > 0.0,
            "reaching_env.goal_radius_m must be positive",
        );
        check(
            re.respawn_clearance_m >= 0.0,
            "reaching_env.respawn_clearance_m must be nonnegative",
        );
        check(
            re.beta_lim_deg > 0.0 && re.beta_lim_deg <= 180.0,
            "reaching_env.beta_lim_deg must be in (0, 180]",
        );
        check(re.v_lim_mps >= 0.0, "reaching_env.v_lim_mps must be nonnegative");
        check(
            re.reward_scale > 0.0,
            "reaching_env.reward_scale must be positive",
        );

        let le = &self.lane_env;
        check(
            le.straight_len_m > 0.0 && le.arc_radius_m > 0.0,
            "lane_env track dimensions must be positive",
        );
        check(le.lane_width_m > 0.0, "lane_env.lane_width_m must be positive");
        check(
            le.off_track_margin_m >= 0.0,
            "lane_env.off_track_margin_m must be nonnegative",
        );
        check(le.speed_mps > 0.0, "lane_env.speed_mps must be positive");
        check(le.wheelbase_m > 0.0, "lane_env.wheelbase_m must be positive");
        check(
            le.reward_beta_coeff >= 0.0 && le.reward_d_coeff >= 0.0,
            "lane_env reward coefficients must be nonnegative",
        );

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}

/// Ready-made configs for the two tasks at desk scale.
///
/// These keep the sampler's stationary statistics (temperature, prior, grid)
/// while raising the learning-rate scale and gradient clip so that progress
/// is visible within hours of simulated time instead of days.
pub mod presets {
    use super::*;

    pub fn reaching() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            task: Task::Reaching,
            duration_s: 7200.0,
            metrics_every: 100,
            ..ExperimentConfig::default()
        };
        cfg.plasticity.beta0 = 1e-2;
        cfg.plasticity.dtheta_max = 50.0;
        cfg.neurons.motor.rate_scale_hz = 50.0;
        cfg.neurons.motor.sensitivity = 150.0;
        cfg.neurons.exploration.sensitivity = 100.0;
        cfg.control.decode_tau_s = 0.3;
        cfg.control.velocity_gain = 0.15;
        cfg
    }

    /// Reaching on the small camera used by the long test runs.
    pub fn reaching_small() -> ExperimentConfig {
        let mut cfg = reaching();
        cfg.reaching_net.camera_w = 8;
        cfg.reaching_net.camera_h = 8;
        cfg
    }

    pub fn lane() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            task: Task::Lane,
            duration_s: 14_400.0,
            metrics_every: 100,
            ..ExperimentConfig::default()
        };
        cfg.grid.window_ms = 3.0;
        cfg.plasticity.beta0 = 1e-3;
        cfg.plasticity.dtheta_max = 50.0;
        cfg.neurons.motor.sensitivity = 500.0;
        cfg.camera.injection_gain = 0.1;
        cfg
    }
}
