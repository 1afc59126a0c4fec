//! Constant-speed steered vehicle that must stay on a closed lane.

use crate::track::{Pose, Track, TrackErrors};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneConfig {
    pub straight_len_m: f64,
    pub arc_radius_m: f64,
    pub lane_width_m: f64,
    pub wheelbase_m: f64,
    pub speed_mps: f64,
    /// Extra slack beyond the lane edge before a reset, meters.
    pub off_track_margin_m: f64,
    /// Angular falloff coefficient, per squared degree.
    pub reward_beta_coeff: f64,
    /// Lateral falloff coefficient, per squared meter.
    pub reward_d_coeff: f64,
}

impl Default for LaneConfig {
    fn default() -> Self {
        LaneConfig {
            straight_len_m: 10.0,
            arc_radius_m: 2.0,
            lane_width_m: 0.5,
            wheelbase_m: 0.2,
            speed_mps: 0.5,
            off_track_margin_m: 0.1,
            reward_beta_coeff: 0.03,
            reward_d_coeff: 70.0,
        }
    }
}

/// Alignment score in (0, 1]: unity on the centerline heading along it,
/// roughly halved per 5 degrees of angular error or 0.1 m of lateral error.
pub fn lane_reward(beta_err_deg: f64, d_err_m: f64, cfg: &LaneConfig) -> f64 {
    (-cfg.reward_beta_coeff * beta_err_deg * beta_err_deg
        - cfg.reward_d_coeff * d_err_m * d_err_m)
        .exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneStep {
    pub reward: f64,
    pub errors: TrackErrors,
    /// The vehicle left the lane this step and was reset to the start pose.
    pub off_track: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneEnv {
    cfg: LaneConfig,
    track: Track,
    pub pose: Pose,
}

impl LaneEnv {
    pub fn new(cfg: LaneConfig) -> Self {
        let track = Track::new(cfg.straight_len_m, cfg.arc_radius_m);
        LaneEnv {
            cfg,
            track,
            pose: track.start_pose(),
        }
    }

    pub fn config(&self) -> &LaneConfig {
        &self.cfg
    }

    pub fn track(&self) -> &Track {
        &self.track
    }

    pub fn errors(&self) -> TrackErrors {
        self.track.errors(&self.pose)
    }

    /// Advance one window at constant speed with the given steering angle.
    /// The heading turns first and the position then advances along the new
    /// heading. Reward reflects the post-move pose; leaving the lane resets
    /// the pose to the start without telling anyone downstream.
    pub fn step(&mut self, steer_deg: f64, dt_s: f64) -> LaneStep {
        let yaw_rate = self.cfg.speed_mps / self.cfg.wheelbase_m * steer_deg.to_radians().tan();
        self.pose.heading += yaw_rate * dt_s;
        let (hx, hy) = self.pose.heading_unit();
        self.pose.x += self.cfg.speed_mps * dt_s * hx;
        self.pose.y += self.cfg.speed_mps * dt_s * hy;
        let errors = self.track.errors(&self.pose);
        let reward = lane_reward(errors.beta_err_deg, errors.d_err_m, &self.cfg);
        let off_track = errors.d_err_m > self.cfg.lane_width_m / 2.0 + self.cfg.off_track_margin_m;
        if off_track {
            self.pose = self.track.start_pose();
        }
        LaneStep {
            reward,
            errors,
            off_track,
        }
    }
}
