//! Velocity-controlled ball on a bounded plane with a central goal.

use crate::rngs::SimRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachingConfig {
    /// Half the side length of the square plane, meters.
    pub half_extent_m: f64,
    pub ball_radius_m: f64,
    /// The goal is a disk of this radius centered on the plane.
    pub goal_radius_m: f64,
    /// Minimum gap between a respawned ball center and the goal disk edge.
    pub respawn_clearance_m: f64,
    /// Angular error beyond which the direction bonus is zero, degrees.
    pub beta_lim_deg: f64,
    /// Speeds at or below this earn no reward, m/s.
    pub v_lim_mps: f64,
    pub reward_scale: f64,
}

impl Default for ReachingConfig {
    fn default() -> Self {
        ReachingConfig {
            half_extent_m: 10.0,
            ball_radius_m: 2.0,
            goal_radius_m: 2.0,
            respawn_clearance_m: 1.0,
            beta_lim_deg: 45.0,
            v_lim_mps: 0.1,
            reward_scale: 35.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachingStep {
    pub reward: f64,
    /// The ball entered the goal this step and was respawned.
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachingEnv {
    cfg: ReachingConfig,
    pub ball_x: f64,
    pub ball_y: f64,
}

impl ReachingEnv {
    /// Spawns the ball at a random valid position drawn from `rng`.
    pub fn new(cfg: ReachingConfig, rng: &mut SimRng) -> Self {
        let mut env = ReachingEnv {
            cfg,
            ball_x: 0.0,
            ball_y: 0.0,
        };
        env.respawn(rng);
        env
    }

    pub fn config(&self) -> &ReachingConfig {
        &self.cfg
    }

    fn wall(&self) -> f64 {
        self.cfg.half_extent_m - self.cfg.ball_radius_m
    }

    fn respawn(&mut self, rng: &mut SimRng) {
        let wall = self.wall();
        let min_d = self.cfg.goal_radius_m + self.cfg.respawn_clearance_m;
        loop {
            let x = rng.gen_range(-wall..=wall);
            let y = rng.gen_range(-wall..=wall);
            if (x * x + y * y).sqrt() >= min_d {
                self.ball_x = x;
                self.ball_y = y;
                return;
            }
        }
    }

    /// Direction bonus plus speed gate evaluated at the current ball
    /// position: reward_scale * sqrt(|v|) * (direction + 1)^5, where the
    /// direction term falls linearly from 1 (dead on target) to 0 at the
    /// angular limit, and any speed at or below the limit earns nothing.
    pub fn reward(&self, vx: f64, vy: f64) -> f64 {
        let speed = (vx * vx + vy * vy).sqrt();
        if speed <= self.cfg.v_lim_mps {
            return 0.0;
        }
        // Goal is the plane center, so the target direction is -position.
        let gx = -self.ball_x;
        let gy = -self.ball_y;
        let gn = (gx * gx + gy * gy).sqrt();
        let beta_deg = if gn == 0.0 {
            0.0
        } else {
            let cos_b = ((vx * gx + vy * gy) / (speed * gn)).clamp(-1.0, 1.0);
            cos_b.acos().to_degrees()
        };
        let r_beta = if beta_deg < self.cfg.beta_lim_deg {
            1.0 - beta_deg / self.cfg.beta_lim_deg
        } else {
            0.0
        };
        self.cfg.reward_scale * speed.sqrt() * (r_beta + 1.0).powi(5)
    }

    /// Advance the ball by one window. The reward is evaluated against the
    /// position the command was issued at. A goal entry respawns the ball;
    /// nothing downstream learns of the reset except through the camera.
    pub fn step(&mut self, vx: f64, vy: f64, dt_s: f64, rng: &mut SimRng) -> ReachingStep {
        let reward = self.reward(vx, vy);
        let wall = self.wall();
        self.ball_x = (self.ball_x + vx * dt_s).clamp(-wall, wall);
        self.ball_y = (self.ball_y + vy * dt_s).clamp(-wall, wall);
        let dist = (self.ball_x * self.ball_x + self.ball_y * self.ball_y).sqrt();
        let reached = dist <= self.cfg.goal_radius_m;
        if reached {
            self.respawn(rng);
        }
        ReachingStep { reward, reached }
    }
}
