//! Population decoding of motor spikes into actuator commands.
//!
//! Each motor neuron drives a leaky activity counter updated once per sync
//! window. The reaching task reads the counters as a population vector
//! (preferred directions equally spaced on the circle); the lane task splits
//! them into a left and a right pool and discretizes the normalized pool
//! difference into five steering angles.

use serde::{Deserialize, Serialize};

/// Leaky per-motor activity counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTrace {
    pub a: Vec<f64>,
    tau_s: f64,
}

impl ActivityTrace {
    pub fn new(n_motors: usize, tau_s: f64) -> Self {
        ActivityTrace {
            a: vec![0.0; n_motors],
            tau_s,
        }
    }

    /// Decay by one window and add this window's spike counts.
    pub fn update(&mut self, counts: &[u16], window_s: f64) {
        let decay = (-window_s / self.tau_s).exp();
        for (a, &c) in self.a.iter_mut().zip(counts) {
            *a = *a * decay + c as f64;
        }
    }
}

/// Preferred direction of motor `m` out of `n`: angle 2*pi*(m+1)/n.
fn preferred(m: usize, n: usize) -> (f64, f64) {
    let beta = 2.0 * std::f64::consts::PI * (m + 1) as f64 / n as f64;
    (beta.cos(), beta.sin())
}

/// Population-vector velocity: gain * sum_k a_k * (cos beta_k, sin beta_k).
pub fn decode_velocity(activities: &[f64], gain: f64) -> (f64, f64) {
    let n = activities.len();
    let (mut x, mut y) = (0.0, 0.0);
    for (m, &a) in activities.iter().enumerate() {
        let (c, s) = preferred(m, n);
        x += a * c;
        y += a * s;
    }
    (gain * x, gain * y)
}

/// Normalized left/right pool contrast scaled to steering units. The first
/// half of `activities` is the left pool. Returns 0 when total activity is at
/// or below `eps` (no evidence, go straight).
pub fn steering_value(activities: &[f64], scale: f64, eps: f64) -> f64 {
    let half = activities.len() / 2;
    let left: f64 = activities[..half].iter().sum();
    let right: f64 = activities[half..].iter().sum();
    let total = left + right;
    if total <= eps {
        return 0.0;
    }
    scale * (left - right) / total
}

/// Five discrete steering angles. Positive angles turn the vehicle left
/// (counterclockwise) in the environment's convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteeringCmd {
    HardRight,
    Right,
    Straight,
    Left,
    HardLeft,
}

impl SteeringCmd {
    pub const ALL: [SteeringCmd; 5] = [
        SteeringCmd::HardRight,
        SteeringCmd::Right,
        SteeringCmd::Straight,
        SteeringCmd::Left,
        SteeringCmd::HardLeft,
    ];

    pub fn angle_deg(self) -> f64 {
        match self {
            SteeringCmd::HardRight => -30.0,
            SteeringCmd::Right => -15.0,
            SteeringCmd::Straight => 0.0,
            SteeringCmd::Left => 15.0,
            SteeringCmd::HardLeft => 30.0,
        }
    }
}

/// Discretize a steering value. `left_steers_left` keeps the convention that
/// a dominant left pool turns the vehicle left; setting it false mirrors the
/// mapping. Band edges sit at +-2.5 and +-10, symmetric and total: every
/// finite value maps to exactly one command.
pub fn steering_command(value: f64, left_steers_left: bool) -> SteeringCmd {
    let s = if left_steers_left { value } else { -value };
    if s > 10.0 {
        SteeringCmd::HardLeft
    } else if s > 2.5 {
        SteeringCmd::Left
    } else if s >= -2.5 {
        SteeringCmd::Straight
    } else if s >= -10.0 {
        SteeringCmd::Right
    } else {
        SteeringCmd::HardRight
    }
}
