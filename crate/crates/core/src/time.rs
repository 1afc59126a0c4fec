//! Dual-resolution simulation clock.
//!
//! Neuron and trace dynamics advance on a fine grid, synaptic parameters on a
//! coarse grid, and the control loop exchanges data once per sync window. All
//! three are pinned to integer tick arithmetic so that boundary checks never
//! involve float comparisons; the only float quantity is the tick width in
//! seconds used by the integrators.

use serde::{Deserialize, Serialize};

/// Tick layout of one run: every cadence is an exact multiple of the fine step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Fine step in seconds (neurons, y/e/g traces).
    pub fine_dt_s: f64,
    /// Fine ticks per coarse step (theta/w updates).
    pub coarse_every: u64,
    /// Fine ticks per sync window (sensor -> network -> actuator exchange).
    pub window_ticks: u64,
    /// Fine ticks between annealing updates of the learning rate.
    pub anneal_every: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("{name} must be positive, got {value} ms")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} ({value} ms) must be an integer multiple of the fine step ({fine} ms)")]
    NotAMultiple { name: &'static str, value: f64, fine: f64 },
    #[error("sync window must be 1-3 ms, got {0} ms")]
    WindowRange(f64),
}

/// Millisecond count as integer nanoseconds, or None when it is not
/// representable cleanly (guards against 0.1 + 0.2 style config values).
fn as_nanos(ms: f64) -> Option<u64> {
    if !ms.is_finite() || ms <= 0.0 {
        return None;
    }
    let ns = ms * 1e6;
    let rounded = ns.round();
    if (ns - rounded).abs() > 1e-3 || rounded < 1.0 {
        return None;
    }
    Some(rounded as u64)
}

impl TimeGrid {
    pub fn new(
        fine_dt_ms: f64,
        coarse_dt_ms: f64,
        window_ms: f64,
        anneal_interval_s: f64,
    ) -> Result<Self, GridError> {
        let fine_ns = as_nanos(fine_dt_ms).ok_or(GridError::NonPositive {
            name: "grid.fine_dt_ms",
            value: fine_dt_ms,
        })?;
        let ratio = |name: &'static str, ms: f64| -> Result<u64, GridError> {
            let ns = as_nanos(ms).ok_or(GridError::NonPositive { name, value: ms })?;
            if ns % fine_ns != 0 {
                return Err(GridError::NotAMultiple {
                    name,
                    value: ms,
                    fine: fine_dt_ms,
                });
            }
            Ok(ns / fine_ns)
        };
        let coarse_every = ratio("grid.coarse_dt_ms", coarse_dt_ms)?;
        if !(1.0..=3.0).contains(&window_ms) {
            return Err(GridError::WindowRange(window_ms));
        }
        let window_ticks = ratio("grid.window_ms", window_ms)?;
        let anneal_every = ratio("grid.anneal_interval_s", anneal_interval_s * 1e3)?;
        Ok(TimeGrid {
            fine_dt_s: fine_ns as f64 * 1e-9,
            coarse_every,
            window_ticks,
            anneal_every,
        })
    }

    /// Seconds elapsed after `tick` completed fine steps.
    pub fn time_s(&self, tick: u64) -> f64 {
        tick as f64 * self.fine_dt_s
    }

    /// True on ticks that close a coarse step (tick 0 is not a boundary).
    pub fn is_coarse_boundary(&self, tick: u64) -> bool {
        tick > 0 && tick % self.coarse_every == 0
    }

    pub fn is_anneal_boundary(&self, tick: u64) -> bool {
        tick > 0 && tick % self.anneal_every == 0
    }

    /// Coarse step width in seconds.
    pub fn coarse_dt_s(&self) -> f64 {
        self.coarse_every as f64 * self.fine_dt_s
    }

    /// Window width in seconds.
    pub fn window_s(&self) -> f64 {
        self.window_ticks as f64 * self.fine_dt_s
    }

    /// Number of whole windows in `duration_s`, rounding down.
    pub fn windows_in(&self, duration_s: f64) -> u64 {
        if duration_s <= 0.0 {
            return 0;
        }
        let ticks = (duration_s / self.fine_dt_s).round() as u64;
        ticks / self.window_ticks
    }
}
