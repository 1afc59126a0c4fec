//! Stochastic point neurons with escape-noise firing.
//!
//! The membrane is a linear sum of double-exponential PSPs, realized as a
//! two-state filter (one rise, one fall accumulator) whose per-tick decay uses
//! the exact factor exp(-dt/tau), so a lone impulse reproduces the analytic
//! kernel at every grid point to float rounding. Firing is an inhomogeneous
//! Bernoulli process: the instantaneous rate is an exponential function of the
//! membrane, clamped, and a spike is drawn each tick with p = 1 - exp(-rate*dt).
//! A spike starts an absolute refractory period during which the probability
//! is zero; the membrane itself never resets, which keeps filtering linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KernelError {
    #[error("PSP time constants must be positive, got rise {rise} s, fall {fall} s")]
    NonPositive { rise: f64, fall: f64 },
    #[error("PSP rise time ({rise} s) must be shorter than fall time ({fall} s)")]
    RiseNotBelowFall { rise: f64, fall: f64 },
}

/// Double-exponential PSP shape, peak-normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PspKernel {
    pub tau_rise_s: f64,
    pub tau_fall_s: f64,
    /// Peak of the raw difference of exponentials; divides the filter output.
    norm: f64,
}

impl PspKernel {
    pub fn new(tau_rise_s: f64, tau_fall_s: f64) -> Result<Self, KernelError> {
        if !(tau_rise_s > 0.0) || !(tau_fall_s > 0.0) {
            return Err(KernelError::NonPositive {
                rise: tau_rise_s,
                fall: tau_fall_s,
            });
        }
        if tau_rise_s >= tau_fall_s {
            return Err(KernelError::RiseNotBelowFall {
                rise: tau_rise_s,
                fall: tau_fall_s,
            });
        }
        let t_peak = tau_rise_s * tau_fall_s / (tau_fall_s - tau_rise_s)
            * (tau_fall_s / tau_rise_s).ln();
        let norm = (-t_peak / tau_fall_s).exp() - (-t_peak / tau_rise_s).exp();
        Ok(PspKernel {
            tau_rise_s,
            tau_fall_s,
            norm,
        })
    }

    /// Time from impulse to kernel peak.
    pub fn peak_time_s(&self) -> f64 {
        self.tau_rise_s * self.tau_fall_s / (self.tau_fall_s - self.tau_rise_s)
            * (self.tau_fall_s / self.tau_rise_s).ln()
    }

    /// Kernel amplitude `elapsed` seconds after an impulse; 0 before it.
    pub fn value(&self, elapsed_s: f64) -> f64 {
        if elapsed_s < 0.0 {
            return 0.0;
        }
        ((-elapsed_s / self.tau_fall_s).exp() - (-elapsed_s / self.tau_rise_s).exp()) / self.norm
    }

    /// Per-tick decay factors for the two filter states.
    pub fn decay(&self, dt_s: f64) -> PspDecay {
        PspDecay {
            rise: (-dt_s / self.tau_rise_s).exp(),
            fall: (-dt_s / self.tau_fall_s).exp(),
        }
    }
}

/// Cached exp(-dt/tau) pair for one grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PspDecay {
    pub rise: f64,
    pub fall: f64,
}

/// Threshold below which decaying state is snapped to zero. Long-idle traces
/// otherwise drift into denormal range where arithmetic is slow on some CPUs.
pub(crate) const FLUSH_EPS: f64 = 1e-300;

/// Two-state linear PSP filter. An impulse of amount `a` raises both states by
/// `a`; the output (fall - rise) / norm then traces `a` times the unit kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PspFilter {
    pub s_rise: f64,
    pub s_fall: f64,
}

impl PspFilter {
    pub fn step(&mut self, decay: &PspDecay, impulse: f64) {
        self.s_rise = self.s_rise * decay.rise + impulse;
        self.s_fall = self.s_fall * decay.fall + impulse;
        if self.s_rise.abs() < FLUSH_EPS {
            self.s_rise = 0.0;
        }
        if self.s_fall.abs() < FLUSH_EPS {
            self.s_fall = 0.0;
        }
    }

    pub fn level(&self, kernel: &PspKernel) -> f64 {
        (self.s_fall - self.s_rise) / kernel.norm
    }
}

/// Escape-noise link and refractory setting shared by one population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Firing rate at zero membrane, in Hz.
    pub rate_scale_hz: f64,
    /// Membrane units per e-fold of rate.
    pub sensitivity: f64,
    /// Rate clamp in Hz.
    pub rate_max_hz: f64,
    /// Absolute refractory period in fine ticks.
    pub refractory_ticks: u32,
    pub kernel: PspKernel,
}

impl NeuronParams {
    /// Instantaneous firing rate for a membrane level. Deterministic in the
    /// membrane alone; refractoriness gates the spike draw, not the rate.
    pub fn rate_hz(&self, membrane: f64) -> f64 {
        let r = self.rate_scale_hz * (membrane / self.sensitivity).exp();
        r.min(self.rate_max_hz)
    }
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            rate_scale_hz: 10.0,
            sensitivity: 1.0,
            rate_max_hz: 1000.0,
            refractory_ticks: 2,
            kernel: PspKernel::new(2e-3, 20e-3).expect("default kernel taus are valid"),
        }
    }
}

/// State of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub filter: PspFilter,
    /// Ticks left with zero spike probability.
    pub refractory_left: u32,
    /// Escape rate computed on the last step, from the membrane alone.
    pub rate_hz: f64,
    /// Conditional mean of the last spike draw in 1/s units: 0 on a
    /// refractory tick, (1 - exp(-rate*dt))/dt otherwise. Subtracting this
    /// rather than the raw escape rate keeps the plasticity drive z - hazard
    /// at zero mean for any rate, so a motor pinned near its rate clamp (or
    /// spending most ticks refractory) no longer leaks a systematic negative
    /// term into its eligibility traces.
    pub hazard_hz: f64,
}

impl Default for Neuron {
    fn default() -> Self {
        Neuron {
            filter: PspFilter::default(),
            refractory_left: 0,
            rate_hz: 0.0,
            hazard_hz: 0.0,
        }
    }
}

impl Neuron {
    pub fn membrane(&self, kernel: &PspKernel) -> f64 {
        self.filter.level(kernel)
    }

    /// Advance one tick: decay the filter, add the delivered impulse, refresh
    /// the rate, then draw a spike unless refractory.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        params: &NeuronParams,
        decay: &PspDecay,
        impulse: f64,
        dt_s: f64,
        rng: &mut R,
    ) -> bool {
        self.filter.step(decay, impulse);
        self.rate_hz = params.rate_hz(self.filter.level(&params.kernel));
        if self.refractory_left > 0 {
            self.refractory_left -= 1;
            self.hazard_hz = 0.0;
            return false;
        }
        let p = -(-self.rate_hz * dt_s).exp_m1();
        self.hazard_hz = p / dt_s;
        let spiked = rng.gen::<f64>() < p;
        if spiked {
            self.refractory_left = params.refractory_ticks;
        }
        spiked
    }
}
