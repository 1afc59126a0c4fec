//! Reward-gated synaptic sampling.
//!
//! Each plastic synapse carries a presynaptic trace y (shared across synapses
//! with the same source), an eligibility trace e, a reward-gradient
//! accumulator g, a sampled parameter theta, and the mapped weight w. The fine
//! grid advances y, e, g every tick; the coarse grid moves theta by a drift
//! plus Gaussian exploration noise and re-maps w. The learning rate decays on
//! a fixed annealing cadence, which shrinks drift and noise together.
//!
//! Fine-grid updates (per tick of width dt):
//!   e <- e * exp(-dt/tau_e) + dt * w * y * (z - hazard)
//!   g <- clip(g * exp(-dt/tau_g) + dt * r * e, +-dtheta_max)
//! where z is 1/dt on a postsynaptic spike tick and 0 otherwise, hazard is
//! the conditional mean of that tick's spike draw in 1/s (zero while the
//! neuron is refractory), and r is the broadcast reward. Subtracting the
//! conditional mean keeps e centered under the current policy at any firing
//! rate, so only reward correlation moves g.
//!
//! Coarse-grid update (per step of width Dt, standard normal n):
//!   theta <- clamp(theta + beta*(c_p*(mu - theta) + c_g*g)*Dt
//!                        + sqrt(2*T*beta*Dt)*n, theta_min, theta_max)
//!   w     <- weight_mult * w0 * exp(theta - theta0)   if theta > 0, else 0

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::neuron::{PspDecay, PspFilter, PspKernel, FLUSH_EPS};

/// Constants of the sampling rule. Weight-mapping and drift parameters live
/// together because checkpoints must capture them as one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlasticityConfig {
    /// Initial learning rate.
    pub beta0: f64,
    /// Annealing rate per second of simulated time.
    pub lambda: f64,
    /// Exploration temperature.
    pub temperature: f64,
    /// Prior pull strength toward `mu`.
    pub c_p: f64,
    /// Gradient gain.
    pub c_g: f64,
    /// Prior mean.
    pub mu: f64,
    /// Eligibility time constant in seconds.
    pub tau_e_s: f64,
    /// Gradient time constant in seconds.
    pub tau_g_s: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Symmetric clip on g.
    pub dtheta_max: f64,
    /// Base weight scale.
    pub w0: f64,
    /// Parameter offset of the weight map.
    pub theta0: f64,
    /// Output multiplier applied on top of w0.
    pub weight_mult: f64,
}

impl Default for PlasticityConfig {
    fn default() -> Self {
        PlasticityConfig {
            beta0: 1e-7,
            lambda: 8.5e-5,
            temperature: 0.1,
            c_p: 0.0,
            c_g: 1.0,
            mu: 0.0,
            tau_e_s: 1.0,
            tau_g_s: 50.0,
            theta_min: -2.0,
            theta_max: 5.0,
            dtheta_max: 1.0,
            w0: 1.0,
            theta0: 0.0,
            weight_mult: 10.0,
        }
    }
}

/// One eligibility step. `z` contributes 1/dt on a spike tick, making the
/// spike's total contribution w*y invariant under grid refinement;
/// `post_hazard_hz` is the conditional mean of the postsynaptic spike draw.
#[inline(always)]
pub fn step_eligibility(
    e: f64,
    alpha_e: f64,
    dt_s: f64,
    w: f64,
    y: f64,
    post_spiked: bool,
    post_hazard_hz: f64,
) -> f64 {
    let z = if post_spiked { 1.0 / dt_s } else { 0.0 };
    e * alpha_e + dt_s * w * y * (z - post_hazard_hz)
}

/// One gradient step; the result is always inside the clip band.
#[inline(always)]
pub fn step_gradient(g: f64, alpha_g: f64, dt_s: f64, reward: f64, e: f64, clip: f64) -> f64 {
    (g * alpha_g + dt_s * reward * e).clamp(-clip, clip)
}

/// One coarse parameter step with pre-drawn standard normal `n`.
#[inline(always)]
pub fn step_parameter(
    theta: f64,
    g: f64,
    n: f64,
    cfg: &PlasticityConfig,
    beta: f64,
    coarse_dt_s: f64,
) -> f64 {
    let drift = beta * (cfg.c_p * (cfg.mu - theta) + cfg.c_g * g) * coarse_dt_s;
    let noise = (2.0 * cfg.temperature * beta * coarse_dt_s).sqrt() * n;
    (theta + drift + noise).clamp(cfg.theta_min, cfg.theta_max)
}

/// Parameter-to-weight map: retracted (theta <= 0) synapses carry zero weight.
#[inline(always)]
pub fn map_weight(theta: f64, cfg: &PlasticityConfig) -> f64 {
    if theta > 0.0 {
        cfg.weight_mult * cfg.w0 * (theta - cfg.theta0).exp()
    } else {
        0.0
    }
}

/// Annealed learning rate after `t_total_s` seconds of simulated time.
#[inline]
pub fn beta_at(beta0: f64, lambda: f64, t_total_s: f64) -> f64 {
    beta0 * (-lambda * t_total_s).exp()
}

/// Flat table of all plastic synapses, grouped by source so synapses sharing
/// a source also share one presynaptic trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasticTable {
    /// Motor (target) index per synapse.
    pub post: Vec<u32>,
    pub e: Vec<f64>,
    pub g: Vec<f64>,
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
    /// Synapse index range per dense source index: sources[p] owns
    /// src_offsets[p]..src_offsets[p+1].
    src_offsets: Vec<u32>,
    pre_traces: Vec<PspFilter>,
    /// Trace levels refreshed each fine tick.
    y: Vec<f64>,
    kernel: PspKernel,
    decay: PspDecay,
    alpha_e: f64,
    alpha_g: f64,
    clip: f64,
}

/// Logical view of one synapse, for checkpoints and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapseState {
    pub post: u32,
    pub e: f64,
    pub g: f64,
    pub theta: f64,
    pub w: f64,
}

impl PlasticTable {
    /// Build from per-source synapse groups. `counts_per_source[p]` synapses
    /// are created for dense source p, targeting motors round-robin via the
    /// `posts` callback; thetas come from `init_theta` in synapse order.
    pub fn new(
        kernel: PspKernel,
        fine_dt_s: f64,
        cfg: &PlasticityConfig,
        posts_per_source: &[Vec<u32>],
        mut init_theta: impl FnMut() -> f64,
    ) -> Self {
        let mut post = Vec::new();
        let mut src_offsets = Vec::with_capacity(posts_per_source.len() + 1);
        src_offsets.push(0u32);
        for posts in posts_per_source {
            post.extend_from_slice(posts);
            src_offsets.push(post.len() as u32);
        }
        let n = post.len();
        let mut theta = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for _ in 0..n {
            let th = init_theta().clamp(cfg.theta_min, cfg.theta_max);
            theta.push(th);
            w.push(map_weight(th, cfg));
        }
        let n_pre = posts_per_source.len();
        PlasticTable {
            post,
            e: vec![0.0; n],
            g: vec![0.0; n],
            theta,
            w,
            src_offsets,
            pre_traces: vec![PspFilter::default(); n_pre],
            y: vec![0.0; n_pre],
            kernel,
            decay: kernel.decay(fine_dt_s),
            alpha_e: (-fine_dt_s / cfg.tau_e_s).exp(),
            alpha_g: (-fine_dt_s / cfg.tau_g_s).exp(),
            clip: cfg.dtheta_max,
        }
    }

    pub fn len(&self) -> usize {
        self.post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post.is_empty()
    }

    pub fn n_sources(&self) -> usize {
        self.pre_traces.len()
    }

    /// Synapse range owned by dense source `p`.
    pub fn source_range(&self, p: usize) -> std::ops::Range<usize> {
        self.src_offsets[p] as usize..self.src_offsets[p + 1] as usize
    }

    /// Current presynaptic trace level of dense source `p`.
    pub fn trace_level(&self, p: usize) -> f64 {
        self.y[p]
    }

    pub fn synapse(&self, i: usize) -> SynapseState {
        SynapseState {
            post: self.post[i],
            e: self.e[i],
            g: self.g[i],
            theta: self.theta[i],
            w: self.w[i],
        }
    }

    /// One fine tick: advance presyn traces with this tick's source spike
    /// counts, then e and g for every synapse. `post_drive[m]` must hold
    /// (z_m - hazard_m) with z in impulse units (1/dt on a spike tick) and
    /// the hazard in 1/s; `reward` is the currently broadcast (smoothed,
    /// delayed) reward.
    pub fn fine_update(
        &mut self,
        pre_counts: &[u16],
        post_drive: &[f64],
        reward: f64,
        dt_s: f64,
    ) {
        debug_assert_eq!(pre_counts.len(), self.pre_traces.len());
        for (p, tr) in self.pre_traces.iter_mut().enumerate() {
            tr.step(&self.decay, pre_counts[p] as f64);
            self.y[p] = tr.level(&self.kernel);
        }
        let clip = self.clip;
        let r_dt = reward * dt_s;
        for p in 0..self.y.len() {
            let y = self.y[p];
            let lo = self.src_offsets[p] as usize;
            let hi = self.src_offsets[p + 1] as usize;
            for i in lo..hi {
                let drive = self.w[i] * y * post_drive[self.post[i] as usize];
                let mut e = self.e[i] * self.alpha_e + dt_s * drive;
                if e.abs() < FLUSH_EPS {
                    e = 0.0;
                }
                self.e[i] = e;
                let mut g = (self.g[i] * self.alpha_g + r_dt * e).clamp(-clip, clip);
                if g.abs() < FLUSH_EPS {
                    g = 0.0;
                }
                self.g[i] = g;
            }
        }
    }

    /// One coarse step for every synapse; draws one standard normal each, in
    /// synapse order. Returns the post-update sum of theta (a cheap finite-ness
    /// probe for the run guard).
    pub fn coarse_update<R: Rng + ?Sized>(
        &mut self,
        cfg: &PlasticityConfig,
        beta: f64,
        coarse_dt_s: f64,
        rng: &mut R,
    ) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.theta.len() {
            let n: f64 = rng.sample(StandardNormal);
            let th = step_parameter(self.theta[i], self.g[i], n, cfg, beta, coarse_dt_s);
            self.theta[i] = th;
            self.w[i] = map_weight(th, cfg);
            sum += th;
        }
        sum
    }

    /// Fraction of synapses with mapped weight strictly below `threshold`.
    pub fn weak_fraction(&self, threshold: f64) -> f64 {
        if self.w.is_empty() {
            return 0.0;
        }
        let n = self.w.iter().filter(|&&w| w < threshold).count();
        n as f64 / self.w.len() as f64
    }

    /// Histogram of mapped weights over `edges` (ascending); bucket i counts
    /// weights in [edges[i], edges[i+1]), with an extra final bucket for
    /// weights >= the last edge.
    pub fn weight_histogram(&self, edges: &[f64]) -> Vec<u32> {
        let mut hist = vec![0u32; edges.len()];
        for &w in &self.w {
            let mut b = 0usize;
            while b + 1 < edges.len() && w >= edges[b + 1] {
                b += 1;
            }
            if w >= edges[0] {
                hist[b] += 1;
            } else {
                hist[0] += 1;
            }
        }
        hist
    }
}
