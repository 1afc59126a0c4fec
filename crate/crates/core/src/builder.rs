//! Constructs the two task networks from configuration.
//!
//! Build order is deterministic: exploration-inhibition weights are drawn
//! pixel-major first, then synaptic parameters in source-major synapse
//! order, all from the build stream, so a fixed seed reproduces the exact
//! initial network.

use crate::network::{Network, NoiseSource, StaticTable, UnitRanges, NO_PLASTIC_SOURCE};
use crate::neuron::NeuronParams;
use crate::plasticity::{PlasticTable, PlasticityConfig};
use crate::rngs::SimRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Reaching network shape: camera-driven sources, one axis relay per camera
/// row and per column, a noise-driven exploration neuron inhibited by every
/// pixel, and a motor ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachingTopology {
    pub camera_w: usize,
    pub camera_h: usize,
    pub n_motors: usize,
    pub multiplicity: u32,
    pub theta_mean: f64,
    pub theta_sd: f64,
    pub noise_rate_hz: f64,
    pub noise_weight: f64,
    pub inhibition_mean: f64,
    pub inhibition_sd: f64,
    pub exploration_motor_weight: f64,
    pub axis_weight: f64,
    pub delay_ticks: u16,
}

impl Default for ReachingTopology {
    fn default() -> Self {
        ReachingTopology {
            camera_w: 16,
            camera_h: 16,
            n_motors: 8,
            multiplicity: 10,
            theta_mean: 0.8,
            theta_sd: 0.6,
            noise_rate_hz: 35.0,
            noise_weight: 750.0,
            inhibition_mean: -500.0,
            inhibition_sd: 50.0,
            exploration_motor_weight: 10.0,
            axis_weight: 12.0,
            delay_ticks: 1,
        }
    }
}

impl ReachingTopology {
    pub fn n_plastic(&self) -> usize {
        (self.camera_w * self.camera_h + self.camera_w + self.camera_h)
            * self.n_motors
            * self.multiplicity as usize
    }
}

/// Lane network shape: pooled camera cells feeding motors all-to-all, the
/// first half of the motors forming the left pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneTopology {
    pub pooled_w: usize,
    pub pooled_h: usize,
    pub n_motors: usize,
    pub multiplicity: u32,
    pub theta_mean: f64,
    pub theta_sd: f64,
    pub delay_ticks: u16,
}

impl Default for LaneTopology {
    fn default() -> Self {
        LaneTopology {
            pooled_w: 16,
            pooled_h: 4,
            n_motors: 8,
            multiplicity: 1,
            theta_mean: 0.8,
            theta_sd: 0.6,
            delay_ticks: 1,
        }
    }
}

impl LaneTopology {
    pub fn n_plastic(&self) -> usize {
        self.pooled_w * self.pooled_h * self.n_motors * self.multiplicity as usize
    }
}

/// Population counts and checksums for the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub n_visual: usize,
    pub n_axis: usize,
    pub n_motors: usize,
    pub has_exploration: bool,
    pub has_noise: bool,
    pub n_static: usize,
    pub n_plastic: usize,
    pub theta_sum: f64,
}

pub fn summarize(net: &Network) -> TopologySummary {
    let r = net.ranges();
    TopologySummary {
        n_visual: r.visual.len(),
        n_axis: r.axis_row.len() + r.axis_col.len(),
        n_motors: r.n_motors(),
        has_exploration: r.exploration.is_some(),
        has_noise: r.noise.is_some(),
        n_static: net.static_table().len(),
        n_plastic: net.plastic().len(),
        theta_sum: net.plastic().theta.iter().sum(),
    }
}

fn all_motor_posts(n_motors: usize, multiplicity: u32) -> Vec<u32> {
    let mut posts = Vec::with_capacity(n_motors * multiplicity as usize);
    for m in 0..n_motors {
        for _ in 0..multiplicity {
            posts.push(m as u32);
        }
    }
    posts
}

/// Per-population neuron parameters for the reaching network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachingNeurons {
    pub motor: NeuronParams,
    pub exploration: NeuronParams,
    pub axis: NeuronParams,
}

pub fn build_reaching(
    top: &ReachingTopology,
    neurons: &ReachingNeurons,
    pcfg: &PlasticityConfig,
    fine_dt_s: f64,
    rng: &mut SimRng,
) -> Network {
    let (w, h) = (top.camera_w, top.camera_h);
    let n_vis = (w * h) as u32;
    let noise_unit = n_vis;
    let axis_row = n_vis + 1..n_vis + 1 + h as u32;
    let axis_col = axis_row.end..axis_row.end + w as u32;
    let exploration = axis_col.end;
    let motor = exploration + 1..exploration + 1 + top.n_motors as u32;
    let ranges = UnitRanges {
        visual: 0..n_vis,
        noise: Some(noise_unit),
        axis_row: axis_row.clone(),
        axis_col: axis_col.clone(),
        exploration: Some(exploration),
        motor: motor.clone(),
    };
    let first_neuron = ranges.first_neuron();
    let expl_idx = exploration - first_neuron;

    let inhibition = Normal::new(top.inhibition_mean, top.inhibition_sd).unwrap();
    let mut edges = Vec::new();
    for y in 0..h as u32 {
        for x in 0..w as u32 {
            let px = y * w as u32 + x;
            let row_idx = axis_row.start + y - first_neuron;
            let col_idx = axis_col.start + x - first_neuron;
            edges.push((px, row_idx, top.axis_weight, top.delay_ticks));
            edges.push((px, col_idx, top.axis_weight, top.delay_ticks));
            edges.push((px, expl_idx, inhibition.sample(rng), top.delay_ticks));
        }
    }
    edges.push((noise_unit, expl_idx, top.noise_weight, top.delay_ticks));
    for m in 0..top.n_motors as u32 {
        let motor_idx = motor.start + m - first_neuron;
        edges.push((
            exploration,
            motor_idx,
            top.exploration_motor_weight,
            top.delay_ticks,
        ));
    }
    let statics = StaticTable::from_edges(ranges.n_units(), edges);

    let n_sources = (w * h + h + w) as u32;
    let posts = all_motor_posts(top.n_motors, top.multiplicity);
    let posts_per_source = vec![posts; n_sources as usize];
    let theta = Normal::new(top.theta_mean, top.theta_sd).unwrap();
    let plastic = PlasticTable::new(
        neurons.motor.kernel,
        fine_dt_s,
        pcfg,
        &posts_per_source,
        || theta.sample(rng).max(0.0),
    );

    let mut src_of = vec![NO_PLASTIC_SOURCE; ranges.n_units() as usize];
    for px in 0..n_vis {
        src_of[px as usize] = px;
    }
    for (j, unit) in axis_row.clone().chain(axis_col.clone()).enumerate() {
        src_of[unit as usize] = n_vis + j as u32;
    }

    // Neuron order: axis relays, exploration, motors.
    let n_axis = h + w;
    let mut group_of = vec![1u8; n_axis];
    group_of.push(2u8);
    group_of.extend(std::iter::repeat(0u8).take(top.n_motors));

    Network::new(
        ranges,
        vec![neurons.motor, neurons.axis, neurons.exploration],
        group_of,
        statics,
        Some(NoiseSource {
            unit: noise_unit,
            rate_hz: top.noise_rate_hz,
        }),
        plastic,
        src_of,
        top.delay_ticks,
        fine_dt_s,
    )
}

pub fn build_lane(
    top: &LaneTopology,
    standard: NeuronParams,
    pcfg: &PlasticityConfig,
    fine_dt_s: f64,
    rng: &mut SimRng,
) -> Network {
    let n_vis = (top.pooled_w * top.pooled_h) as u32;
    let motor = n_vis..n_vis + top.n_motors as u32;
    let ranges = UnitRanges {
        visual: 0..n_vis,
        noise: None,
        axis_row: n_vis..n_vis,
        axis_col: n_vis..n_vis,
        exploration: None,
        motor,
    };
    let posts = all_motor_posts(top.n_motors, top.multiplicity);
    let posts_per_source = vec![posts; n_vis as usize];
    let theta = Normal::new(top.theta_mean, top.theta_sd).unwrap();
    let plastic = PlasticTable::new(standard.kernel, fine_dt_s, pcfg, &posts_per_source, || {
        theta.sample(rng).max(0.0)
    });
    let mut src_of = vec![NO_PLASTIC_SOURCE; ranges.n_units() as usize];
    for v in 0..n_vis {
        src_of[v as usize] = v;
    }
    let statics = StaticTable::from_edges(ranges.n_units(), Vec::new());
    Network::new(
        ranges,
        vec![standard],
        vec![0u8; top.n_motors],
        statics,
        None,
        plastic,
        src_of,
        top.delay_ticks,
        fine_dt_s,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::PspKernel;
    use crate::rngs::StreamId;

    fn axis_params() -> NeuronParams {
        NeuronParams {
            rate_scale_hz: 0.1,
            sensitivity: 1.0,
            rate_max_hz: 10_000.0,
            refractory_ticks: 2,
            kernel: PspKernel::new(0.5e-3, 2e-3).unwrap(),
        }
    }

    fn default_neurons() -> ReachingNeurons {
        ReachingNeurons {
            motor: NeuronParams::default(),
            exploration: NeuronParams::default(),
            axis: axis_params(),
        }
    }

    fn build_default_reaching(seed: u64) -> Network {
        let mut rng = SimRng::new(seed, StreamId::Build);
        build_reaching(
            &ReachingTopology::default(),
            &default_neurons(),
            &PlasticityConfig::default(),
            1e-3,
            &mut rng,
        )
    }

    #[test]
    fn reaching_default_has_23040_plastic_synapses() {
        let net = build_default_reaching(1);
        assert_eq!(net.plastic().len(), 23040);
        let s = summarize(&net);
        assert_eq!(s.n_visual, 256);
        assert_eq!(s.n_axis, 32);
        assert_eq!(s.n_motors, 8);
        assert!(s.has_exploration && s.has_noise);
        // Statics: 3 per pixel + 1 noise + 8 exploration-to-motor.
        assert_eq!(s.n_static, 256 * 3 + 1 + 8);
    }

    #[test]
    fn reaching_8x8_has_6400_plastic_synapses() {
        let top = ReachingTopology {
            camera_w: 8,
            camera_h: 8,
            ..ReachingTopology::default()
        };
        assert_eq!(top.n_plastic(), 6400);
        let mut rng = SimRng::new(1, StreamId::Build);
        let net = build_reaching(
            &top,
            &default_neurons(),
            &PlasticityConfig::default(),
            1e-3,
            &mut rng,
        );
        assert_eq!(net.plastic().len(), 6400);
    }

    #[test]
    fn lane_default_has_512_plastic_synapses_and_multiplicity_scales() {
        let top = LaneTopology::default();
        assert_eq!(top.n_plastic(), 512);
        let mut rng = SimRng::new(1, StreamId::Build);
        let net = build_lane(
            &top,
            NeuronParams::default(),
            &PlasticityConfig::default(),
            1e-3,
            &mut rng,
        );
        assert_eq!(net.plastic().len(), 512);
        let s = summarize(&net);
        assert_eq!((s.n_visual, s.n_axis, s.n_motors), (64, 0, 8));
        assert!(!s.has_exploration && !s.has_noise);
        assert_eq!(s.n_static, 0);

        let wide = LaneTopology {
            multiplicity: 10,
            ..top
        };
        assert_eq!(wide.n_plastic(), 5120);
    }

    #[test]
    fn same_seed_rebuilds_identical_networks() {
        let a = build_default_reaching(77);
        let b = build_default_reaching(77);
        assert_eq!(a, b);
        let c = build_default_reaching(78);
        assert_ne!(a.plastic().theta, c.plastic().theta);
    }

    #[test]
    fn connectivity_audit() {
        let net = build_default_reaching(5);
        let r = net.ranges().clone();
        // Plastic sources are exactly the visual and axis units.
        for unit in 0..r.n_units() {
            let is_source = r.visual.contains(&unit) || r.is_axis(unit);
            let mapped = net.plastic_source_of(unit) != NO_PLASTIC_SOURCE;
            assert_eq!(mapped, is_source, "unit {unit}");
        }
        // Every plastic target is a motor index.
        let n_motors = r.n_motors() as u32;
        assert!(net.plastic().post.iter().all(|&p| p < n_motors));
        // Initial thetas are clipped at zero and bounded above.
        assert!(net.plastic().theta.iter().all(|&t| (0.0..=5.0).contains(&t)));
    }

    #[test]
    fn initial_theta_statistics_match_before_clipping() {
        // The raw initialization distribution, checked on 10^4 draws within
        // three standard errors of mean and sd.
        let mut rng = SimRng::new(123, StreamId::Build);
        let normal = Normal::new(0.8, 0.6).unwrap();
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sd = var.sqrt();
        let se_mean = 0.6 / (n as f64).sqrt();
        let se_sd = 0.6 / (2.0 * n as f64).sqrt();
        assert!((mean - 0.8).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((sd - 0.6).abs() < 3.0 * se_sd, "sd {sd}");
    }

    #[test]
    fn clipped_fraction_matches_gaussian_tail() {
        let net = build_default_reaching(9);
        let zeros = net.plastic().theta.iter().filter(|&&t| t == 0.0).count();
        let frac = zeros as f64 / net.plastic().len() as f64;
        // P(N(0.8, 0.6) <= 0) = Phi(-4/3) = 0.0912; three sigma over 23040.
        let expect = 0.09121;
        let tol = 3.0 * (expect * (1.0 - expect) / 23040.0_f64).sqrt();
        assert!((frac - expect).abs() < tol, "frac {frac}");
    }

    #[test]
    fn axis_relay_fires_reliably_per_event() {
        // Unit-level check of the relay parameterization: one event-sized
        // impulse makes the relay spike almost surely, and almost never more
        // than once.
        let params = axis_params();
        let decay = params.kernel.decay(1e-3);
        let mut rng = SimRng::new(31, StreamId::Neurons);
        let trials = 2000;
        let mut responded = 0;
        let mut total_spikes = 0;
        for _ in 0..trials {
            let mut n = crate::neuron::Neuron::default();
            let mut spikes = 0;
            for k in 0..30 {
                let impulse = if k == 0 { 12.0 } else { 0.0 };
                if n.step(&params, &decay, impulse, 1e-3, &mut rng) {
                    spikes += 1;
                }
            }
            if spikes > 0 {
                responded += 1;
            }
            total_spikes += spikes;
        }
        let reliability = responded as f64 / trials as f64;
        let mean_spikes = total_spikes as f64 / trials as f64;
        assert!(reliability > 0.99, "reliability {reliability}");
        assert!(mean_spikes < 1.1, "mean spikes {mean_spikes}");
    }

    #[test]
    fn visual_event_propagates_to_axis_traces() {
        let top = ReachingTopology {
            camera_w: 8,
            camera_h: 8,
            ..ReachingTopology::default()
        };
        let mut rng = SimRng::new(1, StreamId::Build);
        let mut net = build_reaching(
            &top,
            &default_neurons(),
            &PlasticityConfig::default(),
            1e-3,
            &mut rng,
        );
        let mut nrng = SimRng::new(4, StreamId::Neurons);
        let mut input = vec![0u16; 64];
        input[2 * 8 + 3] = 1; // pixel (x=3, y=2)
        net.step_tick(&input, 0.0, &mut nrng);
        input[2 * 8 + 3] = 0;
        let row_src = 64 + 2;
        let col_src = 64 + 8 + 3;
        for _ in 0..6 {
            net.step_tick(&input, 0.0, &mut nrng);
        }
        assert!(
            net.plastic().trace_level(row_src) > 0.2,
            "row trace {}",
            net.plastic().trace_level(row_src)
        );
        assert!(
            net.plastic().trace_level(col_src) > 0.2,
            "col trace {}",
            net.plastic().trace_level(col_src)
        );
        // An untouched axis relay shows no trace.
        assert_eq!(net.plastic().trace_level(64 + 5), 0.0);
    }
}
