//! Runtime spiking network: unit layout, spike propagation with delays, and
//! the per-tick interleaving of neuron and synapse updates.
//!
//! Units live in one id space: camera-driven source units first, then an
//! optional Poisson generator, then the simulated neurons (axis relays,
//! exploration, motors) as one contiguous block. Source units do not
//! integrate a membrane; their spikes are the event counts handed in by the
//! caller. Every tick runs in a fixed order: deliver due PSPs and step
//! neurons, then update presynaptic traces, then eligibility, then the
//! reward gradient.

use crate::neuron::{Neuron, NeuronParams, PspDecay};
use crate::plasticity::{PlasticTable, PlasticityConfig};
use crate::rngs::SimRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

pub const NO_PLASTIC_SOURCE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRanges {
    pub visual: Range<u32>,
    pub noise: Option<u32>,
    pub axis_row: Range<u32>,
    pub axis_col: Range<u32>,
    pub exploration: Option<u32>,
    pub motor: Range<u32>,
}

impl UnitRanges {
    pub fn n_units(&self) -> u32 {
        self.motor.end
    }

    /// First simulated neuron id: everything from the axis block onward.
    pub fn first_neuron(&self) -> u32 {
        self.axis_row.start
    }

    pub fn n_neurons(&self) -> usize {
        (self.motor.end - self.first_neuron()) as usize
    }

    pub fn n_motors(&self) -> usize {
        self.motor.len()
    }

    pub fn motor_neuron_index(&self, m: usize) -> usize {
        (self.motor.start - self.first_neuron()) as usize + m
    }

    pub fn is_axis(&self, unit: u32) -> bool {
        self.axis_row.contains(&unit) || self.axis_col.contains(&unit)
    }
}

/// Static wiring grouped by source unit, targets premapped to neuron indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StaticTable {
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
    pub weights: Vec<f64>,
    pub delays: Vec<u16>,
}

impl StaticTable {
    pub fn from_edges(n_units: u32, mut edges: Vec<(u32, u32, f64, u16)>) -> Self {
        edges.sort_by_key(|e| e.0);
        let mut offsets = vec![0u32; n_units as usize + 1];
        for e in &edges {
            offsets[e.0 as usize + 1] += 1;
        }
        for i in 0..n_units as usize {
            offsets[i + 1] += offsets[i];
        }
        StaticTable {
            offsets,
            targets: edges.iter().map(|e| e.1).collect(),
            weights: edges.iter().map(|e| e.2).collect(),
            delays: edges.iter().map(|e| e.3).collect(),
        }
    }

    pub fn fanout(&self, source: u32) -> Range<usize> {
        self.offsets[source as usize] as usize..self.offsets[source as usize + 1] as usize
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn max_delay(&self) -> u16 {
        self.delays.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DeliveryRing {
    slots: Vec<Vec<(u32, f64)>>,
    head: usize,
}

impl DeliveryRing {
    fn new(max_delay: u16) -> Self {
        DeliveryRing {
            slots: vec![Vec::new(); max_delay as usize + 1],
            head: 0,
        }
    }

    fn push(&mut self, delay: u16, neuron: u32, amplitude: f64) {
        let slot = (self.head + delay as usize) % self.slots.len();
        self.slots[slot].push((neuron, amplitude));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub unit: u32,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    ranges: UnitRanges,
    groups: Vec<NeuronParams>,
    group_of: Vec<u8>,
    static_syn: StaticTable,
    noise: Option<NoiseSource>,
    plastic: PlasticTable,
    /// Unit id -> index into the plastic table's source blocks, or
    /// NO_PLASTIC_SOURCE.
    plastic_src_of_unit: Vec<u32>,
    /// Plastic PSPs are delivered with this delay.
    plastic_delay: u16,
    fine_dt_s: f64,
    neurons: Vec<Neuron>,
    decays: Vec<PspDecay>,
    ring: DeliveryRing,
    motor_window_counts: Vec<u32>,
    // Scratch buffers, sized once.
    impulses: Vec<f64>,
    pre_counts: Vec<u16>,
    post_drive: Vec<f64>,
    motor_agg: Vec<f64>,
}

impl Network {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ranges: UnitRanges,
        groups: Vec<NeuronParams>,
        group_of: Vec<u8>,
        static_syn: StaticTable,
        noise: Option<NoiseSource>,
        plastic: PlasticTable,
        plastic_src_of_unit: Vec<u32>,
        plastic_delay: u16,
        fine_dt_s: f64,
    ) -> Self {
        let n_neurons = ranges.n_neurons();
        assert_eq!(group_of.len(), n_neurons);
        assert_eq!(plastic_src_of_unit.len(), ranges.n_units() as usize);
        let decays = groups
            .iter()
            .map(|g| g.kernel.decay(fine_dt_s))
            .collect::<Vec<_>>();
        let max_delay = static_syn.max_delay().max(plastic_delay);
        let n_motors = ranges.n_motors();
        let n_sources = plastic.n_sources();
        Network {
            ranges,
            groups,
            group_of,
            static_syn,
            noise,
            plastic,
            plastic_src_of_unit,
            plastic_delay,
            fine_dt_s,
            neurons: vec![Neuron::default(); n_neurons],
            decays,
            ring: DeliveryRing::new(max_delay),
            motor_window_counts: vec![0; n_motors],
            impulses: vec![0.0; n_neurons],
            pre_counts: vec![0; n_sources],
            post_drive: vec![0.0; n_motors],
            motor_agg: vec![0.0; n_motors],
        }
    }

    pub fn ranges(&self) -> &UnitRanges {
        &self.ranges
    }

    pub fn plastic(&self) -> &PlasticTable {
        &self.plastic
    }

    pub fn static_table(&self) -> &StaticTable {
        &self.static_syn
    }

    /// Plastic source index of a unit, or NO_PLASTIC_SOURCE.
    pub fn plastic_source_of(&self, unit: u32) -> u32 {
        self.plastic_src_of_unit[unit as usize]
    }

    pub fn fine_dt_s(&self) -> f64 {
        self.fine_dt_s
    }

    pub fn neuron_rate_hz(&self, idx: usize) -> f64 {
        self.neurons[idx].rate_hz
    }

    /// Schedule the fanout of `count` simultaneous spikes from a unit:
    /// static synapses individually, plastic synapses aggregated per motor.
    fn fan_out(&mut self, unit: u32, count: u16) {
        let c = count as f64;
        for k in self.static_syn.fanout(unit) {
            self.ring.push(
                self.static_syn.delays[k],
                self.static_syn.targets[k],
                self.static_syn.weights[k] * c,
            );
        }
        let src = self.plastic_src_of_unit[unit as usize];
        if src != NO_PLASTIC_SOURCE {
            self.motor_agg.fill(0.0);
            let range = self.plastic.source_range(src as usize);
            for i in range {
                self.motor_agg[self.plastic.post[i] as usize] += self.plastic.w[i];
            }
            for m in 0..self.motor_agg.len() {
                let amp = self.motor_agg[m] * c;
                if amp != 0.0 {
                    let neuron = self.ranges.motor_neuron_index(m) as u32;
                    self.ring.push(self.plastic_delay, neuron, amp);
                }
            }
        }
    }

    /// One fine tick. `visual_counts` carries this tick's source-unit spike
    /// counts (length = visual units). `reward` is the smoothed reward
    /// sample broadcast to every synapse this tick.
    pub fn step_tick(&mut self, visual_counts: &[u16], reward: f64, rng: &mut SimRng) {
        let n_vis = self.ranges.visual.len();
        assert_eq!(visual_counts.len(), n_vis);
        let dt = self.fine_dt_s;

        // Source units spike first: their traces and fanout belong to this
        // tick.
        for v in 0..n_vis {
            let c = visual_counts[v];
            if c > 0 {
                let unit = self.ranges.visual.start + v as u32;
                let src = self.plastic_src_of_unit[unit as usize];
                if src != NO_PLASTIC_SOURCE {
                    self.pre_counts[src as usize] = c;
                }
                self.fan_out(unit, c);
            }
        }
        if let Some(noise) = self.noise {
            let p = -(-noise.rate_hz * dt).exp_m1();
            if rng.gen::<f64>() < p {
                self.fan_out(noise.unit, 1);
            }
        }

        // Deliver due PSPs and step every simulated neuron.
        self.impulses.fill(0.0);
        {
            let slot = &mut self.ring.slots[self.ring.head];
            for &(neuron, amp) in slot.iter() {
                self.impulses[neuron as usize] = self.impulses[neuron as usize] + amp;
            }
            slot.clear();
        }
        self.ring.head = (self.ring.head + 1) % self.ring.slots.len();

        let first_neuron = self.ranges.first_neuron();
        let motor_start = self.ranges.motor_neuron_index(0);
        for i in 0..self.neurons.len() {
            let g = self.group_of[i] as usize;
            let spiked = {
                let params = &self.groups[g];
                let decay = self.decays[g];
                self.neurons[i].step(params, &decay, self.impulses[i], dt, rng)
            };
            if i >= motor_start {
                let m = i - motor_start;
                self.post_drive[m] = if spiked {
                    self.motor_window_counts[m] += 1;
                    1.0 / dt - self.neurons[i].hazard_hz
                } else {
                    -self.neurons[i].hazard_hz
                };
            } else if spiked {
                let unit = first_neuron + i as u32;
                let src = self.plastic_src_of_unit[unit as usize];
                if src != NO_PLASTIC_SOURCE {
                    self.pre_counts[src as usize] += 1;
                }
                self.fan_out(unit, 1);
            }
        }

        // Plasticity traces close the tick.
        let pre = std::mem::take(&mut self.pre_counts);
        let drive = std::mem::take(&mut self.post_drive);
        self.plastic.fine_update(&pre, &drive, reward, dt);
        self.pre_counts = pre;
        self.post_drive = drive;
        self.pre_counts.fill(0);
    }

    /// Slow-timescale parameter update. Returns the sum of all synaptic
    /// parameters as a finiteness probe.
    pub fn coarse_update(
        &mut self,
        cfg: &PlasticityConfig,
        beta: f64,
        coarse_dt_s: f64,
        rng: &mut SimRng,
    ) -> f64 {
        self.plastic.coarse_update(cfg, beta, coarse_dt_s, rng)
    }

    /// Read and reset the per-window motor spike counts.
    pub fn take_motor_counts(&mut self, out: &mut [u16]) {
        for (o, c) in out.iter_mut().zip(self.motor_window_counts.iter_mut()) {
            *o = (*c).min(u16::MAX as u32) as u16;
            *c = 0;
        }
    }

    /// Highest motor firing rate right now, for saturation diagnostics.
    pub fn max_motor_rate_hz(&self) -> f64 {
        let start = self.ranges.motor_neuron_index(0);
        self.neurons[start..]
            .iter()
            .map(|n| n.rate_hz)
            .fold(0.0, f64::max)
    }

    pub fn state_is_finite(&self) -> bool {
        self.neurons.iter().all(|n| n.rate_hz.is_finite())
    }
}
