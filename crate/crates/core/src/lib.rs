//! Closed-loop spiking-network learning simulator.
//!
//! A stochastic spiking network drives a simulated body (a velocity-steered
//! ball or a constant-speed vehicle), watches the result through an emulated
//! event camera, and adapts its synapses with a reward-gated sampling rule
//! running on a dual fast/slow time grid. Everything is deterministic given
//! a seed.

pub mod builder;
pub mod checkpoint;
pub mod config;
pub mod decode;
pub mod env;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod plasticity;
pub mod render;
pub mod rngs;
pub mod time;
pub mod track;
pub mod vision;
