//! Task environments: kinematics, reset rules, and reward functions.

pub mod lane;
pub mod reaching;

pub use lane::{LaneConfig, LaneEnv, LaneStep};
pub use reaching::{ReachingConfig, ReachingEnv, ReachingStep};
