//! The two benchmark pipelines: source localization on a stochastic block
//! model and imitation-learned multi-robot flocking.

pub mod diffusion;
pub mod flocking;

pub use diffusion::{
    build_diffusion_dataset, classify_accuracy, community_sources, source_localization_dataset, DiffusionConfig,
    DiffusionDataset, DiffusionSample,
};
pub use flocking::{
    build_flock_dataset, closed_loop_eval, flock_features, oracle_controller, swarm_step, velocity_variance_cost,
    Controller, FlockDataset, FlockStep, FlockTrajectory, FlockingConfig, SwarmState,
};
