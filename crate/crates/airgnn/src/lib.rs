//! Graph neural networks whose neighbor exchanges go through simulated
//! wireless links with Rayleigh fading and receiver noise.

pub mod channel;
pub mod data;
pub mod decentralized;
pub mod error;
pub mod gradcheck;
pub mod graphs;
pub mod io;
pub mod model;
pub mod rng;
pub mod tasks;
pub mod training;

pub use error::{Error, Result};
