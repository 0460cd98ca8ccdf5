//! Memory-based controllers for a surrogate soft-finger plant.
//!
//! The crate bundles three controller families around one simulated
//! pneumatic finger: finite-memory controllers trained from scratch
//! with DDPG, DQN, or SAC; an LSTM inverse-model controller usable in
//! open or closed loop; and a grid-tuned PI baseline. A comparison
//! harness runs all of them against shared reference trajectories and
//! reports tracking metrics.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod fmc;
pub mod harness;
pub mod lstm_ctrl;
pub mod nn;
pub mod pid;
pub mod plant;
pub mod rl;
pub mod seeds;

pub use error::{Error, Result};
