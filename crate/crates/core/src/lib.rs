//! Simulation, optimization, and learning engine for multi-UAV uplink NOMA
//! networks assisted by an aerial reconfigurable intelligent surface (ARIS)
//! or by dual-mode UAVs that switch between active collection and passive
//! reflection.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: platform positions, kinematics and safety distances.
//! - [`channel`]: path loss, array responses, cascade and equivalent channels.
//! - [`noma`]: SIC decoding order, SINR, rates, OMA baselines.
//! - [`queueing`]: GU data buffers and collected throughput.
//! - [`optimize`]: per-slot passive beamforming and GU association.
//! - [`learn`]: from-scratch MADDPG (networks, replay, updates, rewards).
//! - [`env`]: the episodic environment tying everything together.
//! - [`experiments`]: static comparisons and parameter sweeps.

pub mod channel;
pub mod env;
pub mod experiments;
pub mod geometry;
pub mod learn;
pub mod noma;
pub mod optimize;
pub mod queueing;
pub mod rng;

pub use num_complex::Complex64 as C64;
