//! Decentralized swarm control on SO(3)-deformed circular embeddings.
//!
//! Agents run on a virtual circle (the embedding) and are mapped into the
//! world by a phase-dependent rotation `exp((ω_x(φ), ω_y(φ), 0)^)`. Each
//! agent only hears the phases of its two ring neighbors and only emits
//! position targets to its plant.

pub mod agent;
pub mod cli;
pub mod deformation;
pub mod embedding;
pub mod harness;
pub mod metrics;
pub mod phase;
pub mod presets;
pub mod reference;
pub mod so3;
