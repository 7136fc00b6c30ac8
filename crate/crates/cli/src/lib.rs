//! Front end for the chain-relay gate simulator: configuration-driven
//! sweeps, figure presets, scaling-law fits, the nearest-neighbour ladder
//! comparison and the verification suite.

pub mod compare;
pub mod config;
pub mod output;
pub mod runner;
pub mod verify;
