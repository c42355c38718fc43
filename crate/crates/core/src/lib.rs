pub mod characteristics;
pub mod cli;
pub mod config;
pub mod flux;
pub mod kinetic;
pub mod quad;
pub mod rng;
pub mod roughpath;
pub mod validation;
