//! Hypersonic strike weapon terminal guidance: point-mass engagement
//! simulator, recurrent PPO trainer and Monte Carlo evaluation harness.

pub mod aero;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod frames;
pub mod guidance;
pub mod net;
pub mod ppo;
pub mod vec3;
