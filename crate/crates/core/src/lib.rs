//! UAV-assisted wireless power transfer and data collection for batteryless
//! sensor networks, with a soft actor-critic learner extended by
//! parameter-free attention, prioritized replay and value-based reward
//! centering.

pub mod agent;
pub mod autodiff;
pub mod env;
pub mod experiment;
pub mod models;
pub mod per;
