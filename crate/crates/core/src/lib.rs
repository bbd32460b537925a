//! Online regression under drifting targets: the LASER last-step min-max
//! regressor, an H∞ regression filter, baselines, and numerical checks of
//! the regret bounds that govern them.

pub mod baselines;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod hinf;
pub mod laser;
pub mod learner;
pub mod linalg;
pub mod oracle;

pub use error::{Error, Result};
pub use learner::OnlineRegressor;
