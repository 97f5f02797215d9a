//! Index policies for average-reward MDPs whose transition law is unknown.

pub mod agents;
pub mod bench;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod estimation;
pub mod lp;
pub mod mdp;
pub mod sim;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
