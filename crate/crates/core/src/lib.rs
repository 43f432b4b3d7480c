pub mod buslib;
pub mod case;
pub mod cli;
pub mod closedloop;
pub mod error;
pub mod network;
pub mod ratfun;
pub mod stability;

pub use error::{Error, Result};
