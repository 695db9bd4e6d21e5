//! Exact Cramér–Rao analysis for estimation from blockchain-recorded IoT
//! data when some devices are hijacked and the chain is forked by a
//! double-spending attack.

pub mod attackopt;
pub mod classes;
pub mod cli;
pub mod config;
pub mod dsa;
pub mod error;
pub mod fisher;
pub mod model;
pub mod numeric;
pub mod outcome;
pub mod relax;
pub mod simharness;

pub use error::{Error, Result};
