//! Run configurations and their execution, shared by the `folnerlab` binary
//! and the acceptance suite.

pub mod config;
pub mod run;
