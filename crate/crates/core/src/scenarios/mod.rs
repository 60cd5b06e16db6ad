//! The benchmark experiments as configurable, reproducible runs, with their
//! reference solutions and analysis routines.

pub mod analysis;
pub mod cavity;
pub mod config;
pub mod couette;
pub mod extension;
pub mod hysteresis;
pub mod kde;
pub mod oldroyd;
pub mod output;
pub mod run;
