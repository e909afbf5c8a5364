//! Scenario catalog, runner and command-line front end.

pub mod catalog;
pub mod cli;
pub mod runner;
