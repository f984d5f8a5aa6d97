//! Scenario runner and trace-analysis front end for the simulator.

pub mod config;
pub mod report;
pub mod runner;
pub mod scenarios;
