//! Orchestration around `avalon-core`: the live HTTP backend, exchange and
//! strategy files, series execution, replay and the command line.

pub mod canned;
pub mod cli;
pub mod config;
pub mod data;
pub mod exchange;
pub mod http;
pub mod replay;
pub mod series;
pub mod store;
