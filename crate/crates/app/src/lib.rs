//! Command line tool, run store and HTTP review service around the
//! `gazelens` analysis library.

pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod service;
pub mod store;
