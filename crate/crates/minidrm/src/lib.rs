pub mod cli;
pub mod client;
pub mod config;
pub mod conformance;
pub mod packager;
pub mod server;
pub mod vault;
