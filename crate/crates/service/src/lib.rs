//! Session host, HTTP API and command line for the virtual guide dog.

pub mod cli;
pub mod http;
pub mod session;
