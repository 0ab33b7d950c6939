//! File formats, model transport, review service and command line on top of
//! `regconflict-core`.

pub mod cli;
pub mod config;
pub mod io;
pub mod llm;
pub mod server;
pub mod store;
