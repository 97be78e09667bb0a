//! Command-line entry points and the live operator gateway for the
//! dronestick simulator.

pub mod cli;
pub mod protocol;
pub mod server;

pub use protocol::{decimation, InboundMsg, OutboundMsg};
pub use server::{Gateway, ServeError, ServeOptions, SessionSummary};
