//! Lockstep bridge between a driving simulator and an AV stack, with mock
//! endpoints for both sides and a benchmark harness.

pub mod av;
pub mod bench;
pub mod bridge;
pub mod config;
pub mod control;
pub mod convert;
pub mod geom;
pub mod messages;
pub mod protocol;
pub mod run;
pub mod sim;
