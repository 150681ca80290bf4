//! File formats, state directory handling, and the benchmark harness behind
//! the `speranza` command.

pub mod bench;
pub mod state;
