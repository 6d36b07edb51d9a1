//! File formats, benchmark harness and command-line front end for
//! `unitsel-core`.

pub mod cli;
pub mod format;
pub mod harness;
