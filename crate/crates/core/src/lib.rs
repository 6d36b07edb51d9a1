//! Exact causal unit selection on fully specified structural causal models.
//!
//! A linear causal objective is reduced to a reverse-MAP query
//! `argmax_u Pr(e1 | u, e2)` on a composed objective model, which is then
//! solved three ways:
//!
//! * [`oracle`]: brute-force enumeration over complete instantiations,
//! * [`ve`]: two synced variable-elimination passes divided factor by factor,
//! * [`ac`]: a two-pass traversal of a compiled decision arithmetic circuit
//!   ([`circuit`]) with parameter division at the unit frontier.
//!
//! [`bench`] generates random SCMs and benefit-function instances.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ac;
pub mod bench;
pub mod circuit;
mod error;
pub mod factor;
mod interrupt;
pub mod network;
pub mod objective;
pub mod oracle;
pub mod order;
pub mod ve;

pub use error::{Error, Result};
pub use interrupt::{Interrupt, NeverInterrupt};
pub use network::{Cpt, Evidence, Network, VarId, Variable};
