//! Peeking-robust sequential statistics.
//!
//! A nonnegative test (super)martingale `M` started at 1 turns into a
//! p-value process `1/M` that stays valid under any stopping rule. This
//! crate builds such martingales, tracks their running and lookahead
//! maxima, and derives Azéma–Yor processes that estimate functions of the
//! ultimate maximum. Every identity and dominance claim is checked by the
//! harness in [`harness`].

pub mod error;
pub mod quad;
pub mod rng;
pub mod dist;
pub mod martingale;
pub mod extrema;
pub mod ay;
pub mod harness;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
