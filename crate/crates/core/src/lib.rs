//! Coded random access (frameless ALOHA) with a compressive-sensing
//! multi-user-detection physical layer.
//!
//! The crate connects three layers of the same system:
//!
//! * [`phy`] — a Monte-Carlo CDMA link simulator whose group-pursuit
//!   detector yields per-slot capture tables `p(s|t_A)`,
//! * [`capture`] / [`andor`] — the asymptotic analysis that turns a capture
//!   table into per-edge capture probabilities `C(t)` and runs the and-or
//!   tree fixed point for user-resolution probability and throughput,
//! * [`mac`] — a finite-N contention simulator with inter/intra-slot
//!   interference cancellation, used to cross-check the asymptotics.
//!
//! The `aloha-csmud` binary exposes all of it as subcommands.

pub mod andor;
pub mod capture;
pub mod degree;
pub mod error;
pub mod mac;
pub mod numeric;
pub mod phy;
pub mod seed;
pub mod table_io;

pub use error::{Error, Result};
