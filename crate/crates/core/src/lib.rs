//! Computable criteria for thin and thick separated sequences in the unit disk.
//!
//! A sequence `{z_k}` is thin for a weight `rho(t) = t * exp(theta(t))` when some
//! nontrivial bounded holomorphic `f` makes `sum_k rho(1 - |z_k|) |f(z_k)|` finite.
//! This crate evaluates the series criteria that decide when thin or thick
//! sequences exist, runs the constructions that produce witness sequences, and
//! evaluates bounded-function witnesses in the log-modulus domain.
//!
//! Module map:
//!
//! * [`geometry`]: points stored by boundary gap, pseudohyperbolic distance,
//!   dyadic annuli and annulus profiles.
//! * [`weights`]: weight families `theta` and `rho`, dyadic samples and
//!   asymptotic comparison.
//! * [`series`]: convergence verdicts with an explicit evidence tier.
//! * [`constructions`]: index sets, block subsets and circle sequences.
//! * [`witnesses`]: bounded functions, the summatory functional and the
//!   Nevanlinna characteristic.
//! * [`classifier`]: weight regimes, class comparison and sequence verdicts.

pub mod classifier;
pub mod constructions;
pub mod count;
pub mod error;
pub mod geometry;
pub mod io;
pub mod series;
pub mod sum;
pub mod weights;
pub mod witnesses;

pub use error::{Error, Result};

/// Default cap on materialized points.
pub const DEFAULT_POINT_BUDGET: usize = 2_000_000;
