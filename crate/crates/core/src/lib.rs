//! Planar-array geometry, Cramér-Rao bounds and the alternating
//! digital/holographic beamforming optimizer for a reconfigurable
//! holographic surface serving one user and one sensing target.
//!
//! Builds without `std` (with `alloc`) when the default feature is off.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod comms;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod optimizer;
pub mod sensing;

pub use error::{Angle, Error, Result};
