//! Monocular obstacle detection and reactive avoidance for a small quadrotor.
//!
//! Dense optical flow by polynomial expansion ([`flow`]) feeds a five-region
//! semi-dense detector ([`detector`]) whose left/right signal drives a
//! reactive flight state machine ([`pilot`]). A topic bus ([`bus`]) mirrors
//! the drone driver's publish/subscribe layer and a deterministic raycast
//! simulator ([`sim`]) closes the loop. [`harness`] wires everything into
//! replay, closed-loop simulation and a served mode for the operator console.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bus;
pub mod detector;
pub mod error;
pub mod flow;
pub mod image;
pub mod pilot;
pub mod sim;

pub use error::{Error, Result};
pub use image::Image;
pub mod harness;
