// `!(x > 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod fluctuations;
pub mod gillespie;
pub mod kinetic;
pub mod mean_field;
pub mod network;
pub mod ode;
pub mod rates;
pub mod rng;
pub mod single_pair;
pub mod studies;
pub mod tabulated;
pub mod trajectory;

pub use error::{Error, Result};
