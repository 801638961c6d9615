//! Periodic bang-bang control of a non-isothermal CSTR.
//!
//! A third-order Chen-Fliess expansion gives cheap initial guesses for
//! periodic orbits; shooting on the integrated flow refines them.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too; index loops
// mirror the tensor contractions they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod fliess;
pub mod linalg;
pub mod model;
pub mod schedule;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{Mat2, Vec2};
pub use model::{ModelParams, PhysicalParams, State};
pub use schedule::{ControlBounds, Schedule, Segment, Strategy, StrategyId};
pub use solver::{Method, NewtonConfig, PeriodicSolution};
