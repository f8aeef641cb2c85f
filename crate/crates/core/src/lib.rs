//! Pair-relational refinement networks built on pivotal attention, and a
//! color-refinement oracle for the k-WL / k-FWL hierarchy.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod attention;
pub mod bench;
pub mod error;
pub mod graph;
pub mod memtrack;
pub mod model;
pub mod nn;
pub mod train;
pub mod verify;
pub mod wl;

pub use error::{Error, Result};
