//! Unit-disk range reporting and emptiness in the plane.
//!
//! The static engine answers reporting queries with a conforming grid
//! coverage plus four lower-envelope layer structures per non-empty cell.
//! The dynamic engine replaces the envelope layers with dynamic arc sets
//! built on shallow cuttings of unit arcs.

pub mod coverage;
pub mod cuttings;
pub mod dynarcs;
pub mod engine;
pub mod envelopes;
pub mod geometry;
pub mod harness;
pub mod hulls;

pub use geometry::{tolerance, Point, UnitArc};
