//! Grids, level-set value fields and time-indexed tubes.
//!
//! Sets are encoded as sub-zero regions of scalar fields: union, intersection
//! and complement are pointwise `min`, `max` and negation.

mod field;
mod grid;
mod tube;

pub use field::{set_complement, set_intersect, set_union, signed_distance_box, ValueField, FAR};
pub use grid::{Grid, MAX_DIM};
pub use tube::{tube_complement, tube_intersect, tube_union, Combine, Intersection, Negated, TimeField, ValueTube};

