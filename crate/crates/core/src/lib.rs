//! Feasibility simulator for O-RAN functional splits and RIC placement in LEO constellations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dimensioning;
pub mod dynamics;
pub mod feasibility;
pub mod orbital;
pub mod placement;
pub mod scenario;
pub mod topology;
