//! Residential battery sizing: weekly dispatch optimisation coupled to a
//! semi-empirical degradation model, with lifetime economics.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dispatch;
pub mod rainflow;
pub mod degradation;
pub mod lifetime;
pub mod economics;
pub mod synthetic;
pub mod experiments;
