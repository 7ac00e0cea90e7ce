//! Adaptive isogeometric Kirchhoff plate solver on hierarchical B-splines.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptive;
pub mod bench;
pub mod estimate;
pub mod geometry;
pub mod hierarchy;
pub mod par;
pub mod plate;
pub mod quadrature;
pub mod spline;
