// Negated float comparisons in this crate are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alexandrov;
pub mod geom2d;
pub mod io;
pub mod breakflow;
pub mod cli;
pub mod line1d;
pub mod measure;
pub mod packings;
pub mod stability;
pub mod svg;
pub mod convexify;
