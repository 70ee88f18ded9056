#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod corners;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod hypotheses;
pub mod io;
pub mod lines;
pub mod pipeline;
pub mod structural;
pub mod synthetic;
