//! Library side of the `twomode` command-line tool: layered settings,
//! parameter sweeps, single-point reports and the verification suite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod report;
pub mod settings;
pub mod sweep;
pub mod verify;

pub use settings::{Layer, Preset, Settings};
pub use sweep::{Axis, AxisParam, PointResult, Quantity, SweepSpec};
