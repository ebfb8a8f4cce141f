//! Numerical toolkit for the global structure of gyrophase: N-field flux and
//! gyrokinetic monopole charge, the unit-perpendicular circle bundle, and
//! gauge-free guiding-center Poincaré–Cartan one-forms.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod numerics;
pub mod sampling;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{FieldKind, FieldSample, FieldSpec};
pub use geometry::{Chart, Frame, NSample};
