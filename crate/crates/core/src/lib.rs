//! Straight-line flow on translation surfaces: periodic cylinders, arc-union
//! measure on the circle of directions, first-return interval exchanges and
//! divergent-series bookkeeping for shrinking-target recurrence.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
// `!(x > 0.0)` is deliberate throughout: NaN has to fail parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod builtin;
pub mod circle;
pub mod cylinders;
mod develop;
pub mod flow;
pub mod geom;
pub mod iet;
pub mod series;
pub mod surface;

pub use builtin::Builtin;
pub use geom::{Direction, Vec2};
pub use surface::{
    Corner, EdgeGluing, EdgeRef, PolygonSpec, SurfaceError, SurfacePoint, TranslationSurface, VertexClass,
    VorobetsConstant,
};
