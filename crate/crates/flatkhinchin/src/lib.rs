//! Surface files, seeded experiments and verification reports on top of
//! `flatkhinchin-core`.

pub mod experiments;
pub mod output;
pub mod surface_file;
pub mod verify;

pub use experiments::{ExperimentError, SCHEMA_VERSION};
pub use surface_file::{resolve_surface, SurfaceFileError};
