//! Procedural ground-truth scenes and circular capture paths.

pub mod field;
pub mod noise;
pub mod path;
pub mod presets;

pub use field::{build_field, Primitive, SceneSpec, ShadingSpec, Shape, SyntheticField};
pub use path::{orbit_path, CameraPath};
