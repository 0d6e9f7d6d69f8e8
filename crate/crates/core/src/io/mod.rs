//! File formats: binary datasets and checkpoints, density configuration,
//! CSV interchange and SVG figures. Byte layouts are documented in FORMATS.md.

mod bytes;
pub mod checkpoint;
pub mod csv;
pub mod density;
pub mod hysd;
pub mod svg;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use density::{parse_density, DensityConfig};
pub use hysd::{read_hysd, write_hysd};
