//! Operator-learning architectures built on the tensor tape.

pub mod deeponet;
pub mod fno;
pub mod kv;
pub mod params;
pub mod wno;

pub use deeponet::DeepOnetConfig;
pub use fno::FnoConfig;
pub use kv::KvList;
pub use params::{Bound, Init, ParamSpec, Params};
pub use wno::WnoConfig;
