pub mod arithmetic;
pub mod experiments;
pub mod harmonics;
pub mod kernel;
pub mod lie_ops;
pub mod majorants;
pub mod numerics;
pub mod sampling;
pub mod sl2;
pub mod verify;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
