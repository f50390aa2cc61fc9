//! Exact transfer-matrix and Monte Carlo engine for the directed polymer on
//! `Z^2` in the intermediate disorder regime.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the scalar type.

pub mod disorder;
pub mod error;
pub mod experiments;
pub mod field;
pub mod kernel;
pub mod moments;
pub mod partition;
pub mod oracle;
pub mod path;
pub mod scalar;
pub mod stats;

pub use disorder::{make_coupling, DisorderLaw, EnvironmentSpec, ScaledCoupling};
pub use error::{Error, Result};
pub use field::{BoxMask, FieldOptions, PartitionValue, Rect, WeightField};
pub use kernel::{BoxSpec, Direction, LatticePoint, TimeIndex};
pub use scalar::Real;

pub type ScaledCoupling64 = ScaledCoupling<f64>;
pub type ScaledCoupling32 = ScaledCoupling<f32>;
pub type PartitionValue64 = PartitionValue<f64>;
pub type PartitionValue32 = PartitionValue<f32>;
pub type WeightField64 = WeightField<f64>;
pub type WeightField32 = WeightField<f32>;
