//! Fixed random reservoirs and their state updates.

pub mod config;
pub mod container;
pub mod delay;
pub mod model;
pub mod sparse;
pub mod spectral;
pub mod step;
pub mod weights;

pub use config::{LayerConfig, StateTap, SubGroupPartition, Variant};
pub use container::{encode_reservoir, ModelContainer};
pub use delay::DelayBuffer;
pub use model::{Reservoir, ReservoirState};
pub use sparse::CsrMatrix;
pub use spectral::{operator_spectral_radius, spectral_radius, spectral_radius_with, SpectralOptions, SquareOperator};
pub use step::{step_deep, step_hetero_deep, step_hetero_shallow, step_shallow};
pub use weights::{init_layer, Layer, LayerWeights};
