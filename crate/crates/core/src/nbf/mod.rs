//! The Neural Bloom Filter memory architecture: controller, additive
//! outer-product write, multiplicative read, plus the sparse variant with
//! moving-ZCA sphering and a seeded address matrix.

mod address;
mod eig;
mod encoder;
mod model;
mod zca;

pub use address::{regenerate_address_rows, AddressMatrix, AddressMode, ROWS_PER_SEED};
pub use eig::symmetric_eigen;
pub use encoder::EncoderSpec;
pub use model::{
    memory_utilization, ControllerNodes, ControllerOutput, EpisodeContext, EpisodeGraph,
    MemoryState, NBFConfig, NeuralBloomFilter, SpheringCfgSerde, WriteNodes,
};
pub use zca::{zca_matrix, SpheringConfig, ZcaState, ZCA_EPS};
