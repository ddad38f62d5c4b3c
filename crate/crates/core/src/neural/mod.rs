//! Tape-based autodiff, the 1-D ResUNet denoiser, the HyRISR super-resolution network,
//! training, and `DPRC` checkpoints.

pub mod checkpoint;
pub mod graph;
pub mod hyrisr;
pub mod layers;
pub mod model;
pub mod optim;
pub mod params;
pub mod resunet;
pub mod tensor;
pub mod train;

pub use checkpoint::{AdamMoments, Checkpoint, Provenance};
pub use hyrisr::HyrisrConfig;
pub use model::{ArchConfig, Model};
pub use optim::{AdamConfig, Scheduler};
pub use resunet::ResUNet1dConfig;
pub use train::{
    denoise_cube, denoise_then_superres, fine_tune, infer_denoise, infer_superres, superres_cube, train, EpochLog,
    TrainConfig, TrainOutcome,
};
