//! Raman hyperspectral imaging toolkit: cube storage, classical spectral processing,
//! unmixing, resampling, quality metrics, and neural denoising / super-resolution.

pub mod augment;
pub mod error;
pub mod hypercube;
pub mod dsp;
pub mod unmix;
pub mod resample;
pub mod metrics;
pub mod neural;
pub mod synth;

pub use augment::{AugmentPolicy, TrainingPair};
pub use error::{Error, Result};
pub use hypercube::{AcquisitionMeta, HyperCube, Plane, Spectrum};
pub use metrics::{MetricsPair, QualityReport, SsimConstants};
pub use neural::{ArchConfig, Checkpoint, HyrisrConfig, ResUNet1dConfig, TrainConfig};
pub use resample::ScaleFactor;
pub use unmix::{AbundanceCube, EndmemberSet, LabelMap};
