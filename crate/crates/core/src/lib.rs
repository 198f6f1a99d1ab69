//! Adaptive unrolled reconstruction for accelerated dynamic MRI.
//!
//! The crate provides the pieces of a prompt-conditioned unrolled
//! reconstruction pipeline at desk scale: k-space sampling mask generation,
//! mask-statistics and contrast prompt embeddings, a multi-coil Cartesian
//! acquisition operator with conjugate-gradient data consistency, a small
//! reverse-mode autodiff engine carrying the UNet / PCP-UNet regularizers,
//! channel-shift input augmentation, synthetic dynamic phantoms, and the
//! training / evaluation harness for the four-method comparison.

pub mod autodiff;
pub mod cascade;
pub mod embedding;
pub mod error;
pub mod fft;
pub mod forward;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod sampling;
pub mod shift;
pub mod tensor;
pub mod train;

pub use cascade::{Cascade, CascadeConfig, ReconTrace};
pub use embedding::{ContrastEmbedding, ContrastTable, PatternEmbedding, PATTERN_EMBED_LEN};
pub use error::{Error, Result};
pub use fft::{fft2c, ifft2c};
pub use forward::{adjoint, forward, normal, retrospective_undersample, CoilSensitivities};
pub use metrics::{crop_region, nmrse, paired_t_test, ssim, CropRect, MetricsReport};
pub use phantom::{build_dataset, generate_phantom, PhantomSpec, ReconSample};
pub use sampling::{achieved_rate, MaskKind, SamplingMask};
pub use tensor::{circ_shift, inner, Complex32, Complex64, ComplexTensor, RealTensor, Scalar};
pub use train::{train, Method, TrainConfig};
