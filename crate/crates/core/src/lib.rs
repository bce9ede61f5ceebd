//! Frequency-domain self-attention, discriminative frequency feed-forward
//! blocks and the asymmetric encoder-decoder deblurring network built from
//! them, together with the oracles, gradient checks, training loop and I/O
//! used to verify and exercise them.

pub mod attention;
pub mod autodiff;
pub mod counter;
pub mod dataio;
pub mod error;
pub mod exec;
pub mod ffn;
pub mod network;
pub mod ops;
pub mod params;
pub mod scalar;
pub mod spectral;
pub mod suites;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use exec::{Eager, Exec};
pub use params::{Binder, ParameterStore};
pub use scalar::Scalar;
pub use spectral::{ComplexSpectrum, Spectrum};
pub use tensor::{RealTensor, Tensor};
