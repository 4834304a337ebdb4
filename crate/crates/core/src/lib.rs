//! Risk scoring of lending platforms from heterogeneous static and monthly
//! features with a five-branch neural network, together with the cleaning,
//! feature extraction and rolling evaluation around it.

pub mod cleaning;
pub mod domain;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod nn;
pub mod synth;
pub mod tensor;

pub use domain::{label_at, Dataset, FeatureBundle, Label, Month, PlatformRecord, RiskScore, TextDocument};
pub use error::{Error, Result};
pub use tensor::Tensor;
