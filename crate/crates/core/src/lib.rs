//! Quanvolutional and classical feature extractors, a dense softmax head,
//! and the gradient-based attacks used to compare their robustness.

pub mod ansatz;
pub mod attacks;
pub mod classical;
pub mod data;
pub mod error;
pub mod image;
pub mod metrics;
pub mod model;
pub mod qsim;
pub mod quanv;
pub mod seed;

pub use ansatz::{Ansatz, AnsatzKind};
pub use attacks::{AttackKind, AttackSpec, RobustnessCurve};
pub use error::{Error, Result};
pub use image::{FeatureMap, Image};
pub use model::{Differentiable, Extractor, Model};
pub use qsim::{Gate, GateKind, StateVector};
