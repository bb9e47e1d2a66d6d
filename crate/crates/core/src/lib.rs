//! Binary linear classifiers from the robust classification model
//!
//! ```text
//! max_{‖w‖ = 1}  min_{x₊ ∈ U₊, x₋ ∈ U₋}  (x₊ − x₋)ᵀ w
//! ```
//!
//! Hard-margin SVM, ν-SVM / Eν-SVM, MPM and FDA (and their margin-maximized
//! and non-convex variants) are all instances of this problem for different
//! uncertainty sets `U±`. When the sets are disjoint the problem is convex and
//! solved as a nearest-point problem ([`solver_convex`]); when they overlap it
//! is solved by the linearized local search in [`solver_nonconvex`].
//! [`model`] ties both into a training pipeline.

pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod solver_convex;
pub mod solver_nonconvex;
pub mod statcheck;
pub mod uncertainty;

pub use error::{RcmError, Result};
pub use linalg::{SymMatrix, Vector};
pub use model::{train, BiasMethod, Param, TrainConfig, TrainedModel};
pub use uncertainty::{Dataset, FamilyBuilder, FamilyKind, Label, PairSet, UncertaintySet};
