//! Contrastive representation learning as structured prediction over linear
//! and quadratic assignment problems.
//!
//! The building blocks are a dense [`Tensor`] type with a reverse-mode
//! [`Tape`], similarity and eigenvalue kernels ([`simgeom`]), exact assignment
//! solvers ([`assignment`]) and the loss family ([`losses`]).

pub mod assignment;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod losses;
pub mod simgeom;
pub mod tape;
pub mod tensor;
pub mod verify;

pub use assignment::{Assignment, Sense};
pub use error::{Error, Result};
pub use losses::{GroundTruth, LossConfig, LossKind, Mining, Reduction};
pub use simgeom::{EigenDecomposition, SimilarityMode, SimilarityTriple};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
