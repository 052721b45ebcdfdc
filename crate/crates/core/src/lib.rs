//! repset: reduce a large corpus of C functions to a small representative
//! subset for benchmarking C-to-Rust transpilation.
//!
//! The pipeline has five stages, each usable as a library module and wired
//! together by the `repset` binary:
//!
//! 1. [`corpus`] — segment preprocessed C files into single-function samples
//!    and manage corpus manifests (including seeded microbenchmark
//!    subsampling).
//! 2. [`transpile`] — drive a C-to-Rust translation loop against a pluggable
//!    backend (scripted mock or an HTTP generate endpoint), with a compile
//!    check and up to 20 error-fixing rounds per function.
//! 3. [`metrics`] — compute four complexity metrics per function:
//!    maintainability index of the C and of the Rust source, unsafe
//!    operation complexity, and data type complexity.
//! 4. [`select`] — partition the 4-D metric space into equal-width bins,
//!    order samples by a unified PCA score, and systematically sample
//!    representatives from each bin.
//! 5. [`evaluate`] — score how representative a selection is by comparing
//!    compilation-fix-attempt distributions, and tune the two selection
//!    hyperparameters by grid search.

pub mod cli;
pub mod corpus;
pub mod evaluate;
pub mod lexer;
pub mod metrics;
pub mod pca;
pub mod select;
pub mod transpile;
