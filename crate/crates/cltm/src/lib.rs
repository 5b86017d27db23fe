//! Conditional latent tree models (CLTMs) over binary label vectors.
//!
//! Given feature vectors with multi-label annotations, this crate
//!
//! 1. estimates conditional pairwise label distances with kernel ridge
//!    regression ([`kernel`]),
//! 2. recovers a latent tree over the labels from those distances
//!    ([`structure`]),
//! 3. trains a feed-forward network whose outputs are the node potentials of
//!    a tree CRF, by the marginal negative log-likelihood of the observed
//!    labels ([`train`]),
//! 4. runs exact sum-product / max-product inference on the tree ([`crf`]),
//! 5. and evaluates multi-label predictions and unsupervised scene
//!    clustering ([`eval`]).
//!
//! [`synthetic`] provides brute-force oracles and generators used throughout
//! the test suites, and [`data`] handles dataset files.

pub mod crf;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod mlp;
pub mod model;
pub mod seed;
pub mod structure;
pub mod synthetic;
pub mod train;
pub mod tree;

pub use error::{Error, Result};
pub use tree::LatentTree;
