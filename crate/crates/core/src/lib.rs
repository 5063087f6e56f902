//! Dynamic-mode features for two-party conversations.
//!
//! Paired embedding streams (therapist input, client response) are cut into
//! short windows, a control-affine linear model is fitted to every window, and
//! the dominant eigenvalues of its transition and controller matrices become
//! features for window-level classifiers whose outputs are accumulated into
//! session-level predictions.

pub mod aggregate;
pub mod classify;
pub mod corpus;
pub mod dmdc;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
