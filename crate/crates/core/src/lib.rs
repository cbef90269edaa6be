//! Fourier-method solver for a mixed subdiffusion / backward-parabolic
//! equation with a non-local Dezin condition linking u(x, −α) and u(x, 0).

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod eigenbasis;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod mlf;
pub mod oracle;
pub mod quad;
pub mod special;
pub mod transforms;

pub use error::{Error, Result};
