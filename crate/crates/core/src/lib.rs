//! Spatially-varying illumination estimation with flash gray pixels.
//!
//! A no-flash image of a scene lit by several colored lights carries a
//! different illuminant mixture at every pixel, which breaks the single-light
//! assumption behind gray-pixel color constancy. Subtracting the no-flash image
//! from a flash image leaves a residual lit by the flash alone:
//!
//! ```text
//! I_fo(p) = I_f(p) - I(p) = R(p) * lambda_f(p) * l_f
//! ```
//!
//! Gray pixels found in that residual reveal the flash chroma, which in turn
//! gives a per-pixel albedo proxy and finally the per-pixel ambient
//! illumination `L(p) = I(p) / I_gray(p)`. The flash color never has to be
//! calibrated.
//!
//! Modules:
//!
//! - [`imgcore`]: linear image containers, log transform, Mexican-hat
//!   filtering, PFM / 16-bit PNG I/O.
//! - [`grayness`]: GP, MSGP and DGP grayness maps, gray pixel selection and
//!   mean-shift dominant illuminant.
//! - [`flashgp`]: flash-only residual, clustering, Gaussian spatial
//!   interpolation, albedo recovery and the full estimator.
//! - [`scenesynth`]: Lambertian renderer and multi-illuminant triplet synthesis.
//! - [`evalbench`]: angular error, error maps and the benchmark harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evalbench;
pub mod flashgp;
pub mod grayness;
pub mod imgcore;
pub mod scenesynth;

mod vec3;

pub use error::{Error, Result};
pub use flashgp::{estimate, EstimateOutput, EstimatorConfig, FlashPair, IlluminationMap};
pub use grayness::{GrayPixelSet, GraynessMap, GraynessMethod};
pub use imgcore::{LinearImage, MaskedImage, PixelMask, ScalarMap};
