//! The planar warp group, bilinear warping with validity masks, warp
//! Jacobians for Gauss-Newton linearization, and support sets.

mod support;
mod transform;
mod warp;

pub use support::{support_set, support_set_between, SupportSet};
pub use transform::{AffineMatrix, Transform2D, TransformKind, MIN_AFFINE_DET};
pub use warp::{gradient, sample, warp, warp_into, warp_jacobian, warp_jacobian_into, Warped};
