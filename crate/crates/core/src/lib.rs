//! Sparse illumination learning and transfer for single-sample face
//! alignment and recognition.
//!
//! - [`model`]: images, manifests, dictionaries
//! - [`solvers`]: exact ℓ1 solvers
//! - [`learn`]: dictionary learning and the synthetic recovery benchmark
//! - [`geometry`]: planar transforms, warping, support sets
//! - [`pipeline`]: alignment, transfer and recognition
//! - [`scene`]: analytic toy faces for experiments

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a > b)` deliberately rejects NaN

pub mod error;
pub mod geometry;
pub mod learn;
pub mod model;
pub mod pipeline;
pub mod scene;
pub mod solvers;

pub use error::{Error, Result};
pub use geometry::{SupportSet, Transform2D, TransformKind};
pub use model::{AuxiliarySet, FaceImage, GalleryEntry, GallerySet, Geometry, IlluminationDictionary, QueryList};
