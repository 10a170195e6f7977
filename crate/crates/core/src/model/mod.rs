//! Domain types shared by every stage: images, datasets, the learned
//! dictionary and its file format.

mod dictionary;
mod image;
mod manifest;

pub use dictionary::{IlluminationDictionary, HEADER_LEN, MAGIC, VERSION};
pub use image::FaceImage;
pub use manifest::{
    eye_crop_transform, load_auxiliary, load_gallery, load_manifest, load_queries, AuxiliarySet, Dataset, GalleryEntry,
    GallerySet, Geometry, Manifest, ManifestEntry, ManifestMode, Query, QueryList, EYE_DISTANCE_RATIO,
    EYE_LINE_OFFSET_RATIO,
};
