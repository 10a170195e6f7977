//! Dataset manifests.
//!
//! ```json
//! {
//!   "geometry": {"width": 60, "height": 60},
//!   "mode": "gallery" | "auxiliary" | "query",
//!   "entries": [
//!     {"path": "s01.pgm", "class_id": 1, "subject_id": 1,
//!      "illumination_tag": "f07", "eye_corners": [[12.0, 20.5], [61.0, 21.0]]}
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. Without
//! `eye_corners` an image must already have the declared geometry. With them,
//! gallery and auxiliary images are cropped by a similarity warp that puts the
//! two outer eye corners `EYE_DISTANCE_RATIO * width` apart (50 px at 60 px
//! width) on the row `height / 6` above the crop center. Query images are kept
//! whole and the crop becomes the initial alignment transform instead, with
//! rotation dropped as a face detector box would.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::image::FaceImage;
use crate::error::{Error, Result};
use crate::geometry::{warp_into, Transform2D, TransformKind};

/// Outer-eye-corner distance as a fraction of crop width (50 / 60).
pub const EYE_DISTANCE_RATIO: f64 = 50.0 / 60.0;
/// Eye line offset above the crop center, as a fraction of crop height.
pub const EYE_LINE_OFFSET_RATIO: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
}

impl Geometry {
    pub fn dim(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestMode {
    Gallery,
    Auxiliary,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illumination_tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye_corners: Option<[[f64; 2]; 2]>,
}

impl ManifestEntry {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ManifestEntry { path: path.into(), class_id: None, subject_id: None, illumination_tag: None, eye_corners: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub geometry: Geometry,
    pub mode: ManifestMode,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest { path: path.to_path_buf(), message: e.to_string() })?;
        if m.geometry.width == 0 || m.geometry.height == 0 {
            return Err(Error::Manifest { path: path.to_path_buf(), message: "geometry must be at least 1x1".into() });
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub class_id: i64,
    pub image: FaceImage,
    pub illumination_tag: String,
}

/// Single-sample gallery, one entry per class in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct GallerySet {
    pub geometry: Geometry,
    pub entries: Vec<GalleryEntry>,
}

impl GallerySet {
    pub fn new(geometry: Geometry, entries: Vec<GalleryEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if (e.image.width(), e.image.height()) != (geometry.width, geometry.height) {
                return Err(Error::Dimension(format!("gallery class {} image does not match geometry", e.class_id)));
            }
            if !seen.insert(e.class_id) {
                return Err(Error::DuplicateClass(e.class_id));
            }
        }
        Ok(GallerySet { geometry, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `d × L` matrix of stacked gallery images.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.geometry.dim();
        DMatrix::from_fn(d, self.entries.len(), |i, j| self.entries[j].image.pixels()[i])
    }
}

/// Auxiliary illumination examples `D = [D_1, …, D_p]`, each `D_i` holding
/// `n` images of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    geometry: Geometry,
    subjects: Vec<Vec<FaceImage>>,
}

impl AuxiliarySet {
    pub fn new(geometry: Geometry, subjects: Vec<Vec<FaceImage>>) -> Result<Self> {
        if geometry.dim() == 0 || subjects.is_empty() {
            return Err(Error::InvalidArgument("auxiliary set needs at least one subject".into()));
        }
        let n = subjects[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("auxiliary subjects need at least one image".into()));
        }
        for (i, s) in subjects.iter().enumerate() {
            if s.len() != n {
                return Err(Error::Dimension(format!("subject {i} has {} images, expected {n}", s.len())));
            }
            if s.iter().any(|img| (img.width(), img.height()) != (geometry.width, geometry.height)) {
                return Err(Error::Dimension(format!("subject {i} has an image that does not match geometry")));
            }
        }
        Ok(AuxiliarySet { geometry, subjects })
    }

    /// Splits the columns of a `d × (n·p)` matrix into `p` subjects of `n`.
    pub fn from_matrix(geometry: Geometry, data: &DMatrix<f64>, n: usize) -> Result<Self> {
        if n == 0 || !data.ncols().is_multiple_of(n) || data.nrows() != geometry.dim() {
            return Err(Error::Dimension(format!(
                "{}x{} data matrix cannot be split into subjects of {n} images at {}x{}",
                data.nrows(),
                data.ncols(),
                geometry.width,
                geometry.height
            )));
        }
        let subjects = (0..data.ncols() / n)
            .map(|s| {
                (0..n)
                    .map(|j| {
                        FaceImage::new(
                            geometry.width,
                            geometry.height,
                            data.column(s * n + j).iter().copied().collect(),
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(geometry, subjects)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    /// Images per subject.
    pub fn per_subject(&self) -> usize {
        self.subjects[0].len()
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.len()
    }

    pub fn subjects(&self) -> &[Vec<FaceImage>] {
        &self.subjects
    }

    /// `d × (n·p)` data matrix, subject blocks in order.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.per_subject();
        DMatrix::from_fn(self.dim(), n * self.subject_count(), |i, j| self.subjects[j / n][j % n].pixels()[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub path: PathBuf,
    pub image: FaceImage,
    /// Maps gallery-frame positions into this image.
    pub init: Transform2D,
    pub class_id: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryList {
    pub geometry: Geometry,
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Gallery(GallerySet),
    Auxiliary(AuxiliarySet),
    Query(QueryList),
}

/// Similarity mapping crop-frame positions onto source positions so that the
/// outer eye corners land at their canonical crop locations.
pub fn eye_crop_transform(
    corners: [[f64; 2]; 2],
    src_w: usize,
    src_h: usize,
    geometry: Geometry,
) -> Result<Transform2D> {
    let span = EYE_DISTANCE_RATIO * geometry.width as f64;
    let eye_y = -EYE_LINE_OFFSET_RATIO * geometry.height as f64;
    let (cx, cy) = ((src_w as f64 - 1.0) / 2.0, (src_h as f64 - 1.0) / 2.0);
    let left = (corners[0][0] - cx, corners[0][1] - cy);
    let right = (corners[1][0] - cx, corners[1][1] - cy);
    let (dx, dy) = (right.0 - left.0, right.1 - left.1);
    let dist = dx.hypot(dy);
    if !(dist > 0.0) {
        return Err(Error::InvalidArgument("eye corners coincide".into()));
    }
    let scale = dist / span;
    let theta = dy.atan2(dx);
    let rot = Transform2D::similarity(0.0, 0.0, theta, scale)?;
    let (ox, oy) = rot.apply(-span / 2.0, eye_y);
    Transform2D::similarity(left.0 - ox, left.1 - oy, theta, scale)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn fit_to_geometry(img: FaceImage, entry: &ManifestEntry, path: &Path, geometry: Geometry) -> Result<FaceImage> {
    match entry.eye_corners {
        Some(corners) => {
            let tau = eye_crop_transform(corners, img.width(), img.height(), geometry)?;
            Ok(warp_into(&img, &tau, geometry.width, geometry.height).image)
        }
        None if (img.width(), img.height()) == (geometry.width, geometry.height) => Ok(img),
        None => Err(Error::GeometryMismatch {
            path: path.to_path_buf(),
            found_w: img.width(),
            found_h: img.height(),
            want_w: geometry.width,
            want_h: geometry.height,
        }),
    }
}

pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let manifest = Manifest::read(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let geometry = manifest.geometry;
    let bad = |message: String| Error::Manifest { path: path.to_path_buf(), message };

    match manifest.mode {
        ManifestMode::Gallery => {
            let mut entries = Vec::with_capacity(manifest.entries.len());
            let mut seen = HashSet::new();
            for e in &manifest.entries {
                let class_id = e.class_id.ok_or_else(|| bad(format!("gallery entry {:?} lacks class_id", e.path)))?;
                if !seen.insert(class_id) {
                    return Err(Error::DuplicateClass(class_id));
                }
                let p = resolve(base, &e.path);
                let image = fit_to_geometry(FaceImage::load(&p)?, e, &p, geometry)?;
                entries.push(GalleryEntry {
                    class_id,
                    image,
                    illumination_tag: e.illumination_tag.clone().unwrap_or_default(),
                });
            }
            Ok(Dataset::Gallery(GallerySet::new(geometry, entries)?))
        }
        ManifestMode::Auxiliary => {
            // subjects keep the order of their first appearance
            let mut order: Vec<i64> = Vec::new();
            let mut groups: BTreeMap<i64, Vec<FaceImage>> = BTreeMap::new();
            for e in &manifest.entries {
                let sid = e
                    .subject_id
                    .or(e.class_id)
                    .ok_or_else(|| bad(format!("auxiliary entry {:?} lacks subject_id", e.path)))?;
                let p = resolve(base, &e.path);
                let image = fit_to_geometry(FaceImage::load(&p)?, e, &p, geometry)?;
                if !groups.contains_key(&sid) {
                    order.push(sid);
                }
                groups.entry(sid).or_default().push(image);
            }
            let subjects = order.iter().map(|s| groups.remove(s).unwrap()).collect();
            AuxiliarySet::new(geometry, subjects).map(Dataset::Auxiliary).map_err(|e| bad(e.to_string()))
        }
        ManifestMode::Query => {
            let mut queries = Vec::with_capacity(manifest.entries.len());
            for e in &manifest.entries {
                let p = resolve(base, &e.path);
                let image = FaceImage::load(&p)?;
                let init = match e.eye_corners {
                    Some(corners) => {
                        let crop = eye_crop_transform(corners, image.width(), image.height(), geometry)?;
                        let m = crop.params();
                        // detector-style box: keep translation and scale only
                        Transform2D::new(TransformKind::Similarity, vec![m[0], m[1], 0.0, m[3]])?
                    }
                    None => {
                        if (image.width(), image.height()) != (geometry.width, geometry.height) {
                            return Err(Error::GeometryMismatch {
                                path: p,
                                found_w: image.width(),
                                found_h: image.height(),
                                want_w: geometry.width,
                                want_h: geometry.height,
                            });
                        }
                        Transform2D::identity(TransformKind::Similarity)
                    }
                };
                queries.push(Query { path: p, image, init, class_id: e.class_id });
            }
            Ok(Dataset::Query(QueryList { geometry, queries }))
        }
    }
}

fn wrong_mode(path: &Path, want: &str) -> Error {
    Error::Manifest { path: path.to_path_buf(), message: format!("expected a {want} manifest") }
}

pub fn load_gallery(path: &Path) -> Result<GallerySet> {
    match load_manifest(path)? {
        Dataset::Gallery(g) => Ok(g),
        _ => Err(wrong_mode(path, "gallery")),
    }
}

pub fn load_auxiliary(path: &Path) -> Result<AuxiliarySet> {
    match load_manifest(path)? {
        Dataset::Auxiliary(a) => Ok(a),
        _ => Err(wrong_mode(path, "auxiliary")),
    }
}

pub fn load_queries(path: &Path) -> Result<QueryList> {
    match load_manifest(path)? {
        Dataset::Query(q) => Ok(q),
        _ => Err(wrong_mode(path, "query")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_img(dir: &Path, name: &str, w: usize, h: usize, f: impl Fn(usize, usize) -> f64) {
        FaceImage::from_fn(w, h, f).save_pgm(&dir.join(name)).unwrap();
    }

    fn manifest(mode: ManifestMode, w: usize, h: usize, entries: Vec<ManifestEntry>) -> Manifest {
        Manifest { geometry: Geometry { width: w, height: h }, mode, entries }
    }

    fn entry(path: &str, class_id: Option<i64>, subject_id: Option<i64>) -> ManifestEntry {
        ManifestEntry { class_id, subject_id, ..ManifestEntry::new(path) }
    }

    #[test]
    fn two_images_make_one_subject() {
        let dir = tempfile::tempdir().unwrap();
        write_img(dir.path(), "a.pgm", 4, 4, |x, _| x as f64 / 3.0);
        write_img(dir.path(), "b.pgm", 4, 4, |_, y| y as f64 / 3.0);
        let m =
            manifest(ManifestMode::Auxiliary, 4, 4, vec![entry("a.pgm", None, Some(7)), entry("b.pgm", None, Some(7))]);
        let mp = dir.path().join("aux.json");
        m.write(&mp).unwrap();
        let aux = load_auxiliary(&mp).unwrap();
        assert_eq!((aux.subject_count(), aux.per_subject(), aux.dim()), (1, 2, 16));
        assert_eq!(aux.matrix().shape(), (16, 2));
        // deterministic
        assert_eq!(load_auxiliary(&mp).unwrap(), aux);
    }

    #[test]
    fn eye_corners_crop_to_declared_geometry() {
        let dir = tempfile::tempdir().unwrap();
        write_img(dir.path(), "big.pgm", 120, 100, |x, y| ((x + y) % 7) as f64 / 6.0);
        let mut e = entry("big.pgm", Some(1), None);
        e.eye_corners = Some([[30.0, 40.0], [85.0, 42.0]]);
        let m = manifest(ManifestMode::Gallery, 60, 60, vec![e]);
        let mp = dir.path().join("g.json");
        m.write(&mp).unwrap();
        let g = load_gallery(&mp).unwrap();
        assert_eq!((g.entries[0].image.width(), g.entries[0].image.height()), (60, 60));
    }

    #[test]
    fn eye_crop_places_corners_canonically() {
        let geometry = Geometry { width: 60, height: 60 };
        let corners = [[30.0, 40.0], [85.0, 42.0]];
        let tau = eye_crop_transform(corners, 120, 100, geometry).unwrap();
        let (x, y) = tau.apply(-25.0, -10.0);
        assert!((x + 59.5 - 30.0).abs() < 1e-9 && (y + 49.5 - 40.0).abs() < 1e-9);
        let (x, y) = tau.apply(25.0, -10.0);
        assert!((x + 59.5 - 85.0).abs() < 1e-9 && (y + 49.5 - 42.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_gallery_class_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_img(dir.path(), "a.pgm", 3, 3, |_, _| 0.5);
        let m =
            manifest(ManifestMode::Gallery, 3, 3, vec![entry("a.pgm", Some(2), None), entry("a.pgm", Some(2), None)]);
        let mp = dir.path().join("g.json");
        m.write(&mp).unwrap();
        assert!(matches!(load_manifest(&mp), Err(Error::DuplicateClass(2))));
    }

    #[test]
    fn geometry_mismatch_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        write_img(dir.path(), "a.pgm", 5, 4, |_, _| 0.5);
        let m = manifest(ManifestMode::Auxiliary, 4, 4, vec![entry("a.pgm", None, Some(1))]);
        let mp = dir.path().join("aux.json");
        m.write(&mp).unwrap();
        assert!(matches!(load_manifest(&mp), Err(Error::GeometryMismatch { .. })));
        assert!(matches!(load_manifest(&dir.path().join("nope.json")), Err(Error::Io { .. })));
        let m = manifest(ManifestMode::Auxiliary, 4, 4, vec![entry("missing.pgm", None, Some(1))]);
        m.write(&mp).unwrap();
        assert!(matches!(load_manifest(&mp), Err(Error::Io { .. })));
    }

    #[test]
    fn unequal_subject_sizes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_img(dir.path(), "a.pgm", 2, 2, |_, _| 0.5);
        let m = manifest(
            ManifestMode::Auxiliary,
            2,
            2,
            vec![entry("a.pgm", None, Some(1)), entry("a.pgm", None, Some(1)), entry("a.pgm", None, Some(2))],
        );
        let mp = dir.path().join("aux.json");
        m.write(&mp).unwrap();
        assert!(load_manifest(&mp).is_err());
    }

    #[test]
    fn query_keeps_full_image_and_derives_init() {
        let dir = tempfile::tempdir().unwrap();
        write_img(dir.path(), "q.pgm", 80, 80, |_, _| 0.5);
        let mut e = entry("q.pgm", Some(3), None);
        e.eye_corners = Some([[20.0, 30.0], [45.0, 30.0]]);
        let m = manifest(ManifestMode::Query, 30, 30, vec![e]);
        let mp = dir.path().join("q.json");
        m.write(&mp).unwrap();
        let q = load_queries(&mp).unwrap();
        assert_eq!(q.queries[0].image.width(), 80);
        let p = q.queries[0].init.params();
        assert!((p[3].exp() - 1.0).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
        assert_eq!(q.queries[0].class_id, Some(3));
    }
}
