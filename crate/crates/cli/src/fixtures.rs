//! On-disk synthetic datasets with known ground truth, for exercising the
//! file-based commands end to end.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use silt::model::{Manifest, ManifestEntry, ManifestMode, EYE_DISTANCE_RATIO, EYE_LINE_OFFSET_RATIO};
use silt::scene::{Scene, SceneConfig};
use silt::{Error, FaceImage, Result, Transform2D};

/// Intensity map into the 8-bit file range; an affine change keeps the
/// additive illumination model intact.
const GAIN: f64 = 0.6;
const OFFSET: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTruth {
    pub path: PathBuf,
    pub class_id: i64,
    /// Maps gallery-frame positions into the query image.
    pub tau: Transform2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub auxiliary_manifest: PathBuf,
    pub gallery_manifest: PathBuf,
    pub query_manifest: PathBuf,
    pub atoms: usize,
    pub queries: Vec<QueryTruth>,
}

fn save(img: &FaceImage, path: &Path) -> Result<()> {
    let mapped = FaceImage::new(img.width(), img.height(), img.pixels().iter().map(|v| OFFSET + GAIN * v).collect())?;
    mapped.save_pgm(path)
}

/// Raster positions of the outer eye corners that make the manifest's eye
/// crop reproduce `tau` up to its rotation.
fn eye_corners(tau: &Transform2D, cfg: &SceneConfig) -> [[f64; 2]; 2] {
    let span = EYE_DISTANCE_RATIO * cfg.width as f64;
    let eye_y = -EYE_LINE_OFFSET_RATIO * cfg.height as f64;
    let (cx, cy) = ((cfg.query_width as f64 - 1.0) / 2.0, (cfg.query_height as f64 - 1.0) / 2.0);
    let (lx, ly) = tau.apply(-span / 2.0, eye_y);
    let (rx, ry) = tau.apply(span / 2.0, eye_y);
    [[lx + cx, ly + cy], [rx + cx, ry + cy]]
}

/// Writes `auxiliary.json`, `gallery.json`, `queries.json`, their PGM images
/// and `truth.json` into `dir`. Queries are unrotated so that the eye-corner
/// initialization equals the truth.
pub fn write_fixtures(dir: &Path, cfg: &SceneConfig, classes: usize, queries: usize) -> Result<FixtureTruth> {
    std::fs::create_dir_all(dir).map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
    let scene = Scene::build(cfg, classes)?;
    let geometry = cfg.geometry();

    let mut aux_entries = Vec::new();
    for (s, subject) in scene.auxiliary.iter().enumerate() {
        for (i, img) in subject.iter().enumerate() {
            let name = format!("aux_{s:02}_{i:02}.pgm");
            save(img, &dir.join(&name))?;
            aux_entries.push(ManifestEntry { subject_id: Some(s as i64), ..ManifestEntry::new(name) });
        }
    }
    let aux = Manifest { geometry, mode: ManifestMode::Auxiliary, entries: aux_entries };
    aux.write(&dir.join("auxiliary.json"))?;

    let mut gallery_entries = Vec::new();
    for entry in &scene.gallery.entries {
        let name = format!("gallery_{:02}.pgm", entry.class_id);
        save(&entry.image, &dir.join(&name))?;
        gallery_entries.push(ManifestEntry {
            class_id: Some(entry.class_id),
            illumination_tag: Some(entry.illumination_tag.clone()),
            ..ManifestEntry::new(name)
        });
    }
    Manifest { geometry, mode: ManifestMode::Gallery, entries: gallery_entries }.write(&dir.join("gallery.json"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xf1c7_u64);
    let mut query_entries = Vec::new();
    let mut truths = Vec::new();
    for q in 0..queries {
        let class = q % classes;
        let tau = Transform2D::similarity(
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            0.0,
            rng.random_range(0.95..1.05),
        )?;
        let img = scene.render_query(class, &tau, &mut rng)?;
        let name = format!("query_{q:02}.pgm");
        save(&img, &dir.join(&name))?;
        query_entries.push(ManifestEntry {
            class_id: Some(class as i64),
            eye_corners: Some(eye_corners(&tau, cfg)),
            ..ManifestEntry::new(&name)
        });
        truths.push(QueryTruth { path: PathBuf::from(name), class_id: class as i64, tau });
    }
    Manifest { geometry, mode: ManifestMode::Query, entries: query_entries }.write(&dir.join("queries.json"))?;

    let truth = FixtureTruth {
        auxiliary_manifest: "auxiliary.json".into(),
        gallery_manifest: "gallery.json".into(),
        query_manifest: "queries.json".into(),
        atoms: cfg.atoms,
        queries: truths,
    };
    std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth)?)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
    Ok(truth)
}
