//! Analytic toy faces for alignment and recognition experiments.
//!
//! A face is a sum of Gaussian blobs on the plane (centered pixel
//! coordinates of the gallery frame), so it can be rendered exactly under any
//! transform. Illumination is additive: a sparse combination of smooth
//! shading fields. The scene learns its own dictionary from auxiliary faces
//! rendered the same way, so the dictionary is never given the true fields.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Transform2D;
use crate::learn::{images_per_subject, learn_matrix, LearnOptions};
use crate::model::{FaceImage, GalleryEntry, GallerySet, Geometry, IlluminationDictionary};

/// Number of built-in shading fields.
pub const MAX_FIELDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub query_width: usize,
    pub query_height: usize,
    /// Shading fields in play, and atoms learned.
    pub atoms: usize,
    /// Nonzero shading coefficients per image.
    pub sparsity: usize,
    pub aux_subjects: usize,
    /// Standard deviation of additive query noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 60,
            height: 60,
            query_width: 120,
            query_height: 120,
            atoms: 5,
            sparsity: 2,
            aux_subjects: 4,
            noise: 0.01,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 || self.query_width < 8 || self.query_height < 8 {
            return Err(Error::InvalidArgument("scene frames must be at least 8x8".into()));
        }
        if self.atoms == 0 || self.atoms > MAX_FIELDS {
            return Err(Error::InvalidArgument(format!("atoms must lie in 1..={MAX_FIELDS}")));
        }
        if self.sparsity == 0 || self.sparsity > self.atoms {
            return Err(Error::InvalidArgument("sparsity must lie in 1..=atoms".into()));
        }
        if self.aux_subjects == 0 {
            return Err(Error::InvalidArgument("need at least one auxiliary subject".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument("noise must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { width: self.width, height: self.height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
    amp: f64,
}

/// One identity, as blobs in units of the gallery half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    blobs: Vec<Blob>,
}

impl Face {
    /// Shared layout (head, eyes, nose, mouth) with jittered geometry and
    /// contrast, plus a few identity-specific blobs.
    fn random(rng: &mut ChaCha8Rng) -> Face {
        let template = [
            (0.0, 0.05, 0.60, 0.55),
            (-0.38, -0.22, 0.16, -0.30),
            (0.38, -0.22, 0.16, -0.30),
            (0.0, 0.12, 0.14, 0.18),
            (0.0, 0.48, 0.18, -0.25),
        ];
        let mut blobs: Vec<Blob> = template
            .iter()
            .map(|&(x, y, sigma, amp)| Blob {
                x: x + rng.random_range(-0.06..0.06),
                y: y + rng.random_range(-0.06..0.06),
                sigma: sigma * rng.random_range(0.85..1.15),
                amp: amp * rng.random_range(0.7..1.3),
            })
            .collect();
        for _ in 0..4 {
            blobs.push(Blob {
                x: rng.random_range(-0.6..0.6),
                y: rng.random_range(-0.6..0.6),
                sigma: rng.random_range(0.12..0.25),
                amp: rng.random_range(-0.25..0.25),
            });
        }
        Face { blobs }
    }

    /// Intensity at normalized position `(u, v)`.
    fn eval(&self, u: f64, v: f64) -> f64 {
        self.blobs
            .iter()
            .map(|b| b.amp * (-((u - b.x).powi(2) + (v - b.y).powi(2)) / (2.0 * b.sigma * b.sigma)).exp())
            .sum()
    }
}

/// Smooth shading fields at normalized position `(u, v)`, fading with the head.
fn field(j: usize, u: f64, v: f64) -> f64 {
    let g = |cx: f64, cy: f64, s: f64| (-((u - cx).powi(2) + (v - cy).powi(2)) / (2.0 * s * s)).exp();
    let fade = g(0.0, 0.0, 0.9);
    0.3 * fade
        * match j {
            0 => u,
            1 => v,
            2 => g(-0.6, 0.0, 0.45),
            3 => g(0.6, 0.0, 0.45),
            4 => g(0.0, -0.7, 0.45),
            5 => u * v,
            6 => g(0.0, 0.7, 0.45),
            _ => u * u - v * v,
        }
}

/// A rendered gallery, its identities and a dictionary learned from
/// independently drawn auxiliary faces.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub faces: Vec<Face>,
    /// Auxiliary subjects the dictionary was learned from.
    pub auxiliary: Vec<Vec<FaceImage>>,
    pub gallery: GallerySet,
    pub dictionary: IlluminationDictionary,
}

impl Scene {
    /// Builds `classes` gallery identities (class ids `0..classes`).
    pub fn build(config: &SceneConfig, classes: usize) -> Result<Scene> {
        config.validate()?;
        if classes == 0 {
            return Err(Error::InvalidArgument("scene needs at least one class".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let auxiliary = render_auxiliary(config, &mut rng);
        let dictionary = learn_scene_dictionary(config, &auxiliary)?;
        let faces: Vec<Face> = (0..classes).map(|_| Face::random(&mut rng)).collect();
        let entries = faces
            .iter()
            .enumerate()
            .map(|(i, face)| {
                let code = sparse_code(config, &mut rng);
                GalleryEntry {
                    class_id: i as i64,
                    image: render(
                        config,
                        face,
                        &code,
                        &Transform2D::translation(0.0, 0.0),
                        config.width,
                        config.height,
                    ),
                    illumination_tag: format!("toy-{i}"),
                }
            })
            .collect();
        let gallery = GallerySet::new(config.geometry(), entries)?;
        Ok(Scene { config: *config, faces, auxiliary, gallery, dictionary })
    }

    /// Query of class `class` under fresh illumination, placed in the query
    /// frame so that `truth` maps gallery-frame positions onto it, plus noise.
    pub fn render_query(&self, class: usize, truth: &Transform2D, rng: &mut ChaCha8Rng) -> Result<FaceImage> {
        let face =
            self.faces.get(class).ok_or_else(|| Error::InvalidArgument(format!("scene has no class {class}")))?;
        let code = sparse_code(&self.config, rng);
        let cfg = &self.config;
        let mut image = render(cfg, face, &code, &truth.inverse(), cfg.query_width, cfg.query_height);
        if cfg.noise > 0.0 {
            let normal = Normal::new(0.0, cfg.noise).expect("finite noise");
            let noisy: Vec<f64> = image.pixels().iter().map(|v| v + normal.sample(rng)).collect();
            image = FaceImage::new(image.width(), image.height(), noisy)?;
        }
        Ok(image)
    }
}

/// Replaces a `fraction` of the pixels, chosen uniformly, by values drawn
/// uniformly from `[lo, hi]`.
pub fn corrupt(image: &FaceImage, fraction: f64, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Result<FaceImage> {
    if !(0.0..=1.0).contains(&fraction) || !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("bad corruption fraction {fraction} or range [{lo}, {hi}]")));
    }
    let d = image.dim();
    let count = (fraction * d as f64).round() as usize;
    let mut pixels = image.pixels().to_vec();
    for i in sample(rng, d, count) {
        pixels[i] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    }
    FaceImage::new(image.width(), image.height(), pixels)
}

fn sparse_code(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut code = vec![0.0; cfg.atoms];
    for j in sample(rng, cfg.atoms, cfg.sparsity) {
        let g: f64 = StandardNormal.sample(rng);
        code[j] = g;
    }
    code
}

/// Samples `(face + Σ code_j field_j) ∘ to_gallery` on a `w × h` grid, where
/// `to_gallery` maps grid positions into the gallery frame.
fn render(cfg: &SceneConfig, face: &Face, code: &[f64], to_gallery: &Transform2D, w: usize, h: usize) -> FaceImage {
    let r = cfg.width.min(cfg.height) as f64 / 2.0;
    FaceImage::from_fn(w, h, |x, y| {
        let cx = x as f64 - (w as f64 - 1.0) / 2.0;
        let cy = y as f64 - (h as f64 - 1.0) / 2.0;
        let (gx, gy) = to_gallery.apply(cx, cy);
        let (u, v) = (gx / r, gy / r);
        let shade: f64 = code.iter().enumerate().map(|(j, c)| c * field(j, u, v)).sum();
        0.1 + face.eval(u, v) + shade
    })
}

fn render_auxiliary(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<FaceImage>> {
    let n = images_per_subject(cfg.atoms).max(cfg.atoms);
    let identity = Transform2D::translation(0.0, 0.0);
    (0..cfg.aux_subjects)
        .map(|_| {
            let face = Face::random(rng);
            (0..n)
                .map(|_| {
                    let code = sparse_code(cfg, rng);
                    render(cfg, &face, &code, &identity, cfg.width, cfg.height)
                })
                .collect()
        })
        .collect()
}

fn learn_scene_dictionary(cfg: &SceneConfig, auxiliary: &[Vec<FaceImage>]) -> Result<IlluminationDictionary> {
    let columns: Vec<_> = auxiliary.iter().flatten().map(FaceImage::to_vector).collect();
    let n = auxiliary[0].len();
    let data = DMatrix::from_columns(&columns);
    Ok(learn_matrix(&data, n, cfg.atoms, cfg.width, cfg.height, &LearnOptions::default())?.dictionary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::warp_into;

    fn small() -> SceneConfig {
        SceneConfig {
            width: 16,
            height: 16,
            query_width: 24,
            query_height: 24,
            atoms: 3,
            aux_subjects: 3,
            ..Default::default()
        }
    }

    #[test]
    fn build_is_deterministic() {
        let a = Scene::build(&small(), 3).unwrap();
        let b = Scene::build(&small(), 3).unwrap();
        assert_eq!(a.gallery, b.gallery);
        assert_eq!(a.dictionary, b.dictionary);
        assert_eq!(a.gallery.len(), 3);
        assert_eq!(a.dictionary.atom_count(), 3);
    }

    #[test]
    fn learned_dictionary_spans_the_shading_fields() {
        let cfg = small();
        let scene = Scene::build(&cfg, 1).unwrap();
        let c = scene.dictionary.atoms();
        let r = cfg.width as f64 / 2.0;
        for j in 0..cfg.atoms {
            let f = nalgebra::DVector::from_fn(cfg.width * cfg.height, |i, _| {
                let cx = (i % cfg.width) as f64 - (cfg.width as f64 - 1.0) / 2.0;
                let cy = (i / cfg.width) as f64 - (cfg.height as f64 - 1.0) / 2.0;
                field(j, cx / r, cy / r)
            });
            let coef = c.clone().svd(true, true).solve(&f, 1e-12).unwrap();
            assert!((c * coef - &f).norm() < 1e-6 * f.norm(), "field {j}");
        }
    }

    #[test]
    fn noiseless_query_matches_gallery_face_under_truth() {
        let cfg = SceneConfig { noise: 0.0, ..small() };
        let scene = Scene::build(&cfg, 2).unwrap();
        let truth = Transform2D::translation(3.0, -2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = scene.render_query(1, &truth, &mut rng).unwrap();
        // pulling the query back by the truth leaves only a shading difference
        let back = warp_into(&q, &truth, cfg.width, cfg.height);
        assert!(back.valid.iter().all(|v| *v));
        let diff = back.image.to_vector() - scene.gallery.entries[1].image.to_vector();
        let c = scene.dictionary.atoms();
        let coef = c.clone().svd(true, true).solve(&diff, 1e-12).unwrap();
        let resid = &diff - c * coef;
        assert!(resid.amax() < 1e-9, "{}", resid.amax());
    }

    #[test]
    fn corruption_replaces_the_requested_count() {
        let img = FaceImage::from_fn(10, 10, |_, _| 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = corrupt(&img, 0.3, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(out.pixels().iter().filter(|v| **v != 5.0).count(), 30);
        assert!(corrupt(&img, 1.5, 0.0, 1.0, &mut rng).is_err());
    }
}
