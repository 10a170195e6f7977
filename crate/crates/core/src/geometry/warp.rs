//! Bilinear warping and warp Jacobians.
//!
//! Pixel `(x, y)` (0-based) of a `w × h` frame sits at 1-based position
//! `(x + 1, y + 1)`; transforms act on positions measured from the frame
//! center `((w + 1) / 2, (h + 1) / 2)`. A warp maps each output pixel into
//! the source frame, so `warp(b, τ)(p) = b(τ(p))`. A sample is in bounds iff
//! its source position lies in the closed box `[1, w] × [1, h]`.

use nalgebra::DMatrix;

use super::transform::Transform2D;
use crate::model::FaceImage;

/// Slack on the closed-box bound test, absorbing roundoff of transforms that
/// land exactly on the border.
const BOUND_EPS: f64 = 1e-9;

/// A warped image with the per-pixel validity of its samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: FaceImage,
    pub valid: Vec<bool>,
}

impl Warped {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

#[inline]
pub(crate) fn centered(x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
    (x as f64 - (w as f64 - 1.0) / 2.0, y as f64 - (h as f64 - 1.0) / 2.0)
}

/// Maps a centered position of a `w × h` frame to 0-based raster coordinates.
#[inline]
pub(crate) fn raster(cx: f64, cy: f64, w: usize, h: usize) -> (f64, f64) {
    (cx + (w as f64 - 1.0) / 2.0, cy + (h as f64 - 1.0) / 2.0)
}

#[inline]
pub(crate) fn in_bounds(sx: f64, sy: f64, w: usize, h: usize) -> bool {
    sx >= -BOUND_EPS && sy >= -BOUND_EPS && sx <= w as f64 - 1.0 + BOUND_EPS && sy <= h as f64 - 1.0 + BOUND_EPS
}

/// Splits a raster coordinate into a cell index and fraction, clamped so
/// that `i + 1` stays inside `[0, n)` whenever `n > 1`.
#[inline]
fn cell(s: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let s = s.clamp(0.0, n as f64 - 1.0);
    let i = (s.floor() as usize).min(n - 2);
    (i, s - i as f64)
}

/// Bilinear sample at raster coordinates already known to be in bounds.
#[inline]
pub fn sample(img: &FaceImage, sx: f64, sy: f64) -> f64 {
    let (w, h) = (img.width(), img.height());
    let (x0, fx) = cell(sx, w);
    let (y0, fy) = cell(sy, h);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Slope along one axis of the piecewise-linear interpolant through
/// `line(0..n)` at `s`. On a knot the left and right slopes are averaged,
/// which is the central difference; the ends fall back to one side.
#[inline]
fn axis_slope(line: impl Fn(usize) -> f64, s: f64, n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let s = s.clamp(0.0, n as f64 - 1.0);
    let f = s.floor();
    let i = f as usize;
    if s == f {
        if i == 0 {
            line(1) - line(0)
        } else if i == n - 1 {
            line(n - 1) - line(n - 2)
        } else {
            0.5 * (line(i + 1) - line(i - 1))
        }
    } else {
        line(i + 1) - line(i)
    }
}

/// Spatial gradient `(∂/∂x, ∂/∂y)` of the bilinear interpolant at raster
/// coordinates `(sx, sy)`.
pub fn gradient(img: &FaceImage, sx: f64, sy: f64) -> (f64, f64) {
    let (w, h) = (img.width(), img.height());
    let (x0, fx) = cell(sx, w);
    let (y0, fy) = cell(sy, h);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let gx = {
        let g0 = axis_slope(|i| img.get(i, y0), sx, w);
        if fy == 0.0 {
            g0
        } else {
            g0 * (1.0 - fy) + axis_slope(|i| img.get(i, y1), sx, w) * fy
        }
    };
    let gy = {
        let g0 = axis_slope(|j| img.get(x0, j), sy, h);
        if fx == 0.0 {
            g0
        } else {
            g0 * (1.0 - fx) + axis_slope(|j| img.get(x1, j), sy, h) * fx
        }
    };
    (gx, gy)
}

/// Samples `src ∘ τ` on an `out_w × out_h` grid. Out-of-bounds samples are
/// zero and flagged invalid.
pub fn warp_into(src: &FaceImage, tau: &Transform2D, out_w: usize, out_h: usize) -> Warped {
    let (sw, sh) = (src.width(), src.height());
    let mut pixels = Vec::with_capacity(out_w * out_h);
    let mut valid = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let (cx, cy) = centered(x, y, out_w, out_h);
            let (tx, ty) = tau.apply(cx, cy);
            let (sx, sy) = raster(tx, ty, sw, sh);
            if in_bounds(sx, sy, sw, sh) {
                pixels.push(sample(src, sx, sy));
                valid.push(true);
            } else {
                pixels.push(0.0);
                valid.push(false);
            }
        }
    }
    Warped { image: FaceImage::new(out_w, out_h, pixels).expect("non-empty grid"), valid }
}

/// `warp_into` on the source's own geometry.
pub fn warp(src: &FaceImage, tau: &Transform2D) -> Warped {
    warp_into(src, tau, src.width(), src.height())
}

/// `∂(src ∘ τ)/∂params` on an `out_w × out_h` grid: one row per output pixel
/// (stacking order), one column per transform parameter. Rows of
/// out-of-bounds pixels are zero.
pub fn warp_jacobian_into(src: &FaceImage, tau: &Transform2D, out_w: usize, out_h: usize) -> DMatrix<f64> {
    let q = tau.param_count();
    let (sw, sh) = (src.width(), src.height());
    let mut jac = DMatrix::zeros(out_w * out_h, q);
    let mut jx = [0.0; 6];
    let mut jy = [0.0; 6];
    for y in 0..out_h {
        for x in 0..out_w {
            let (cx, cy) = centered(x, y, out_w, out_h);
            let (tx, ty) = tau.apply(cx, cy);
            let (sx, sy) = raster(tx, ty, sw, sh);
            if !in_bounds(sx, sy, sw, sh) {
                continue;
            }
            let (gx, gy) = gradient(src, sx, sy);
            tau.point_jacobian(cx, cy, &mut jx, &mut jy);
            let row = y * out_w + x;
            for i in 0..q {
                jac[(row, i)] = gx * jx[i] + gy * jy[i];
            }
        }
    }
    jac
}

pub fn warp_jacobian(src: &FaceImage, tau: &Transform2D) -> DMatrix<f64> {
    warp_jacobian_into(src, tau, src.width(), src.height())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TransformKind;

    fn gradient_image(w: usize, h: usize) -> FaceImage {
        FaceImage::from_fn(w, h, |x, y| 0.5 + 0.3 * ((x as f64) * 0.21).sin() * ((y as f64) * 0.17).cos())
    }

    #[test]
    fn identity_warp_is_exact() {
        let img = gradient_image(9, 7);
        for kind in [TransformKind::Translation, TransformKind::Similarity, TransformKind::Affine] {
            let out = warp(&img, &Transform2D::identity(kind));
            assert_eq!(out.image, img);
            assert!(out.valid.iter().all(|&v| v));
        }
    }

    #[test]
    fn integer_translation_shifts_pixels() {
        let img = gradient_image(8, 5);
        let out = warp(&img, &Transform2D::translation(2.0, 0.0));
        for y in 0..5 {
            for x in 0..8 {
                let i = y * 8 + x;
                if x < 6 {
                    assert!(out.valid[i]);
                    assert_eq!(out.image.get(x, y), img.get(x + 2, y));
                } else {
                    assert!(!out.valid[i]);
                    assert_eq!(out.image.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn warp_then_inverse_is_close_on_interior() {
        // smooth ramp plus a gentle bump; bilinear error stays well under 0.02
        let img = FaceImage::from_fn(40, 40, |x, y| {
            let (u, v) = (x as f64 / 39.0, y as f64 / 39.0);
            0.2 + 0.5 * u + 0.2 * v + 0.1 * (-((u - 0.5).powi(2) + (v - 0.5).powi(2)) * 8.0).exp()
        });
        let tau = Transform2D::similarity(1.3, -0.7, 0.2, 1.05).unwrap();
        let there = warp(&img, &tau);
        let back = warp(&there.image, &tau.inverse());
        let mut worst: f64 = 0.0;
        for y in 8..32 {
            for x in 8..32 {
                worst = worst.max((back.image.get(x, y) - img.get(x, y)).abs());
            }
        }
        assert!(worst < 0.02, "max deviation {worst}");
    }

    #[test]
    fn constant_image_has_zero_jacobian() {
        let img = FaceImage::from_fn(10, 10, |_, _| 0.4);
        let tau = Transform2D::similarity(0.3, 0.1, 0.05, 1.0).unwrap();
        assert!(warp_jacobian(&img, &tau).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_ramp_translation_jacobian() {
        let w = 12;
        let img = FaceImage::from_fn(w, 6, |x, _| (x + 1) as f64 / w as f64);
        let jac = warp_jacobian(&img, &Transform2D::translation(0.0, 0.0));
        for y in 0..6 {
            for x in 1..w - 1 {
                let r = y * w + x;
                assert!((jac[(r, 0)] - 1.0 / w as f64).abs() < 1e-12);
                assert!(jac[(r, 1)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn knots_use_central_differences() {
        let img = FaceImage::from_fn(5, 1, |x, _| (x * x) as f64);
        let (gx, _) = gradient(&img, 2.0, 0.0);
        assert_eq!(gx, 0.5 * (9.0 - 1.0));
        let (gx, _) = gradient(&img, 2.5, 0.0);
        assert_eq!(gx, 9.0 - 4.0);
    }

    #[test]
    fn warp_into_larger_canvas_is_centered() {
        let src = FaceImage::from_fn(9, 9, |x, y| (x * 10 + y) as f64);
        let out = warp_into(&src, &Transform2D::translation(0.0, 0.0), 3, 3);
        assert_eq!(out.image.get(1, 1), src.get(4, 4));
        assert_eq!(out.image.get(0, 0), src.get(3, 3));
    }
}
