use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum `|det|` of an affine linear part before it counts as singular.
pub const MIN_AFFINE_DET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Translation,
    Similarity,
    Affine,
}

impl TransformKind {
    pub fn param_count(self) -> usize {
        match self {
            TransformKind::Translation => 2,
            TransformKind::Similarity => 4,
            TransformKind::Affine => 6,
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation" => Ok(TransformKind::Translation),
            "similarity" => Ok(TransformKind::Similarity),
            "affine" => Ok(TransformKind::Affine),
            other => Err(Error::InvalidArgument(format!("unknown transform kind {other:?}"))),
        }
    }
}

/// An element of the planar warp group.
///
/// Parameters by kind:
/// - translation: `[tx, ty]`
/// - similarity: `[tx, ty, theta, log_scale]`, mapping `p ↦ e^s R(θ) p + t`
/// - affine: row-major 2×3 matrix `[a, b, tx, c, d, ty]`
///
/// Points are plane coordinates; the warping code feeds it pixel
/// coordinates measured from the frame center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct Transform2D {
    kind: TransformKind,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTransform {
    kind: TransformKind,
    params: Vec<f64>,
}

impl TryFrom<RawTransform> for Transform2D {
    type Error = Error;

    fn try_from(raw: RawTransform) -> Result<Self> {
        Transform2D::new(raw.kind, raw.params)
    }
}

impl From<Transform2D> for RawTransform {
    fn from(t: Transform2D) -> Self {
        RawTransform { kind: t.kind, params: t.params }
    }
}

/// Linear part `[[a, b], [c, d]]` and translation `(tx, ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineMatrix {
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }
}

impl Transform2D {
    pub fn new(kind: TransformKind, params: Vec<f64>) -> Result<Self> {
        if params.len() != kind.param_count() {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} transform takes {} parameters, got {}",
                kind.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("transform parameters must be finite".into()));
        }
        let t = Transform2D { kind, params };
        if kind == TransformKind::Affine && t.matrix().det().abs() <= MIN_AFFINE_DET {
            return Err(Error::InvalidArgument("affine transform is not invertible".into()));
        }
        Ok(t)
    }

    pub fn identity(kind: TransformKind) -> Self {
        let params = match kind {
            TransformKind::Translation => vec![0.0, 0.0],
            TransformKind::Similarity => vec![0.0, 0.0, 0.0, 0.0],
            TransformKind::Affine => vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        };
        Transform2D { kind, params }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Transform2D { kind: TransformKind::Translation, params: vec![tx, ty] }
    }

    /// Rotation by `theta` radians and uniform `scale > 0`, then translation.
    pub fn similarity(tx: f64, ty: f64, theta: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!("similarity scale must be positive, got {scale}")));
        }
        Self::new(TransformKind::Similarity, vec![tx, ty, theta, scale.ln()])
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Same kind, parameters shifted by `delta`.
    pub fn offset(&self, delta: &[f64]) -> Result<Self> {
        assert_eq!(delta.len(), self.params.len());
        let params = self.params.iter().zip(delta).map(|(p, d)| p + d).collect();
        Self::new(self.kind, params)
    }

    pub fn matrix(&self) -> AffineMatrix {
        let p = &self.params;
        match self.kind {
            TransformKind::Translation => AffineMatrix { a: 1.0, b: 0.0, c: 0.0, d: 1.0, tx: p[0], ty: p[1] },
            TransformKind::Similarity => {
                let s = p[3].exp();
                let (sin, cos) = p[2].sin_cos();
                AffineMatrix { a: s * cos, b: -s * sin, c: s * sin, d: s * cos, tx: p[0], ty: p[1] }
            }
            TransformKind::Affine => AffineMatrix { a: p[0], b: p[1], c: p[3], d: p[4], tx: p[2], ty: p[5] },
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let p = &self.params;
        match self.kind {
            TransformKind::Translation => (x + p[0], y + p[1]),
            _ => {
                let m = self.matrix();
                (m.a * x + m.b * y + m.tx, m.c * x + m.d * y + m.ty)
            }
        }
    }

    pub fn inverse(&self) -> Self {
        let p = &self.params;
        match self.kind {
            TransformKind::Translation => Self::translation(-p[0], -p[1]),
            TransformKind::Similarity => {
                // p = e^{-s} R(-θ) (p' - t)
                let inv_s = (-p[3]).exp();
                let (sin, cos) = p[2].sin_cos();
                let tx = -inv_s * (cos * p[0] + sin * p[1]);
                let ty = -inv_s * (-sin * p[0] + cos * p[1]);
                Transform2D { kind: self.kind, params: vec![tx, ty, -p[2], -p[3]] }
            }
            TransformKind::Affine => {
                let m = self.matrix();
                let det = m.det();
                let (a, b, c, d) = (m.d / det, -m.b / det, -m.c / det, m.a / det);
                let tx = -(a * m.tx + b * m.ty);
                let ty = -(c * m.tx + d * m.ty);
                Transform2D { kind: self.kind, params: vec![a, b, tx, c, d, ty] }
            }
        }
    }

    /// `self ∘ other`, i.e. `p ↦ self(other(p))`. The result has the more
    /// general of the two kinds.
    pub fn compose(&self, other: &Transform2D) -> Self {
        let kind = self.kind.max(other.kind);
        match kind {
            TransformKind::Translation => {
                Self::translation(self.params[0] + other.params[0], self.params[1] + other.params[1])
            }
            TransformKind::Similarity => {
                let (s1, s2) = (self.promote(kind), other.promote(kind));
                let (a, b) = (&s1.params, &s2.params);
                let (tx, ty) = s1.apply(b[0], b[1]);
                Transform2D { kind, params: vec![tx, ty, a[2] + b[2], a[3] + b[3]] }
            }
            TransformKind::Affine => {
                let (m1, m2) = (self.matrix(), other.matrix());
                let a = m1.a * m2.a + m1.b * m2.c;
                let b = m1.a * m2.b + m1.b * m2.d;
                let c = m1.c * m2.a + m1.d * m2.c;
                let d = m1.c * m2.b + m1.d * m2.d;
                let tx = m1.a * m2.tx + m1.b * m2.ty + m1.tx;
                let ty = m1.c * m2.tx + m1.d * m2.ty + m1.ty;
                Transform2D { kind, params: vec![a, b, tx, c, d, ty] }
            }
        }
    }

    /// Re-expresses the transform in a more general kind. Panics on a
    /// narrowing request.
    pub fn promote(&self, kind: TransformKind) -> Self {
        assert!(kind >= self.kind, "cannot narrow {:?} to {kind:?}", self.kind);
        if kind == self.kind {
            return self.clone();
        }
        match kind {
            TransformKind::Similarity => Transform2D { kind, params: vec![self.params[0], self.params[1], 0.0, 0.0] },
            TransformKind::Affine => {
                let m = self.matrix();
                Transform2D { kind, params: vec![m.a, m.b, m.tx, m.c, m.d, m.ty] }
            }
            TransformKind::Translation => unreachable!(),
        }
    }

    /// Writes `∂τ(p)/∂params` at `(x, y)`: `jx[i] = ∂x'/∂p_i`, `jy[i] = ∂y'/∂p_i`.
    pub fn point_jacobian(&self, x: f64, y: f64, jx: &mut [f64], jy: &mut [f64]) {
        let p = &self.params;
        match self.kind {
            TransformKind::Translation => {
                jx[..2].copy_from_slice(&[1.0, 0.0]);
                jy[..2].copy_from_slice(&[0.0, 1.0]);
            }
            TransformKind::Similarity => {
                let s = p[3].exp();
                let (sin, cos) = p[2].sin_cos();
                let rx = s * (cos * x - sin * y);
                let ry = s * (sin * x + cos * y);
                jx[..4].copy_from_slice(&[1.0, 0.0, -ry, rx]);
                jy[..4].copy_from_slice(&[0.0, 1.0, rx, ry]);
            }
            TransformKind::Affine => {
                jx[..6].copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0]);
                jy[..6].copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0]);
            }
        }
    }

    /// Euclidean distance between parameter vectors (same kind required).
    pub fn param_distance(&self, other: &Transform2D) -> f64 {
        assert_eq!(self.kind, other.kind);
        self.params.iter().zip(&other.params).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}
