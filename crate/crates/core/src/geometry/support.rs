use nalgebra::{DMatrix, DVector};

use super::transform::Transform2D;
use super::warp::{centered, in_bounds, raster};
use crate::error::{Error, Result};

/// Pixel mask over a `width × height` grid, stacked in scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl SupportSet {
    pub fn full(width: usize, height: usize) -> Self {
        SupportSet { width, height, mask: vec![true; width * height] }
    }

    pub fn from_mask(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::Dimension(format!("mask of {} cells for {width}x{height}", mask.len())));
        }
        Ok(SupportSet { width, height, mask })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cardinality(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    /// Stacked indices of the selected pixels, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    pub fn intersect(&self, other: &SupportSet) -> Result<SupportSet> {
        self.check_geometry(other.width, other.height)?;
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        Ok(SupportSet { width: self.width, height: self.height, mask })
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }

    fn check_geometry(&self, w: usize, h: usize) -> Result<()> {
        if (w, h) != (self.width, self.height) {
            return Err(Error::Dimension(format!("support set is {}x{}, operand is {w}x{h}", self.width, self.height)));
        }
        Ok(())
    }

    /// `P_Ω(v)`: the selected entries of a stacked vector, in scan order.
    pub fn project_vector(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.mask.len() {
            return Err(Error::Dimension(format!("vector of length {} for a {}-pixel mask", v.len(), self.mask.len())));
        }
        Ok(DVector::from_iterator(self.cardinality(), v.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(x, _)| *x)))
    }

    /// Row selection applied to every column of `m`.
    pub fn project_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.mask.len() {
            return Err(Error::Dimension(format!(
                "matrix with {} rows for a {}-pixel mask",
                m.nrows(),
                self.mask.len()
            )));
        }
        let rows = self.indices();
        Ok(DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]))
    }
}

/// `Ω_i = { p : τ_i⁻¹(p) ∈ [1, src_w] × [1, src_h] }` evaluated on a
/// `grid_w × grid_h` grid, intersected over all transforms. Each `τ_i` maps
/// source-frame positions into grid-frame positions.
pub fn support_set_between(
    transforms: &[Transform2D],
    grid_w: usize,
    grid_h: usize,
    src_w: usize,
    src_h: usize,
) -> SupportSet {
    let inverses: Vec<Transform2D> = transforms.iter().map(Transform2D::inverse).collect();
    let mut mask = Vec::with_capacity(grid_w * grid_h);
    for y in 0..grid_h {
        for x in 0..grid_w {
            let (cx, cy) = centered(x, y, grid_w, grid_h);
            let inside = inverses.iter().all(|inv| {
                let (px, py) = inv.apply(cx, cy);
                let (sx, sy) = raster(px, py, src_w, src_h);
                in_bounds(sx, sy, src_w, src_h)
            });
            mask.push(inside);
        }
    }
    SupportSet { width: grid_w, height: grid_h, mask }
}

/// Support set when grid and source share one geometry.
pub fn support_set(transforms: &[Transform2D], width: usize, height: usize) -> SupportSet {
    support_set_between(transforms, width, height, width, height)
}
