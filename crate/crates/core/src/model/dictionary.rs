//! The learned illumination dictionary and its on-disk format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size     field
//! 0       8        magic "SILTDICT"
//! 8       4        version (u32, = 1)
//! 12      4        width (u32)
//! 16      4        height (u32)
//! 20      4        atom count k (u32)
//! 24      8*d*k    atoms as f64, column-major (atom by atom), d = width*height
//! ```

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SILTDICT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationDictionary {
    atoms: DMatrix<f64>,
    width: usize,
    height: usize,
}

impl IlluminationDictionary {
    pub fn new(atoms: DMatrix<f64>, width: usize, height: usize) -> Result<Self> {
        if atoms.nrows() != width * height {
            return Err(Error::Dimension(format!(
                "dictionary has {} rows, geometry {width}x{height} needs {}",
                atoms.nrows(),
                width * height
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dictionary atoms must be finite".into()));
        }
        Ok(IlluminationDictionary { atoms, width, height })
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.atoms.len());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.width as u32, self.height as u32, self.atom_count() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.atoms.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("truncated header ({} bytes)", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Format("bad magic, not a SILTDICT file".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        let version = word(0);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let (w, h, k) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let d = w * h;
        let expected = HEADER_LEN + 8 * d * k;
        if bytes.len() != expected {
            return Err(Error::Format(format!("payload is {} bytes, header implies {expected}", bytes.len())));
        }
        let data: Vec<f64> =
            bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Self::new(DMatrix::from_vec(d, k, data), w, h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
