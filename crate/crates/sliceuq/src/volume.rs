//! 3D scalar grids with physical spacing.
//!
//! Images, probability maps and binary labels are all `Volume`s; memory is
//! slice-major (z slowest, x fastest) so per-slice work is contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk scalar representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Uint8,
    Int16,
    Uint16,
    Float32,
}

impl ElementKind {
    pub fn byte_size(self) -> usize {
        match self {
            ElementKind::Uint8 => 1,
            ElementKind::Int16 | ElementKind::Uint16 => 2,
            ElementKind::Float32 => 4,
        }
    }

    pub fn met_name(self) -> &'static str {
        match self {
            ElementKind::Uint8 => "MET_UCHAR",
            ElementKind::Int16 => "MET_SHORT",
            ElementKind::Uint16 => "MET_USHORT",
            ElementKind::Float32 => "MET_FLOAT",
        }
    }

    pub fn from_met_name(name: &str) -> Result<Self> {
        match name {
            "MET_UCHAR" => Ok(ElementKind::Uint8),
            "MET_SHORT" => Ok(ElementKind::Int16),
            "MET_USHORT" => Ok(ElementKind::Uint16),
            "MET_FLOAT" => Ok(ElementKind::Float32),
            other => Err(Error::UnsupportedElementType(other.to_string())),
        }
    }
}

/// A 3D scalar grid. `dims` is (nz, ny, nx); `spacing`/`origin` are
/// (z, y, x) in mm. Data is row-major with x fastest.
///
/// All supported element kinds are exactly representable in f32, so a
/// single storage type round-trips bit-identically through disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub origin: (f64, f64, f64),
    pub element_kind: ElementKind,
    pub data: Vec<f32>,
}

impl Volume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
        element_kind: ElementKind,
        data: Vec<f32>,
    ) -> Result<Self> {
        if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
            return Err(Error::InvalidSpacing);
        }
        let n = dims.0 * dims.1 * dims.2;
        if data.len() != n {
            return Err(Error::DimsMismatch(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        Ok(Volume {
            dims,
            spacing,
            origin,
            element_kind,
            data,
        })
    }

    pub fn zeros(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        element_kind: ElementKind,
    ) -> Self {
        Volume {
            dims,
            spacing,
            origin: (0.0, 0.0, 0.0),
            element_kind,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims.1 + y) * self.dims.2 + x
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(z, y, x)]
    }

    #[inline]
    pub fn set(&mut self, z: usize, y: usize, x: usize, v: f32) {
        let i = self.index(z, y, x);
        self.data[i] = v;
    }

    /// Contiguous view of one axial slice.
    pub fn slice(&self, z: usize) -> &[f32] {
        let n = self.dims.1 * self.dims.2;
        &self.data[z * n..(z + 1) * n]
    }

    pub fn slice_mut(&mut self, z: usize) -> &mut [f32] {
        let n = self.dims.1 * self.dims.2;
        &mut self.data[z * n..(z + 1) * n]
    }

    pub fn same_grid(&self, other: &Volume) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn is_probability(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Reverse x within every axial slice. Involution.
    pub fn flip_x(&self) -> Volume {
        let (nz, ny, nx) = self.dims;
        let mut out = self.clone();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    out.set(z, y, x, self.get(z, y, nx - 1 - x));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_spacing() {
        assert!(Volume::new((1, 1, 1), (0.0, 1.0, 1.0), (0.0, 0.0, 0.0), ElementKind::Uint8, vec![0.0]).is_err());
    }

    #[test]
    fn rejects_wrong_data_length() {
        assert!(Volume::new((2, 2, 2), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), ElementKind::Uint8, vec![0.0; 7]).is_err());
    }

    #[test]
    fn flip_is_involution() {
        let mut v = Volume::zeros((1, 2, 2), (1.0, 1.0, 1.0), ElementKind::Float32);
        v.data = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(v.flip_x().data, vec![2.0, 1.0, 4.0, 3.0]);
        assert_eq!(v.flip_x().flip_x(), v);
    }
}
