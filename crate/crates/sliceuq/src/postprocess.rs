//! Targeted post-processing: flag slices whose predicted HD exceeds a
//! threshold and Gaussian-smooth only those, leaving confident slices
//! untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{predict, LinearModel};
use crate::uncertainty::{SliceUncertainty, TargetKind};
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessConfig {
    pub hd_threshold_mm: f64,
    pub sigma_px: f64,
    pub rethreshold: f64,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig { hd_threshold_mm: 8.0, sigma_px: 5.0, rethreshold: 0.5 }
    }
}

impl PostprocessConfig {
    /// Kernel radius in pixels: ceil(4 sigma).
    pub fn kernel_radius(&self) -> usize {
        (4.0 * self.sigma_px).ceil() as usize
    }
}

/// `predicted_hd_mm` is `None` for slices flagged because no measure was
/// defined there (interior gap in the consensus foreground).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSlice {
    pub slice_index: usize,
    pub predicted_hd_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceChange {
    pub slice_index: usize,
    pub predicted_hd_mm: Option<f64>,
    pub modified_voxels: usize,
    pub boundary_before_px: usize,
    pub boundary_after_px: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostprocessReport {
    pub flagged: Vec<SliceChange>,
}

/// Slices whose raw predicted HD exceeds the threshold, plus interior
/// slices with no uncertainty record (no consensus FG between FG
/// neighbors): an unstable prediction is maximal uncertainty.
pub fn flag_slices(
    uncertainty: &[SliceUncertainty],
    hd_model: &LinearModel,
    cfg: &PostprocessConfig,
) -> Result<Vec<FlaggedSlice>> {
    if hd_model.target != TargetKind::HdMm {
        return Err(Error::ModelMismatch {
            expected: "hd_mm".into(),
            actual: format!("{:?}", hd_model.target),
        });
    }
    let mut flags = Vec::new();
    for u in uncertainty {
        let x = match hd_model.measure_kind {
            crate::uncertainty::MeasureKind::Type1 => u.type1,
            crate::uncertainty::MeasureKind::Type2 => u.type2,
            crate::uncertainty::MeasureKind::Type3 => u.type3,
        };
        let p = predict(hd_model, x);
        if p.raw > cfg.hd_threshold_mm {
            flags.push(FlaggedSlice { slice_index: u.slice_index, predicted_hd_mm: Some(p.raw) });
        }
    }
    if let (Some(first), Some(last)) = (
        uncertainty.iter().map(|u| u.slice_index).min(),
        uncertainty.iter().map(|u| u.slice_index).max(),
    ) {
        for z in first..=last {
            if !uncertainty.iter().any(|u| u.slice_index == z) {
                flags.push(FlaggedSlice { slice_index: z, predicted_hd_mm: None });
            }
        }
    }
    flags.sort_by_key(|f| f.slice_index);
    Ok(flags)
}

fn reflect(mut i: isize, n: isize) -> usize {
    // half-sample symmetric: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable 2D Gaussian with normalized kernel of radius ceil(4 sigma)
/// and reflected edges. Arithmetic in f64.
pub fn gaussian_smooth_slice(slice: &[f32], dims: (usize, usize), sigma: f64) -> Vec<f64> {
    let (ny, nx) = dims;
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;

    // rows (x direction)
    let mut tmp = vec![0.0f64; ny * nx];
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - radius, nx as isize);
                acc += w * slice[y * nx + sx] as f64;
            }
            tmp[y * nx + x] = acc;
        }
    }
    // columns (y direction)
    let mut out = vec![0.0f64; ny * nx];
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - radius, ny as isize);
                acc += w * tmp[sy * nx + x];
            }
            out[y * nx + x] = acc;
        }
    }
    out
}

/// FG-pixel faces adjacent to BG or the image border (4-connectivity).
pub fn boundary_length_px(slice: &[f32], dims: (usize, usize)) -> usize {
    let (ny, nx) = dims;
    let at = |y: isize, x: isize| -> bool {
        if y < 0 || x < 0 || y >= ny as isize || x >= nx as isize {
            false
        } else {
            slice[y as usize * nx + x as usize] != 0.0
        }
    };
    let mut count = 0;
    for y in 0..ny as isize {
        for x in 0..nx as isize {
            if !at(y, x) {
                continue;
            }
            count += !at(y - 1, x) as usize
                + !at(y + 1, x) as usize
                + !at(y, x - 1) as usize
                + !at(y, x + 1) as usize;
        }
    }
    count
}

/// Smooth the mean-probability slice and re-threshold into the label, for
/// flagged slices only. Everything else is copied bit-identically.
pub fn apply_postprocess(
    mean_prob: &Volume,
    label: &Volume,
    flags: &[FlaggedSlice],
    cfg: &PostprocessConfig,
) -> Result<(Volume, PostprocessReport)> {
    if mean_prob.dims != label.dims {
        return Err(Error::DimsMismatch(format!(
            "{:?} vs {:?}",
            mean_prob.dims, label.dims
        )));
    }
    let (nz, ny, nx) = label.dims;
    let mut out = label.clone();
    let mut changes = Vec::with_capacity(flags.len());
    for f in flags {
        let z = f.slice_index;
        if z >= nz {
            return Err(Error::SliceOutOfRange(z));
        }
        let before = boundary_length_px(label.slice(z), (ny, nx));
        let smoothed = gaussian_smooth_slice(mean_prob.slice(z), (ny, nx), cfg.sigma_px);
        let new_slice: Vec<f32> = smoothed
            .iter()
            .map(|&p| (p >= cfg.rethreshold) as u8 as f32)
            .collect();
        let modified = new_slice
            .iter()
            .zip(label.slice(z).iter())
            .filter(|(a, b)| a != b)
            .count();
        let after = boundary_length_px(&new_slice, (ny, nx));
        out.slice_mut(z).copy_from_slice(&new_slice);
        changes.push(SliceChange {
            slice_index: z,
            predicted_hd_mm: f.predicted_hd_mm,
            modified_voxels: modified,
            boundary_before_px: before,
            boundary_after_px: after,
        });
    }
    Ok((out, PostprocessReport { flagged: changes }))
}
